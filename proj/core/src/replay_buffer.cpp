#include "safemarl/replay_buffer.hpp"

#include "safemarl/errors.hpp"

namespace safemarl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim)
    : capacity_(capacity), state_dim_(state_dim) {
  if (capacity == 0) throw InputError("ReplayBuffer: capacity must be >= 1");
  const auto cap = static_cast<Eigen::Index>(capacity);
  states_.resize(state_dim, cap);
  actions_.resize(2 * kNumAgents, cap);
  rewards_.resize(kNumAgents, cap);
  next_states_.resize(state_dim, cap);
  done_.resize(cap);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_) {
    throw InputError("ReplayBuffer: state size mismatch");
  }
  const auto slot = static_cast<Eigen::Index>(head_);
  states_.col(slot) = t.state;
  next_states_.col(slot) = t.next_state;
  for (int i = 0; i < kNumAgents; ++i) {
    actions_.col(slot).segment<2>(2 * i) = t.actions[i];
    rewards_(i, slot) = t.rewards[i];
  }
  done_(slot) = t.done ? 1.0 : 0.0;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw InputError("ReplayBuffer: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  const auto slot = static_cast<Eigen::Index>((oldest + i) % capacity_);
  Transition t;
  t.state = states_.col(slot);
  t.next_state = next_states_.col(slot);
  for (int k = 0; k < kNumAgents; ++k) {
    t.actions[k] = actions_.col(slot).segment<2>(2 * k);
    t.rewards[k] = rewards_(k, slot);
  }
  t.done = done_(slot) != 0.0;
  return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count,
                                                      std::mt19937_64& rng) const {
  if (size_ == 0) throw InputError("ReplayBuffer: cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> slots(count);
  for (auto& s : slots) s = pick(rng);
  return slots;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
  const auto n = static_cast<Eigen::Index>(slots.size());
  Batch b;
  b.states.resize(state_dim_, n);
  b.actions.resize(2 * kNumAgents, n);
  b.rewards.resize(kNumAgents, n);
  b.next_states.resize(state_dim_, n);
  b.done.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto s = static_cast<Eigen::Index>(slots[j]);
    b.states.col(j) = states_.col(s);
    b.actions.col(j) = actions_.col(s);
    b.rewards.col(j) = rewards_.col(s);
    b.next_states.col(j) = next_states_.col(s);
    b.done(j) = done_(s);
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  const auto slots = sample_indices(count, rng);
  return gather(slots);
}

}  // namespace safemarl
