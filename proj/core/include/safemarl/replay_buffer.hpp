#pragma once

#include <cstddef>
#include <random>
#include <span>

#include <Eigen/Core>

#include "safemarl/patrol_env.hpp"

namespace safemarl {

/// One stored step: joint state (all observations stacked in agent order),
/// the executed (shielded) actions, rewards and next joint state.
struct Transition {
  Eigen::VectorXd state;
  JointActions actions;
  std::array<double, kNumAgents> rewards{};
  Eigen::VectorXd next_state;
  bool done = false;
};

/// Column-major minibatch, one sample per column.
struct Batch {
  Eigen::MatrixXd states;       // state_dim x S
  Eigen::MatrixXd actions;      // 2*kNumAgents x S, agent-major
  Eigen::MatrixXd rewards;      // kNumAgents x S
  Eigen::MatrixXd next_states;  // state_dim x S
  Eigen::VectorXd done;         // S, 1.0 for terminal samples

  Eigen::Index size() const { return states.cols(); }
};

/// Fixed-capacity FIFO ring.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim);

  void push(const Transition& t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int state_dim() const { return state_dim_; }

  /// i = 0 is the oldest stored transition.
  Transition at(std::size_t i) const;

  /// Uniform draw with replacement. Returned indices are ring slots
  /// (storage positions), not age order.
  std::vector<std::size_t> sample_indices(std::size_t count, std::mt19937_64& rng) const;
  Batch gather(std::span<const std::size_t> slots) const;
  Batch sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  int state_dim_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  Eigen::MatrixXd states_;
  Eigen::MatrixXd actions_;
  Eigen::MatrixXd rewards_;
  Eigen::MatrixXd next_states_;
  Eigen::VectorXd done_;
};

}  // namespace safemarl
