#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "safemarl/mlp.hpp"
#include "safemarl/patrol_env.hpp"
#include "safemarl/replay_buffer.hpp"
#include "safemarl/shield.hpp"

namespace safemarl {

struct TrainerConfig {
  int episodes = 500;
  int batch_size = 256;
  double gamma = 0.95;
  double tau = 0.01;  // soft-update rate
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  double noise_sigma = 0.1;
  double noise_decay = 0.9995;  // per episode
  int update_every = 4;
  int warmup = 1000;  // transitions stored before the first update
  int buffer_capacity = 100000;
  int hidden = 64;
  // Multiplies rewards inside the TD target only; logged rewards are raw.
  double reward_scale = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

Mlp make_actor(int obs_dim, int hidden, double a_max);
Mlp make_critic(int state_dim, int hidden);

/// Deterministic policy output in [-a_max, a_max]^2.
Vec2 actor_forward(const Mlp& actor, const Observation& obs);

/// Critic input is the joint state followed by all actions in agent order.
double critic_forward(const Mlp& critic, const Eigen::VectorXd& joint_state,
                      const JointActions& actions);

/// Rows of agent `agent`'s observation inside a stacked joint state.
inline Eigen::Index observation_offset(int agent, int obs_dim) {
  return static_cast<Eigen::Index>(agent) * obs_dim;
}

/// y = reward_scale * r + gamma * Q'(x', pi'_1(x'_1), ..., pi'_N(x'_N)),
/// with the bootstrap dropped on terminal samples.
Eigen::VectorXd td_target(const Batch& batch, int agent, std::span<const Mlp> target_actors,
                          const Mlp& target_critic, double gamma, double reward_scale);

/// Target actors' actions at the batch's next states, agent-major rows.
Eigen::MatrixXd target_actions(const Batch& batch, std::span<const Mlp> target_actors);

/// Same target from precomputed next-state actions.
Eigen::VectorXd td_target(const Batch& batch, int agent, const Eigen::MatrixXd& next_actions,
                          const Mlp& target_critic, double gamma, double reward_scale);

struct LossAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean squared TD error (1/S) sum (y - Q)^2 and its parameter gradient.
LossAndGradient critic_loss(const Mlp& critic, const Batch& batch, const Eigen::VectorXd& y);

/// J = (1/S) sum Q(x, ..., pi(x_i), ...) with the other agents' actions
/// taken from the batch, and dJ/d(actor params).
LossAndGradient actor_objective(const Mlp& actor, const Mlp& critic, const Batch& batch,
                                int agent);

/// One Adam step on the critic. Returns the pre-step loss. Throws
/// DivergenceError (episode -1) for a non-finite loss.
double critic_update(Mlp& critic, Adam& opt, const Batch& batch, const Eigen::VectorXd& y);

/// One Adam ascent step on J. Returns |dJ/dtheta|.
double actor_update(Mlp& actor, Adam& opt, const Mlp& critic, const Batch& batch, int agent);

/// target <- xi * online + (1 - xi) * target. Throws InputError on an
/// architecture mismatch.
void soft_update(Mlp& target, const Mlp& online, double xi);

struct AgentLearner {
  Mlp actor;
  Mlp critic;
  Mlp target_actor;
  Mlp target_critic;
  Adam actor_opt;
  Adam critic_opt;
};

/// Everything one episode produced.
struct EpisodeResult {
  EpisodeMetrics metrics;
  JointAgents initial;                // state after reset
  std::vector<StepRecord> trajectory;
  std::vector<ShieldReport> reports;  // two per step when the shield is on
  std::vector<double> losses;         // critic losses of updates in this episode
};

struct RolloutOptions {
  bool explore = true;
  bool learn = true;
  bool keep_trajectory = false;
};

/// MADDPG with the per-agent shield between action selection and execution.
class Trainer {
 public:
  Trainer(PatrolConfig env_config, TrainerConfig config, bool shield_enabled);

  const TrainerConfig& config() const { return config_; }
  const PatrolEnv& env() const { return env_; }
  bool shield_enabled() const { return shield_enabled_; }
  int obs_dim() const { return obs_dim_; }
  int state_dim() const { return obs_dim_ * kNumAgents; }

  std::array<AgentLearner, kNumAgents>& learners() { return learners_; }
  const std::array<AgentLearner, kNumAgents>& learners() const { return learners_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long total_steps() const { return total_steps_; }
  long update_rounds() const { return update_rounds_; }

  /// Runs one episode. `episode` sets the exploration noise scale and is
  /// reported with divergence errors.
  EpisodeResult run_episode(int episode, const RolloutOptions& options);

  /// Runs config.episodes episodes, invoking `on_episode` after each.
  std::vector<EpisodeMetrics> train(
      const std::function<void(int, const EpisodeResult&)>& on_episode = {});

  /// Filters (or passes through) one agent's nominal action.
  ShieldResult safe_action(int agent, const Vec2& nominal, const JointAgents& agents) const;

 private:
  void update(int episode, std::vector<double>& losses);

  PatrolEnv env_;
  TrainerConfig config_;
  bool shield_enabled_;
  int obs_dim_;
  std::mt19937_64 rng_;
  std::array<AgentLearner, kNumAgents> learners_;
  ReplayBuffer buffer_;
  long total_steps_ = 0;
  long update_rounds_ = 0;
};

}  // namespace safemarl
