#include "safemarl/maddpg.hpp"

#include <cmath>
#include <limits>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

Eigen::MatrixXd critic_inputs(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd in(states.rows() + actions.rows(), states.cols());
  in.topRows(states.rows()) = states;
  in.bottomRows(actions.rows()) = actions;
  return in;
}

int obs_dim_of(const Mlp& actor) { return actor.input_size(); }

}  // namespace

void TrainerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("trainer: " + msg); };
  if (episodes < 0) fail("episodes must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) fail("learning rates must be > 0");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(noise_decay > 0.0 && noise_decay <= 1.0)) fail("noise_decay must lie in (0, 1]");
  if (update_every < 1) fail("update_every must be >= 1");
  if (warmup < 0) fail("warmup must be >= 0");
  if (buffer_capacity < 1) fail("buffer_capacity must be >= 1");
  if (batch_size > buffer_capacity) fail("batch_size must not exceed buffer_capacity");
  if (hidden < 1) fail("hidden must be >= 1");
  if (!(reward_scale > 0.0)) fail("reward_scale must be > 0");
}

Mlp make_actor(int obs_dim, int hidden, double a_max) {
  return Mlp({obs_dim, hidden, hidden, 2}, Activation::relu, Activation::tanh, a_max);
}

Mlp make_critic(int state_dim, int hidden) {
  return Mlp({state_dim + 2 * kNumAgents, hidden, hidden, 1}, Activation::relu,
             Activation::identity);
}

Vec2 actor_forward(const Mlp& actor, const Observation& obs) {
  const Eigen::MatrixXd out = actor.forward(obs);
  return Vec2(out(0, 0), out(1, 0));
}

double critic_forward(const Mlp& critic, const Eigen::VectorXd& joint_state,
                      const JointActions& actions) {
  Eigen::VectorXd in(joint_state.size() + 2 * kNumAgents);
  in.head(joint_state.size()) = joint_state;
  for (int i = 0; i < kNumAgents; ++i) in.segment<2>(joint_state.size() + 2 * i) = actions[i];
  return critic.forward(in)(0, 0);
}

Eigen::MatrixXd target_actions(const Batch& batch, std::span<const Mlp> target_actors) {
  if (target_actors.size() != kNumAgents) throw InputError("td_target: need one actor per agent");
  const int obs_dim = obs_dim_of(target_actors[0]);
  Eigen::MatrixXd next_actions(2 * kNumAgents, batch.size());
  for (int k = 0; k < kNumAgents; ++k) {
    next_actions.middleRows(2 * k, 2) =
        target_actors[k].forward(batch.next_states.middleRows(observation_offset(k, obs_dim), obs_dim));
  }
  return next_actions;
}

Eigen::VectorXd td_target(const Batch& batch, int agent, const Eigen::MatrixXd& next_actions,
                          const Mlp& target_critic, double gamma, double reward_scale) {
  const Eigen::VectorXd q_next =
      target_critic.forward(critic_inputs(batch.next_states, next_actions)).row(0).transpose();
  const Eigen::VectorXd not_done = Eigen::VectorXd::Ones(batch.size()) - batch.done;
  return reward_scale * batch.rewards.row(agent).transpose() +
         gamma * not_done.cwiseProduct(q_next);
}

Eigen::VectorXd td_target(const Batch& batch, int agent, std::span<const Mlp> target_actors,
                          const Mlp& target_critic, double gamma, double reward_scale) {
  return td_target(batch, agent, target_actions(batch, target_actors), target_critic, gamma,
                   reward_scale);
}

LossAndGradient critic_loss(const Mlp& critic, const Batch& batch, const Eigen::VectorXd& y) {
  const auto S = static_cast<double>(batch.size());
  Mlp::Tape tape;
  const Eigen::MatrixXd& q = critic.forward(critic_inputs(batch.states, batch.actions), tape);
  const Eigen::RowVectorXd err = y.transpose() - q.row(0);
  LossAndGradient out;
  out.value = err.squaredNorm() / S;
  const Eigen::MatrixXd dq = (-2.0 / S) * err;
  critic.backward(tape, dq, &out.gradient);
  return out;
}

LossAndGradient actor_objective(const Mlp& actor, const Mlp& critic, const Batch& batch,
                                int agent) {
  const Eigen::Index S = batch.size();
  const int obs_dim = obs_dim_of(actor);
  Mlp::Tape actor_tape;
  const Eigen::MatrixXd& own =
      actor.forward(batch.states.middleRows(observation_offset(agent, obs_dim), obs_dim), actor_tape);

  Eigen::MatrixXd actions = batch.actions;
  actions.middleRows(2 * agent, 2) = own;
  Mlp::Tape critic_tape;
  const Eigen::MatrixXd& q = critic.forward(critic_inputs(batch.states, actions), critic_tape);

  LossAndGradient out;
  out.value = q.sum() / static_cast<double>(S);
  const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, S, 1.0 / static_cast<double>(S));
  const Eigen::MatrixXd d_in = critic.backward(critic_tape, dq, nullptr);
  const Eigen::MatrixXd d_own = d_in.middleRows(batch.states.rows() + 2 * agent, 2);
  actor.backward(actor_tape, d_own, &out.gradient);
  return out;
}

double critic_update(Mlp& critic, Adam& opt, const Batch& batch, const Eigen::VectorXd& y) {
  const LossAndGradient lg = critic_loss(critic, batch, y);
  if (!std::isfinite(lg.value) || !lg.gradient.allFinite()) {
    throw DivergenceError("critic loss is not finite", -1);
  }
  opt.step(critic.parameters(), lg.gradient);
  return lg.value;
}

double actor_update(Mlp& actor, Adam& opt, const Mlp& critic, const Batch& batch, int agent) {
  const LossAndGradient lg = actor_objective(actor, critic, batch, agent);
  if (!std::isfinite(lg.value) || !lg.gradient.allFinite()) {
    throw DivergenceError("actor objective is not finite", -1);
  }
  opt.step(actor.parameters(), -lg.gradient);
  return lg.gradient.norm();
}

void soft_update(Mlp& target, const Mlp& online, double xi) {
  if (!target.same_architecture(online)) throw InputError("soft_update: architecture mismatch");
  target.parameters() = xi * online.parameters() + (1.0 - xi) * target.parameters();
}

Trainer::Trainer(PatrolConfig env_config, TrainerConfig config, bool shield_enabled)
    : env_(std::move(env_config)),
      config_(config),
      shield_enabled_(shield_enabled),
      obs_dim_(observation_size(env_.config().world)),
      rng_(config.seed),
      buffer_(static_cast<std::size_t>(std::max(config.buffer_capacity, 1)),
              observation_size(env_.config().world) * kNumAgents) {
  config_.validate();
  const double a_max = env_.config().world.a_max;
  for (auto& l : learners_) {
    l.actor = make_actor(obs_dim_, config_.hidden, a_max);
    l.critic = make_critic(state_dim(), config_.hidden);
    l.actor.initialize(rng_);
    l.critic.initialize(rng_);
    l.target_actor = l.actor;
    l.target_critic = l.critic;
    l.actor_opt = Adam(l.actor.parameter_count(), config_.lr_actor);
    l.critic_opt = Adam(l.critic.parameter_count(), config_.lr_critic);
  }
}

ShieldResult Trainer::safe_action(int agent, const Vec2& nominal, const JointAgents& agents) const {
  const auto& cfg = env_.config();
  if (!shield_enabled_) {
    ShieldResult r;
    r.u_safe = nominal;
    r.report.agent_id = agent;
    r.report.u_nominal = nominal;
    r.report.u_safe = nominal;
    r.report.status = ShieldStatus::passthrough;
    r.report.min_h = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  std::array<Neighbor, kNumAgents - 1> others;
  int k = 0;
  for (int j = 0; j < kNumAgents; ++j) {
    if (j != agent) others[k++] = {j, agents[j]};
  }
  return filter_action(agent, nominal, agents[agent], others, cfg.world.obstacles, cfg.world,
                       cfg.shield);
}

EpisodeResult Trainer::run_episode(int episode, const RolloutOptions& options) {
  const auto& world = env_.config().world;
  const double sigma = config_.noise_sigma * std::pow(config_.noise_decay, episode);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto [state, obs] = env_.reset(rng_());
  EpisodeResult result;
  result.initial = state.agents;
  result.trajectory.reserve(static_cast<std::size_t>(env_.config().episode_length));

  bool done = false;
  while (!done) {
    JointActions nominal;
    JointActions safe;
    StepRecord rec;
    for (int i = 0; i < kNumAgents; ++i) {
      Vec2 u = actor_forward(learners_[i].actor, obs[i]);
      if (options.explore && sigma > 0.0) {
        u.x() += sigma * noise(rng_);
        u.y() += sigma * noise(rng_);
      }
      nominal[i] = u.cwiseMax(-world.a_max).cwiseMin(world.a_max);
    }
    for (int i = 0; i < kNumAgents; ++i) {
      ShieldResult s = safe_action(i, nominal[i], state.agents);
      safe[i] = s.u_safe;
      rec.status[i] = s.report.status;
      if (shield_enabled_) result.reports.push_back(s.report);
    }

    StepResult step = env_.step(state, safe);

    if (options.learn) {
      Transition t;
      t.state.resize(state_dim());
      t.next_state.resize(state_dim());
      for (int i = 0; i < kNumAgents; ++i) {
        t.state.segment(observation_offset(i, obs_dim_), obs_dim_) = obs[i];
        t.next_state.segment(observation_offset(i, obs_dim_), obs_dim_) = step.observations[i];
      }
      t.actions = safe;
      t.rewards = step.rewards;
      t.done = step.terminal;
      buffer_.push(t);
      ++total_steps_;
      if (total_steps_ >= config_.warmup && total_steps_ % config_.update_every == 0 &&
          buffer_.size() >= static_cast<std::size_t>(config_.batch_size)) {
        update(episode, result.losses);
      }
    }

    rec.step = step.state.step_count;
    rec.agents = step.state.agents;
    rec.nominal = nominal;
    rec.safe = safe;
    rec.rewards = step.rewards;
    rec.checkins_reached = step.state.checkins_reached;
    result.trajectory.push_back(rec);

    done = step.done;
    state = std::move(step.state);
    obs = std::move(step.observations);
  }

  result.metrics = collision_audit(result.trajectory, env_.config());
  if (!options.keep_trajectory) {
    result.trajectory.clear();
    result.reports.clear();
  }
  return result;
}

void Trainer::update(int episode, std::vector<double>& losses) {
  // One minibatch per round, shared by every agent's update.
  const Batch batch = buffer_.sample(static_cast<std::size_t>(config_.batch_size), rng_);
  std::array<Mlp, kNumAgents> target_actors;
  for (int k = 0; k < kNumAgents; ++k) target_actors[k] = learners_[k].target_actor;
  // Target networks are untouched until the soft updates below, so the
  // next-state actions are the same for every agent's target.
  const Eigen::MatrixXd next_actions = target_actions(batch, target_actors);

  try {
    for (int i = 0; i < kNumAgents; ++i) {
      AgentLearner& l = learners_[i];
      const Eigen::VectorXd y = td_target(batch, i, next_actions, l.target_critic,
                                          config_.gamma, config_.reward_scale);
      losses.push_back(critic_update(l.critic, l.critic_opt, batch, y));
      actor_update(l.actor, l.actor_opt, l.critic, batch, i);
    }
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.reason(), episode);
  }
  for (auto& l : learners_) {
    soft_update(l.target_actor, l.actor, config_.tau);
    soft_update(l.target_critic, l.critic, config_.tau);
  }
  ++update_rounds_;
}

std::vector<EpisodeMetrics> Trainer::train(
    const std::function<void(int, const EpisodeResult&)>& on_episode) {
  std::vector<EpisodeMetrics> out;
  out.reserve(static_cast<std::size_t>(config_.episodes));
  for (int e = 0; e < config_.episodes; ++e) {
    EpisodeResult r = run_episode(e, {});
    if (on_episode) on_episode(e, r);
    out.push_back(r.metrics);
  }
  return out;
}

}  // namespace safemarl
