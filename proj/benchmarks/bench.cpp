#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "safemarl/maddpg.hpp"
#include "safemarl/patrol_env.hpp"
#include "safemarl/qp.hpp"
#include "safemarl/shield.hpp"

using namespace safemarl;

namespace {

std::vector<QpProblem> random_problems(int rows, int count) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<QpProblem> out(count);
  for (auto& p : out) {
    p.nominal = Vec2(1.5 * u(rng), 1.5 * u(rng));
    for (int i = 0; i < rows; ++i) {
      LinearConstraint c;
      c.normal = Vec2(u(rng), u(rng));
      c.bound = 0.6 * u(rng);
      p.constraints.push_back(c);
    }
  }
  return out;
}

void BM_QpSolve(benchmark::State& state) {
  const auto problems = random_problems(static_cast<int>(state.range(0)), 256);
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(problems[k++ % problems.size()]));
  }
}
BENCHMARK(BM_QpSolve)->DenseRange(1, 6);

void BM_FilterAction(benchmark::State& state) {
  const PatrolConfig cfg;
  const PatrolEnv env(cfg);
  std::vector<EnvState> states;
  for (std::uint64_t s = 0; s < 64; ++s) states.push_back(env.reset(s).first);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t k = 0;
  for (auto _ : state) {
    const EnvState& st = states[k++ % states.size()];
    const std::array<Neighbor, 1> other{{{1, st.agents[1]}}};
    benchmark::DoNotOptimize(filter_action(0, Vec2(u(rng), u(rng)), st.agents[0], other,
                                           cfg.world.obstacles, cfg.world, cfg.shield));
  }
}
BENCHMARK(BM_FilterAction);

Batch random_batch(int state_dim, int size) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Batch b;
  b.states = Eigen::MatrixXd::NullaryExpr(state_dim, size, [&] { return n(rng); });
  b.next_states = Eigen::MatrixXd::NullaryExpr(state_dim, size, [&] { return n(rng); });
  b.actions = Eigen::MatrixXd::NullaryExpr(2 * kNumAgents, size, [&] { return n(rng); });
  b.rewards = Eigen::MatrixXd::NullaryExpr(kNumAgents, size, [&] { return n(rng); });
  b.done = Eigen::VectorXd::Zero(size);
  return b;
}

// Default network and batch sizes: one critic gradient and one actor
// gradient per agent per update round.
void BM_CriticLoss(benchmark::State& state) {
  const int obs = observation_size(PatrolConfig{}.world);
  const Batch b = random_batch(kNumAgents * obs, 256);
  std::mt19937_64 rng(4);
  Mlp critic = make_critic(kNumAgents * obs, 64);
  critic.initialize(rng);
  const Eigen::VectorXd y = b.rewards.row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(critic_loss(critic, b, y));
}
BENCHMARK(BM_CriticLoss)->Unit(benchmark::kMicrosecond);

void BM_ActorObjective(benchmark::State& state) {
  const int obs = observation_size(PatrolConfig{}.world);
  const Batch b = random_batch(kNumAgents * obs, 256);
  std::mt19937_64 rng(5);
  Mlp actor = make_actor(obs, 64, 1.0), critic = make_critic(kNumAgents * obs, 64);
  actor.initialize(rng);
  critic.initialize(rng);
  for (auto _ : state) benchmark::DoNotOptimize(actor_objective(actor, critic, b, 0));
}
BENCHMARK(BM_ActorObjective)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
