// One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.
//
//   acceptance [--work DIR] [--only 1,4,5]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "commands.hpp"
#include "oracles.hpp"
#include "safemarl/maddpg.hpp"
#include "safemarl/qp.hpp"
#include "safemarl/shield.hpp"

using namespace safemarl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr double kDistanceTolerance = 1e-3;

// ---------------------------------------------------------------------------
// Training runs shared by criteria 1-3.

struct TrainingRuns {
  std::vector<std::vector<cli::MetricsRow>> shielded, unshielded;
  std::string error;
};

const TrainingRuns& training_runs(const fs::path& work) {
  static TrainingRuns runs = [&] {
    TrainingRuns r;
    std::ostringstream log, err;
    for (const bool shield : {true, false}) {
      cli::TrainOptions o;  // defaults: 5 runs x 500 episodes x 200 steps, seeds 1..5
      o.no_shield = !shield;
      o.out = work / "train";
      const int code = cli::cmd_train(o, log, err);
      if (code != cli::kOk) {
        r.error = "train exited " + std::to_string(code) + ": " + err.str();
        return r;
      }
      auto& dst = shield ? r.shielded : r.unshielded;
      const fs::path dir = work / "train" / (shield ? "shielded" : "unshielded");
      for (int k = 0; k < 5; ++k) {
        dst.push_back(cli::read_metrics(dir / format("run_%02d", k) / "metrics.csv"));
      }
    }
    return r;
  }();
  return runs;
}

Outcome shielded_training_is_collision_free(const fs::path& work) {
  const TrainingRuns& t = training_runs(work);
  if (!t.error.empty()) return {false, t.error};
  const double d_s = ShieldParams{}.d_s;
  long episodes = 0, collided = 0, close_steps = 0;
  double min_dist = INFINITY;
  for (const auto& run : t.shielded) {
    for (const auto& row : run) {
      ++episodes;
      collided += row.collision_episode;
      close_steps += row.collision_steps;
      min_dist = std::min(min_dist, row.min_dist);
    }
  }
  // Obstacles are points (radius 0) in the default world, so every entity
  // distance is compared against d_s.
  const bool pass = episodes == 5 * 500 && collided == 0 && close_steps == 0 &&
                    min_dist >= d_s - kDistanceTolerance;
  return {pass, format("%ld episodes, %ld collision episodes, %ld collision steps, min distance %.5f "
                       "(need >= %.4f)",
                       episodes, collided, close_steps, min_dist, d_s - kDistanceTolerance)};
}

Outcome unshielded_training_collides(const fs::path& work) {
  const TrainingRuns& t = training_runs(work);
  if (!t.error.empty()) return {false, t.error};
  long episodes = 0, collided = 0;
  for (const auto& run : t.unshielded) {
    for (const auto& row : run) {
      ++episodes;
      collided += row.collision_episode;
    }
  }
  const double ratio = episodes ? static_cast<double>(collided) / episodes : 0.0;
  return {ratio > 0.10, format("%ld/%ld collision episodes = %.3f%% (need > 10%%)", collided,
                               episodes, 100.0 * ratio)};
}

Outcome shield_helps_early_reward(const fs::path& work) {
  const TrainingRuns& t = training_runs(work);
  if (!t.error.empty()) return {false, t.error};
  bool pass = t.shielded.size() == 5 && t.unshielded.size() == 5;
  std::string detail = "first 10% mean total reward shielded vs unshielded:";
  for (std::size_t k = 0; k < std::min(t.shielded.size(), t.unshielded.size()); ++k) {
    auto early_mean = [](const std::vector<cli::MetricsRow>& rows) {
      const std::size_t n = rows.size() / 10;
      double s = 0.0;
      for (std::size_t e = 0; e < n; ++e) s += rows[e].reward_one + rows[e].reward_two;
      return n ? s / static_cast<double>(n) : NAN;
    };
    const double a = early_mean(t.shielded[k]), b = early_mean(t.unshielded[k]);
    pass = pass && a > b;
    detail += format(" run%zu %.1f vs %.1f%s", k, a, b, a > b ? "" : " (not greater)");
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// Shield-level criteria.

PatrolConfig default_config() { return PatrolConfig{}; }

// Uniform over the arena and velocity box, conditioned on every enforced
// barrier (agent, obstacles, walls) being strictly positive.
JointAgents sample_safe_state(std::mt19937_64& rng, const PatrolConfig& cfg) {
  const double L = cfg.world.wall_half_extent;
  std::uniform_real_distribution<double> pos(-L, L), vel(-cfg.world.v_max, cfg.world.v_max);
  const ShieldParams enforced = cfg.shield.enforced();
  while (true) {
    JointAgents ag;
    for (auto& a : ag) {
      a.position = Vec2(pos(rng), pos(rng));
      a.velocity = Vec2(vel(rng), vel(rng));
    }
    bool ok = true;
    for (int i = 0; i < kNumAgents && ok; ++i) {
      const Neighborhood local =
          neighborhood(i, ag, cfg.world.obstacles, cfg.world, 1e9);  // every entity
      ok = !build_constraints(ag[i], local, enforced).needs_fallback;
    }
    if (ok) return ag;
  }
}

std::array<Neighbor, 1> other_of(int i, const JointAgents& ag) { return {{{1 - i, ag[1 - i]}}}; }

Outcome forward_invariance() {
  const PatrolConfig cfg = default_config();
  const auto& world = cfg.world;
  std::mt19937_64 rng(404);
  std::vector<JointAgents> starts;
  for (int s = 0; s < 1000; ++s) starts.push_back(sample_safe_state(rng, cfg));

  const auto t0 = std::chrono::steady_clock::now();
  double worst_margin = INFINITY;  // min over steps of (entity distance - its safe distance)
  long relaxed = 0, fallback = 0;
  for (int s = 0; s < 1000; ++s) {
    JointAgents ag = starts[s];
    for (int t = 0; t < 500; ++t) {
      JointActions u;
      for (int i = 0; i < kNumAgents; ++i) {
        // Adversarial nominal: full acceleration straight at the other agent
        // (even scenarios) or at an obstacle (odd scenarios).
        const Vec2 target = s % 2 == 0 ? ag[1 - i].position
                                       : world.obstacles[(s / 2 + i) % world.obstacles.size()].position;
        Vec2 dir = target - ag[i].position;
        if (dir.norm() > 0.0) dir.normalize();
        const Vec2 nominal = (world.a_max * dir / dir.cwiseAbs().maxCoeff()).cwiseMax(-world.a_max).cwiseMin(world.a_max);
        const auto others = other_of(i, ag);
        const ShieldResult r = filter_action(i, nominal, ag[i], others, world.obstacles, world, cfg.shield);
        u[i] = r.u_safe;
        relaxed += r.report.status == ShieldStatus::relaxed;
        fallback += r.report.status == ShieldStatus::fallback;
      }
      for (int i = 0; i < kNumAgents; ++i) {
        ag[i] = step_agent(ag[i], u[i], world.dt, world.v_max);
        confine_to_walls(ag[i], world);
      }
      worst_margin = std::min(worst_margin, (ag[0].position - ag[1].position).norm() - cfg.shield.d_s);
      for (const auto& a : ag) {
        for (const auto& o : world.obstacles) {
          worst_margin =
              std::min(worst_margin, (a.position - o.position).norm() - cfg.shield.d_s - o.radius);
        }
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = worst_margin >= -kDistanceTolerance && seconds < 60.0;
  return {pass, format("1000 scenarios x 500 steps: min (distance - safe distance) = %.5f "
                       "(need >= -0.001), %.1f s (need < 60 s), relaxed %ld, fallback %ld solves",
                       worst_margin, seconds, relaxed, fallback)};
}

Outcome qp_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> count(0, 6);
  double worst_gap = 0.0, worst_kkt = 0.0, worst_violation = 0.0;
  int relaxed = 0;
  for (int k = 0; k < 1000; ++k) {
    QpProblem p;
    p.nominal = Vec2(1.5 * u(rng), 1.5 * u(rng));
    const int m = count(rng);
    std::vector<oracle::HalfPlane> rows;
    for (int i = 0; i < m; ++i) {
      const double angle = M_PI * u(rng);
      const double scale = 0.05 + std::abs(u(rng));
      LinearConstraint c;
      c.normal = Vec2(scale * std::cos(angle), scale * std::sin(angle));
      c.bound = 0.6 * u(rng);
      p.constraints.push_back(c);
      rows.push_back({c.normal, c.bound});
    }
    const QpSolution s = solve(p);
    worst_kkt = std::max(worst_kkt, s.kkt_residual);
    double ours, best;
    if (s.status == QpStatus::optimal) {
      // Measured directly: the active rows hold only up to rounding.
      ours = 0.5 * (s.u_safe - p.nominal).squaredNorm();
      for (const auto& r : rows) worst_violation = std::max(worst_violation, r.normal.dot(s.u_safe) - r.bound);
      best = oracle::grid_minimize(
                 [&](const Vec2& v) { return oracle::exact_objective(v, p.nominal, rows, p.box); },
                 rows, p.box)
                 .value;
    } else {
      ++relaxed;
      ours = oracle::relaxed_objective(s.u_safe, p.nominal, rows, p.box, p.slack_weight);
      best = oracle::enumerate_relaxed(p.nominal, rows, p.box, p.slack_weight).value;
    }
    worst_gap = std::max(worst_gap, std::abs(ours - best));
  }
  return {worst_gap <= 1e-6 && worst_kkt <= 1e-9 && worst_violation <= 1e-9,
          format("1000 problems (%d relaxed): max |objective gap| %.2e (need <= 1e-6), max KKT "
                 "residual %.2e (need <= 1e-9), max row violation when feasible %.2e",
                 relaxed, worst_gap, worst_kkt, worst_violation)};
}

Outcome minimal_interference() {
  const PatrolConfig cfg = default_config();
  const auto& world = cfg.world;
  const ShieldParams enforced = cfg.shield.enforced();
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> act(-world.a_max, world.a_max);
  int checked = 0, drawn = 0, failures = 0;
  while (checked < 10000) {
    const JointAgents ag = sample_safe_state(rng, cfg);
    const int i = static_cast<int>(rng() % kNumAgents);
    const Vec2 nominal(act(rng), act(rng));
    ++drawn;
    const Neighborhood local = neighborhood(i, ag, world.obstacles, world, cfg.shield.r_sense);
    const ConstraintSet set = build_constraints(ag[i], local, enforced);
    bool feasible = true;
    for (const auto& c : set.constraints) feasible = feasible && c.normal.dot(nominal) <= c.bound;
    if (!feasible) continue;
    ++checked;
    const auto others = other_of(i, ag);
    const ShieldResult r = filter_action(i, nominal, ag[i], others, world.obstacles, world, cfg.shield);
    const bool exact = r.u_safe.x() == nominal.x() && r.u_safe.y() == nominal.y();
    if (!exact || r.report.status != ShieldStatus::passthrough) ++failures;
  }
  return {failures == 0, format("%d feasible nominals (of %d drawn): %d not passed through bit-exactly",
                                checked, drawn, failures)};
}

// ---------------------------------------------------------------------------

Outcome barrier_condition_along_trajectories() {
  const PatrolConfig cfg = default_config();
  const auto& world = cfg.world;
  const ShieldParams E = cfg.shield.enforced();
  TrainerConfig tc;  // the first 100 episodes of shielded training run 1
  tc.seed = 1;
  Trainer trainer(cfg, tc, true);
  const double eps = 1e-6;
  const double L = world.wall_half_extent;

  long checks = 0;
  std::map<std::string, long> violations;  // "<kind>/<status>"
  std::map<std::string, double> worst;      // per kind
  auto check = [&](const std::string& kind, ShieldStatus status, const Vec2& dp, const Vec2& dv,
                   const Vec2& da, double a, double d, double gamma) {
    const auto h = oracle::barrier(dp, dv, a, d);
    if (!h || *h <= 1e-3) return;
    const double h_dot = oracle::barrier_rate_fd(dp, dv, da, a, d, eps);
    // B = 1/h: B' - gamma / B = -h'/h^2 - gamma h.
    const double residual = -h_dot / (*h * *h) - gamma * *h;
    ++checks;
    worst[kind] = std::max(worst.count(kind) ? worst[kind] : -INFINITY, residual);
    if (residual > 1e-3) ++violations[kind + "/" + to_string(status)];
  };

  for (int e = 0; e < 100; ++e) {
    const EpisodeResult r = trainer.run_episode(e, {true, true, true});
    JointAgents s = r.initial;
    for (const auto& rec : r.trajectory) {
      if ((s[0].position - s[1].position).norm() <= E.r_sense) {
        const ShieldStatus st = std::max(rec.status[0], rec.status[1]);
        check("cooperative", st, s[0].position - s[1].position, s[0].velocity - s[1].velocity,
              rec.safe[0] - rec.safe[1], E.a_max_self + E.a_max_other, E.d_s, E.gamma_coo);
      }
      for (int i = 0; i < kNumAgents; ++i) {
        const AgentState& a = s[i];
        for (const auto& o : world.obstacles) {
          if ((a.position - o.position).norm() > E.r_sense) continue;
          check("obstacle", rec.status[i], a.position - o.position, a.velocity, rec.safe[i],
                E.a_max_self, E.d_s + o.radius, E.gamma_non);
        }
        // Walls: 1-D barriers along each face normal.
        for (int axis = 0; axis < 2; ++axis) {
          for (const double side : {1.0, -1.0}) {
            const double gap = L - side * a.position(axis);
            if (gap > E.r_sense) continue;
            Vec2 dp = Vec2::Zero(), dv = Vec2::Zero(), da = Vec2::Zero();
            dp(axis) = -side * gap;
            dv(axis) = a.velocity(axis);
            da(axis) = rec.safe[i](axis);
            check("wall", rec.status[i], dp, dv, da, E.a_max_self, E.d_s, E.gamma_non);
          }
        }
      }
      s = rec.agents;
    }
  }
  long total = 0;
  std::string detail = format("%ld checks on 100 shielded training episodes", checks);
  for (const auto& [kind, w] : worst) detail += format(", worst %s %.3g", kind.c_str(), w);
  for (const auto& [key, n] : violations) {
    total += n;
    detail += format(", %s: %ld", key.c_str(), n);
  }
  detail += format("; %ld residuals > 1e-3", total);
  return {total == 0, detail};
}

// Smallest |pre-activation| over the hidden (ReLU) layers; central
// differences are only meaningful away from the kinks.
double kink_distance(const Mlp& net, const Eigen::MatrixXd& x) {
  Mlp::Tape tape;
  net.forward(x, tape);
  double d = INFINITY;
  for (std::size_t l = 0; l + 1 < tape.pre.size(); ++l) d = std::min(d, tape.pre[l].cwiseAbs().minCoeff());
  return d;
}

Outcome gradient_checks() {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double eps = 1e-5, min_kink = 1e-3;
  double worst = 0.0;
  long compared = 0;
  int instances = 0, resampled = 0;
  while (instances < 20) {
    const int obs = 2 + static_cast<int>(rng() % 3), hidden = 3 + static_cast<int>(rng() % 4);
    const int S = 3 + static_cast<int>(rng() % 4), agent = static_cast<int>(rng() % kNumAgents);
    const int state_dim = obs * kNumAgents;
    Batch b;
    b.states = Eigen::MatrixXd(state_dim, S);
    b.next_states = Eigen::MatrixXd(state_dim, S);
    b.actions = Eigen::MatrixXd(2 * kNumAgents, S);
    b.rewards = Eigen::MatrixXd(kNumAgents, S);
    b.done = Eigen::VectorXd::Zero(S);
    for (int j = 0; j < S; ++j) {
      for (int i = 0; i < state_dim; ++i) b.states(i, j) = n(rng), b.next_states(i, j) = n(rng);
      for (int i = 0; i < 2 * kNumAgents; ++i) b.actions(i, j) = u(rng);
      for (int i = 0; i < kNumAgents; ++i) b.rewards(i, j) = u(rng);
    }
    Mlp actor = make_actor(obs, hidden, 1.0), critic = make_critic(state_dim, hidden);
    actor.initialize(rng);
    critic.initialize(rng);

    // Critic inputs are [states; actions], the actor reads its own slice of
    // the state, and the actor objective substitutes its action.
    const Eigen::MatrixXd own_obs = b.states.middleRows(agent * obs, obs);
    Eigen::MatrixXd replaced = b.actions;
    replaced.middleRows(2 * agent, 2) = actor.forward(own_obs);
    Eigen::MatrixXd with_batch(state_dim + 2 * kNumAgents, S), with_actor(state_dim + 2 * kNumAgents, S);
    with_batch << b.states, b.actions;
    with_actor << b.states, replaced;
    if (std::min({kink_distance(critic, with_batch), kink_distance(critic, with_actor),
                  kink_distance(actor, own_obs)}) < min_kink) {
      ++resampled;
      continue;
    }
    ++instances;
    const Eigen::VectorXd y = 2.0 * b.rewards.row(agent).transpose();

    auto compare = [&](Mlp& net, const Eigen::VectorXd& grad, const std::function<double()>& f) {
      for (Eigen::Index p = 0; p < net.parameter_count(); ++p) {
        const double keep = net.parameters()(p);
        net.parameters()(p) = keep + eps;
        const double up = f();
        net.parameters()(p) = keep - eps;
        const double down = f();
        net.parameters()(p) = keep;
        worst = std::max(worst, oracle::relative_error(grad(p), (up - down) / (2.0 * eps)));
        ++compared;
      }
    };
    compare(critic, critic_loss(critic, b, y).gradient, [&] { return critic_loss(critic, b, y).value; });
    compare(actor, actor_objective(actor, critic, b, agent).gradient,
            [&] { return actor_objective(actor, critic, b, agent).value; });
  }
  return {worst < 1e-4,
          format("20 instances, %ld parameters (critic loss + actor objective): max relative error "
                 "%.2e (need < 1e-4); %d draws resampled with a ReLU input within %.0e of its kink",
                 compared, worst, resampled, min_kink)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& work) {
  std::ostringstream log, err;
  for (const char* dir : {"det_a", "det_b"}) {
    for (const bool shield : {true, false}) {
      cli::TrainOptions o;
      o.runs = 2;
      o.episodes = 8;  // 1600 steps: past warm-up, so updates and soft updates run
      o.no_shield = !shield;
      o.out = work / dir;
      if (cli::cmd_train(o, log, err) != cli::kOk) return {false, "train failed: " + err.str()};
    }
  }
  int compared = 0, differing = 0;
  std::string which;
  for (const char* variant : {"shielded", "unshielded"}) {
    for (const char* run : {"run_00", "run_01"}) {
      for (const char* f : {"metrics.csv", "checkpoint.bin"}) {
        const fs::path rel = fs::path(variant) / run / f;
        const std::string a = slurp(work / "det_a" / rel), b = slurp(work / "det_b" / rel);
        ++compared;
        if (a.empty() || a != b) {
          ++differing;
          which += " " + rel.string();
        }
      }
    }
  }
  return {differing == 0, format("%d files compared across two identical invocations, %d differ%s",
                                 compared, differing, which.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--only 1,2,...]\n", argv[0]);
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "shielded training: zero collisions", [&] { return shielded_training_is_collision_free(work); }},
      {2, "unshielded training: collision ratio > 10%", [&] { return unshielded_training_collides(work); }},
      {3, "early reward: shielded > unshielded in every run", [&] { return shield_helps_early_reward(work); }},
      {4, "forward invariance under adversarial nominals", forward_invariance},
      {5, "QP matches brute-force oracle, KKT certified", qp_oracle},
      {6, "minimal interference: feasible nominal passes through", minimal_interference},
      {7, "barrier condition holds along shielded trajectories", barrier_condition_along_trajectories},
      {8, "analytic gradients match finite differences", gradient_checks},
      {9, "byte-identical metrics and checkpoints", [&] { return determinism(work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%s] %d %s -- %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
