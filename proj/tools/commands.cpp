#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "artifacts.hpp"
#include "safemarl/checkpoint.hpp"
#include "safemarl/config.hpp"
#include "safemarl/errors.hpp"
#include "safemarl/maddpg.hpp"

namespace safemarl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const ArtifactError& e) {
    err << "artifact error: " << e.what() << "\n";
    return kArtifactError;
  }
}

RunConfig load_or_default(const std::optional<fs::path>& path) {
  return path ? load_run_config(*path) : parse_run_config("{}", "<defaults>");
}

// Resolved config without the output directory, so artifacts do not depend
// on where they were written.
json portable(const RunConfig& c) {
  json j = json::parse(to_json_text(c));
  j.erase("output_dir");
  return j;
}

std::string compact(const RunConfig& c) { return portable(c).dump(); }

std::string run_name(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "run_%02d", k);
  return buf;
}

// Collision ratio as a percentage with three decimals, e.g. "50.536".
std::string percent(long collided, long episodes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", episodes > 0 ? 100.0 * collided / episodes : 0.0);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
  if (!out) throw ArtifactError("write failed for " + path.string());
}

Checkpoint checkpoint_of(const Trainer& tr) {
  Checkpoint c;
  for (int i = 0; i < kNumAgents; ++i) {
    c.actors[i] = tr.learners()[i].actor;
    c.critics[i] = tr.learners()[i].critic;
  }
  return c;
}

}  // namespace

fs::path resolve_output_dir(const std::optional<fs::path>& flag, const std::string& config_value) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CBF_SHIELD_OUT"); env && *env) return env;
  return config_value;
}

int cmd_train(const TrainOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_or_default(options.config);
    if (options.episodes) cfg.trainer.episodes = *options.episodes;
    if (options.no_shield) cfg.shield_enabled = false;
    if (options.runs || options.seed) {
      const int runs = options.runs.value_or(cfg.runs);
      const std::uint64_t base =
          options.seed ? *options.seed : (cfg.seeds.empty() ? 1 : cfg.seeds.front());
      cfg.runs = runs;
      cfg.seeds.clear();
      for (int k = 0; k < runs; ++k) cfg.seeds.push_back(base + static_cast<std::uint64_t>(k));
    }
    cfg.output_dir = resolve_output_dir(options.out, cfg.output_dir).string();
    cfg.validate();

    const std::string variant = cfg.shield_enabled ? "shielded" : "unshielded";
    const fs::path root = fs::path(cfg.output_dir) / variant;

    long total_episodes = 0, collided = 0, collision_steps = 0, slack_events = 0;
    json per_run = json::array();
    for (int k = 0; k < cfg.runs; ++k) {
      const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(k)];
      const fs::path dir = root / run_name(k);
      TrainerConfig tc = cfg.trainer;
      tc.seed = seed;
      Trainer trainer(cfg.env, tc, cfg.shield_enabled);

      RunConfig run_cfg = cfg;
      run_cfg.runs = 1;
      run_cfg.seeds = {seed};
      write_text(dir / "config.json", portable(run_cfg).dump(2) + "\n");
      const std::string config_line = compact(run_cfg);

      std::ofstream metrics = open_output(dir / "metrics.csv");
      write_csv_header(metrics, kMetricsSchema, seed, config_line);
      write_metrics_columns(metrics);
      std::ofstream shield;
      if (cfg.shield_enabled) {
        shield = open_output(dir / "shield.csv");
        write_csv_header(shield, kShieldSchema, seed, config_line);
        write_shield_columns(shield);
      }

      long run_collided = 0, run_steps = 0;
      for (int e = 0; e < tc.episodes; ++e) {
        const EpisodeResult r = trainer.run_episode(e, {true, true, cfg.shield_enabled});
        write_metrics_row(metrics, e, r.metrics);
        if (cfg.shield_enabled) write_shield_rows(shield, e, r);
        run_collided += r.metrics.collided() ? 1 : 0;
        run_steps += r.metrics.collision_count;
        slack_events += r.metrics.slack_events;
      }
      metrics.close();
      if (!metrics) throw ArtifactError("write failed for " + (dir / "metrics.csv").string());
      write_checkpoint(dir / "checkpoint.bin", checkpoint_of(trainer));

      total_episodes += tc.episodes;
      collided += run_collided;
      collision_steps += run_steps;
      per_run.push_back({{"run", k},
                         {"seed", seed},
                         {"episodes", tc.episodes},
                         {"collision_episodes", run_collided},
                         {"collision_steps", run_steps}});
      log << variant << " " << run_name(k) << " seed " << seed << ": " << run_collided << "/"
          << tc.episodes << " collision episodes\n";
    }

    json summary = {{"schema", "safemarl-summary v1"},
                    {"variant", variant},
                    {"runs", cfg.runs},
                    {"episodes", total_episodes},
                    {"collision_episodes", collided},
                    {"collision_steps", collision_steps},
                    {"collision_ratio_percent", percent(collided, total_episodes)},
                    {"slack_events", slack_events},
                    {"per_run", per_run}};
    write_text(root / "summary.json", summary.dump(2) + "\n");
    log << variant << ": " << collided << "/" << total_episodes << " collision episodes ("
        << percent(collided, total_episodes) << "%)\n";
    return kOk;
  });
}

namespace {

// Two windows around the closest approaches, at least a window apart.
std::pair<int, int> zoom_centres(const EpisodeResult& r, const PatrolConfig& config, int window) {
  const int n = static_cast<int>(r.trajectory.size());
  std::vector<std::pair<double, int>> order;
  for (int t = 0; t < n; ++t) order.push_back({min_entity_distance(r.trajectory[t].agents, config), t});
  std::sort(order.begin(), order.end());
  const int a = order.empty() ? 0 : order.front().second;
  int b = n - 1 - a;
  for (const auto& [d, t] : order) {
    if (std::abs(t - a) >= window) {
      b = t;
      break;
    }
  }
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace

int cmd_eval(const EvalOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (options.episodes < 0) throw ConfigError("episodes: must be >= 0");
    std::optional<fs::path> config_path = options.config;
    if (!config_path && fs::exists(options.checkpoint.parent_path() / "config.json")) {
      config_path = options.checkpoint.parent_path() / "config.json";
    }
    RunConfig cfg = load_or_default(config_path);
    const Checkpoint ckpt = read_checkpoint(options.checkpoint);
    check_architecture(ckpt, observation_size(cfg.env.world), cfg.trainer.hidden);

    TrainerConfig tc = cfg.trainer;
    tc.seed = options.seed;
    Trainer trainer(cfg.env, tc, true);
    for (int i = 0; i < kNumAgents; ++i) {
      trainer.learners()[i].actor = ckpt.actors[i];
      trainer.learners()[i].critic = ckpt.critics[i];
    }

    const fs::path dir = resolve_output_dir(options.out, cfg.output_dir) / "eval";
    std::ofstream csv = open_output(dir / "trajectory.csv");
    write_csv_header(csv, kTrajectorySchema, options.seed, compact(cfg));
    write_trajectory_columns(csv);

    json episodes = json::array();
    for (int e = 0; e < options.episodes; ++e) {
      const EpisodeResult r = trainer.run_episode(e, {false, false, true});
      char tag[16];
      std::snprintf(tag, sizeof tag, "%03d", e);
      csv << "# episode " << e << "\n";
      write_trajectory_rows(csv, r, cfg.env);

      const int n = static_cast<int>(r.trajectory.size());
      const int window = std::max(10, n / 10);
      write_text(dir / ("trajectory_" + std::string(tag) + ".svg"), trajectory_svg(r, cfg.env, 0, n, false));
      const auto [a, b] = zoom_centres(r, cfg.env, window);
      write_text(dir / ("zoom_" + std::string(tag) + "_a.svg"),
                 trajectory_svg(r, cfg.env, a - window / 2, a + window / 2, true));
      write_text(dir / ("zoom_" + std::string(tag) + "_b.svg"),
                 trajectory_svg(r, cfg.env, b - window / 2, b + window / 2, true));

      std::array<Series, kNumAgents> cumulative{Series{"patrolman I", "#1f77b4", {}},
                                                Series{"patrolman II", "#d62728", {}}};
      std::array<double, kNumAgents> sum{};
      for (const auto& rec : r.trajectory) {
        for (int i = 0; i < kNumAgents; ++i) {
          sum[i] += rec.rewards[i];
          cumulative[i].values.push_back(sum[i]);
        }
      }
      write_text(dir / ("rewards_" + std::string(tag) + ".svg"),
                 line_chart_svg("Cumulative reward, episode " + std::to_string(e), "step",
                                {cumulative.begin(), cumulative.end()}));
      episodes.push_back({{"episode", e},
                          {"steps", r.metrics.steps},
                          {"checkins_reached", r.metrics.checkins_reached},
                          {"collision_steps", r.metrics.collision_count},
                          {"min_dist", r.metrics.min_pairwise_distance},
                          {"reward_I", r.metrics.total_reward[kPatrolmanI]},
                          {"reward_II", r.metrics.total_reward[kPatrolmanII]}});
      log << "episode " << e << ": " << r.metrics.checkins_reached << " check-ins, "
          << r.metrics.collision_count << " collision steps\n";
    }
    csv.close();
    if (!csv) throw ArtifactError("write failed for " + (dir / "trajectory.csv").string());
    write_text(dir / "eval_summary.json",
               json{{"schema", "safemarl-eval v1"}, {"seed", options.seed}, {"episodes", episodes}}
                       .dump(2) +
                   "\n");
    return kOk;
  });
}

int cmd_report(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    struct Variant {
      std::string name;
      long episodes = 0;
      long collided = 0;
      std::vector<double> mean_reward;
    };
    std::vector<Variant> variants;
    std::vector<std::string> missing;
    for (const std::string name : {"unshielded", "shielded"}) {
      const fs::path vdir = run_dir / name;
      if (!fs::is_directory(vdir)) continue;
      std::set<fs::path> runs;
      for (const auto& entry : fs::directory_iterator(vdir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0) {
          runs.insert(entry.path());
        }
      }
      if (runs.empty()) missing.push_back((vdir / "run_XX").string());
      Variant v{name, 0, 0, {}};
      std::vector<double> count;
      for (const auto& r : runs) {
        const fs::path metrics = r / "metrics.csv";
        if (!fs::exists(metrics)) {
          missing.push_back(metrics.string());
          continue;
        }
        const auto rows = read_metrics(metrics);
        for (const auto& row : rows) {
          const auto e = static_cast<std::size_t>(row.episode);
          if (v.mean_reward.size() <= e) {
            v.mean_reward.resize(e + 1, 0.0);
            count.resize(e + 1, 0.0);
          }
          v.mean_reward[e] += row.reward_one + row.reward_two;
          count[e] += 1.0;
          ++v.episodes;
          v.collided += row.collision_episode;
        }
      }
      for (std::size_t e = 0; e < v.mean_reward.size(); ++e) {
        if (count[e] > 0) v.mean_reward[e] /= count[e];
      }
      variants.push_back(std::move(v));
    }
    if (variants.empty()) {
      missing.push_back((run_dir / "shielded").string());
      missing.push_back((run_dir / "unshielded").string());
    }
    if (!missing.empty()) {
      std::string msg = "missing artifacts:";
      for (const auto& m : missing) msg += "\n  " + m;
      throw ArtifactError(msg);
    }

    std::string table = "| | ";
    std::string rule = "|---|";
    for (const auto& v : variants) {
      table += (v.name == "shielded" ? "MADDPG-CBF (shielded)" : "MADDPG (unshielded)") + std::string(" | ");
      rule += "---|";
    }
    table.pop_back();
    table += "\n" + rule + "\n| Collision episodes |";
    for (const auto& v : variants) table += " " + std::to_string(v.collided) + " |";
    table += "\n| Episodes |";
    for (const auto& v : variants) table += " " + std::to_string(v.episodes) + " |";
    table += "\n| Collision ratio |";
    for (const auto& v : variants) table += " " + percent(v.collided, v.episodes) + "% |";
    table += "\n";

    std::vector<Series> series;
    for (const auto& v : variants) {
      series.push_back({v.name, v.name == "shielded" ? "#2ca02c" : "#d62728", v.mean_reward});
    }
    write_text(run_dir / "report.md", table);
    write_text(run_dir / "rewards.svg",
               line_chart_svg("Average total reward per episode", "episode", series));
    out << table;
    return kOk;
  });
}

}  // namespace safemarl::cli
