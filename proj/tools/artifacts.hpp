#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "safemarl/maddpg.hpp"
#include "safemarl/patrol_env.hpp"

namespace safemarl::cli {

inline constexpr const char* kMetricsSchema = "# safemarl-metrics v1";
inline constexpr const char* kTrajectorySchema = "# safemarl-trajectory v1";
inline constexpr const char* kShieldSchema = "# safemarl-shield v1";

/// Shortest text that reads back to the same double.
std::string fmt(double v);

/// Opens for writing, creating parent directories; ArtifactError on failure.
std::ofstream open_output(const std::filesystem::path& path);

/// Header comment block shared by every CSV: schema line, seed, resolved
/// config on one line.
void write_csv_header(std::ostream& out, const char* schema, std::uint64_t seed,
                      const std::string& config_json);

void write_metrics_columns(std::ostream& out);
void write_metrics_row(std::ostream& out, int episode, const EpisodeMetrics& m);

void write_shield_columns(std::ostream& out);
void write_shield_rows(std::ostream& out, int episode, const EpisodeResult& r);

void write_trajectory_columns(std::ostream& out);
void write_trajectory_rows(std::ostream& out, const EpisodeResult& r, const PatrolConfig& config);

struct MetricsRow {
  int episode = 0;
  double reward_one = 0.0;
  double reward_two = 0.0;
  int collision_steps = 0;
  int collision_episode = 0;
  double min_dist = 0.0;
  int slack_events = 0;
};

/// Reads a metrics CSV, refusing any schema line other than kMetricsSchema.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

/// Arena with obstacles, check-in points and both agents' paths over the
/// step window [first, last). `zoom` crops to the window's bounding box.
std::string trajectory_svg(const EpisodeResult& r, const PatrolConfig& config, int first, int last,
                           bool zoom);

struct Series {
  std::string label;
  std::string color;
  std::vector<double> values;
};

/// Line chart of one or more series against their index.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::vector<Series>& series);

}  // namespace safemarl::cli
