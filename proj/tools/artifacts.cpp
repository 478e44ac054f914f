#include "artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "safemarl/errors.hpp"

namespace safemarl::cli {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot open " + path.string() + " for writing");
  return out;
}

void write_csv_header(std::ostream& out, const char* schema, std::uint64_t seed,
                      const std::string& config_json) {
  out << schema << "\n# seed: " << seed << "\n# config: " << config_json << "\n";
}

void write_metrics_columns(std::ostream& out) {
  out << "episode,reward_I,reward_II,collisions_step,collisions_episode,min_dist,slack_events\n";
}

void write_metrics_row(std::ostream& out, int episode, const EpisodeMetrics& m) {
  out << episode << ',' << fmt(m.total_reward[kPatrolmanI]) << ','
      << fmt(m.total_reward[kPatrolmanII]) << ',' << m.collision_count << ','
      << (m.collided() ? 1 : 0) << ',' << fmt(m.min_pairwise_distance) << ',' << m.slack_events
      << '\n';
}

void write_shield_columns(std::ostream& out) {
  out << "episode,step,agent_id,status,ax_nominal,ay_nominal,ax_safe,ay_safe,n_cooperative,"
         "n_noncooperative,n_wall,min_h,slack\n";
}

void write_shield_rows(std::ostream& out, int episode, const EpisodeResult& r) {
  for (std::size_t k = 0; k < r.reports.size(); ++k) {
    const ShieldReport& s = r.reports[k];
    out << episode << ',' << k / kNumAgents + 1 << ',' << s.agent_id << ',' << to_string(s.status)
        << ',' << fmt(s.u_nominal.x()) << ',' << fmt(s.u_nominal.y()) << ','
        << fmt(s.u_safe.x()) << ',' << fmt(s.u_safe.y()) << ',' << s.constraints_built[0] << ','
        << s.constraints_built[1] << ',' << s.constraints_built[2] << ',' << fmt(s.min_h) << ','
        << fmt(s.slack) << '\n';
  }
}

void write_trajectory_columns(std::ostream& out) {
  out << "step,agent_id,px,py,vx,vy,ax_nominal,ay_nominal,ax_safe,ay_safe,reward,min_dist,"
         "shield_status\n";
}

namespace {

double agent_min_distance(const JointAgents& agents, int i, const PatrolConfig& config) {
  double best = pairwise_distance(agents[0], agents[1]);
  for (const auto& o : config.world.obstacles) best = std::min(best, pairwise_distance(agents[i], o));
  return best;
}

}  // namespace

void write_trajectory_rows(std::ostream& out, const EpisodeResult& r, const PatrolConfig& config) {
  for (const auto& rec : r.trajectory) {
    for (int i = 0; i < kNumAgents; ++i) {
      const AgentState& a = rec.agents[i];
      out << rec.step << ',' << i << ',' << fmt(a.position.x()) << ',' << fmt(a.position.y())
          << ',' << fmt(a.velocity.x()) << ',' << fmt(a.velocity.y()) << ','
          << fmt(rec.nominal[i].x()) << ',' << fmt(rec.nominal[i].y()) << ','
          << fmt(rec.safe[i].x()) << ',' << fmt(rec.safe[i].y()) << ',' << fmt(rec.rewards[i])
          << ',' << fmt(agent_min_distance(rec.agents, i, config)) << ','
          << to_string(rec.status[i]) << '\n';
    }
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

template <typename T>
T parse_number(const std::string& s, const fs::path& path, int line) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // from_chars does not accept "inf"/"nan" spellings for all types; fall back.
    if constexpr (std::is_floating_point_v<T>) {
      if (s == "inf") return std::numeric_limits<T>::infinity();
      if (s == "-inf") return -std::numeric_limits<T>::infinity();
      if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
    }
    throw ArtifactError(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsSchema) {
    throw ArtifactError(path.string() + ": schema mismatch: expected '" + kMetricsSchema +
                        "', found '" + line + "'");
  }
  std::vector<MetricsRow> rows;
  int n = 1;
  bool seen_columns = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    if (!seen_columns) {
      seen_columns = true;
      continue;
    }
    const auto c = split(line);
    if (c.size() != 7) {
      throw ArtifactError(path.string() + ":" + std::to_string(n) + ": expected 7 columns");
    }
    MetricsRow r;
    r.episode = parse_number<int>(c[0], path, n);
    r.reward_one = parse_number<double>(c[1], path, n);
    r.reward_two = parse_number<double>(c[2], path, n);
    r.collision_steps = parse_number<int>(c[3], path, n);
    r.collision_episode = parse_number<int>(c[4], path, n);
    r.min_dist = parse_number<double>(c[5], path, n);
    r.slack_events = parse_number<int>(c[6], path, n);
    rows.push_back(r);
  }
  if (!seen_columns) throw ArtifactError(path.string() + ": missing column header");
  return rows;
}

namespace {

// Fixed-precision coordinates keep the SVG text byte-deterministic.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Frame {
  double x0, y0, x1, y1;  // world window
  double size = 600.0;    // pixels, square
  double sx(double x) const { return (x - x0) / (x1 - x0) * size; }
  double sy(double y) const { return (y1 - y) / (y1 - y0) * size; }
  double sl(double len) const { return len / (x1 - x0) * size; }
};

const char* kAgentColors[kNumAgents] = {"#1f77b4", "#d62728"};

}  // namespace

std::string trajectory_svg(const EpisodeResult& r, const PatrolConfig& config, int first, int last,
                           bool zoom) {
  const double L = config.world.wall_half_extent;
  first = std::clamp(first, 0, static_cast<int>(r.trajectory.size()));
  last = std::clamp(last, first, static_cast<int>(r.trajectory.size()));
  Frame f{-L, -L, L, L};
  if (zoom && last > first) {
    double x0 = L, y0 = L, x1 = -L, y1 = -L;
    for (int t = first; t < last; ++t) {
      for (const auto& a : r.trajectory[t].agents) {
        x0 = std::min(x0, a.position.x());
        x1 = std::max(x1, a.position.x());
        y0 = std::min(y0, a.position.y());
        y1 = std::max(y1, a.position.y());
      }
    }
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    const double half = 0.5 * std::max({x1 - x0, y1 - y0, 0.1}) + 2 * config.shield.d_s;
    f = Frame{cx - half, cy - half, cx + half, cy + half};
  }
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"600\" height=\"600\" fill=\"white\"/>\n";
  s << "<rect x=\"" << num(f.sx(-L)) << "\" y=\"" << num(f.sy(L)) << "\" width=\"" << num(f.sl(2 * L))
    << "\" height=\"" << num(f.sl(2 * L)) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  for (const auto& o : config.world.obstacles) {
    s << "<circle cx=\"" << num(f.sx(o.position.x())) << "\" cy=\"" << num(f.sy(o.position.y()))
      << "\" r=\"" << num(f.sl(o.radius + config.shield.d_s))
      << "\" fill=\"#dddddd\" stroke=\"#555555\"/>\n";
    s << "<circle cx=\"" << num(f.sx(o.position.x())) << "\" cy=\"" << num(f.sy(o.position.y()))
      << "\" r=\"3\" fill=\"black\"/>\n";
  }
  const double c = f.sl(config.checkin_radius);
  for (std::size_t k = 0; k < config.world.checkin_points.size(); ++k) {
    const Vec2& p = config.world.checkin_points[k];
    s << "<rect x=\"" << num(f.sx(p.x()) - c) << "\" y=\"" << num(f.sy(p.y()) - c) << "\" width=\""
      << num(2 * c) << "\" height=\"" << num(2 * c) << "\" fill=\"black\"/>\n";
    s << "<text x=\"" << num(f.sx(p.x()) + c + 2) << "\" y=\"" << num(f.sy(p.y()) - c - 2)
      << "\" font-size=\"12\">" << k + 1 << "</text>\n";
  }
  for (int i = 0; i < kNumAgents; ++i) {
    s << "<polyline fill=\"none\" stroke=\"" << kAgentColors[i] << "\" stroke-width=\"1.5\" points=\"";
    if (first == 0) {
      s << num(f.sx(r.initial[i].position.x())) << ',' << num(f.sy(r.initial[i].position.y())) << ' ';
    }
    for (int t = first; t < last; ++t) {
      const Vec2& p = r.trajectory[t].agents[i].position;
      s << num(f.sx(p.x())) << ',' << num(f.sy(p.y())) << ' ';
    }
    s << "\"/>\n";
    if (last > first) {
      const Vec2& p = r.trajectory[last - 1].agents[i].position;
      s << "<circle cx=\"" << num(f.sx(p.x())) << "\" cy=\"" << num(f.sy(p.y())) << "\" r=\""
        << num(f.sl(0.5 * config.shield.d_s)) << "\" fill=\"" << kAgentColors[i] << "\"/>\n";
    }
  }
  for (int t = first; t < last; ++t) {
    if (!in_collision(r.trajectory[t].agents, config)) continue;
    for (const auto& a : r.trajectory[t].agents) {
      s << "<circle cx=\"" << num(f.sx(a.position.x())) << "\" cy=\"" << num(f.sy(a.position.y()))
        << "\" r=\"4\" fill=\"none\" stroke=\"orange\" stroke-width=\"2\"/>\n";
    }
  }
  s << "<text x=\"8\" y=\"16\" font-size=\"12\">steps " << first + 1 << "-" << last << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::vector<Series>& series) {
  const double W = 640, H = 400, left = 70, right = 20, top = 30, bottom = 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& sr : series) {
    n = std::max(n, sr.values.size());
    for (double v : sr.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 1.0, hi += 1.0;
  const double span_x = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto px = [&](std::size_t i) { return left + static_cast<double>(i) / span_x * (W - left - right); };
  auto py = [&](double v) { return top + (hi - v) / (hi - lo) * (H - top - bottom); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(W / 2) << "\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">" << title
    << "</text>\n";
  s << "<line x1=\"" << num(left) << "\" y1=\"" << num(H - bottom) << "\" x2=\"" << num(W - right)
    << "\" y2=\"" << num(H - bottom) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
    << num(H - bottom) << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << num(left - 4) << "\" y=\"" << num(top + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
    << num(hi) << "</text>\n";
  s << "<text x=\"" << num(left - 4) << "\" y=\"" << num(H - bottom) << "\" font-size=\"11\" text-anchor=\"end\">"
    << num(lo) << "</text>\n";
  s << "<text x=\"" << num(W / 2) << "\" y=\"" << num(H - 12) << "\" font-size=\"12\" text-anchor=\"middle\">"
    << x_label << " (0-" << (n > 0 ? n - 1 : 0) << ")</text>\n";
  double legend_y = top + 14;
  for (const auto& sr : series) {
    s << "<polyline fill=\"none\" stroke=\"" << sr.color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < sr.values.size(); ++i) {
      if (std::isfinite(sr.values[i])) s << num(px(i)) << ',' << num(py(sr.values[i])) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << num(W - right - 4) << "\" y=\"" << num(legend_y)
      << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << sr.color << "\">" << sr.label
      << "</text>\n";
    legend_y += 16;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace safemarl::cli
