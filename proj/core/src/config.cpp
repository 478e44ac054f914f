#include "safemarl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

using nlohmann::json;

// Best-effort line lookup: walks the key path through the raw text.
int line_of(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  std::size_t found = std::string_view::npos;
  for (const auto& key : path) {
    const std::string quoted = "\"" + key + "\"";
    const std::size_t at = text.find(quoted, pos);
    if (at == std::string_view::npos) break;
    found = at;
    pos = at + quoted.size();
  }
  if (found == std::string_view::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(found), '\n'));
}

class Reader {
 public:
  Reader(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    const int line = line_of(text_, path);
    if (line > 0) os << ":" << line;
    os << ": ";
    for (std::size_t i = 0; i < path.size(); ++i) os << (i ? "." : "") << path[i];
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  void only_keys(const json& obj, const std::vector<std::string>& path,
                 const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (!allowed.count(key)) {
        auto p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  template <typename T>
  void field(const json& obj, const std::vector<std::string>& path, const std::string& key,
             T& out) const {
    if (!obj.contains(key)) return;
    auto p = path;
    p.push_back(key);
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(p, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(p, "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(p, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned()) fail(p, "expected a non-negative integer");
      }
      out = v.get<T>();
    } else {
      if (!v.is_number()) fail(p, "expected a number");
      out = v.get<T>();
    }
  }

  Vec2 vec2(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(path, "expected a [x, y] pair of numbers");
    }
    return Vec2(v[0].get<double>(), v[1].get<double>());
  }

  std::string_view text() const { return text_; }
  std::string_view source() const { return source_; }

 private:
  std::string_view text_;
  std::string_view source_;
};

void read_world(const Reader& r, const json& j, WorldConfig& w) {
  const std::vector<std::string> path = {"world"};
  r.only_keys(j, path, {"wall_half_extent", "dt", "v_max", "a_max", "obstacles", "checkin_points"});
  r.field(j, path, "wall_half_extent", w.wall_half_extent);
  r.field(j, path, "dt", w.dt);
  r.field(j, path, "v_max", w.v_max);
  r.field(j, path, "a_max", w.a_max);
  if (j.contains("obstacles")) {
    const auto p = std::vector<std::string>{"world", "obstacles"};
    if (!j["obstacles"].is_array()) r.fail(p, "expected an array");
    w.obstacles.clear();
    for (const auto& o : j["obstacles"]) {
      r.only_keys(o, p, {"position", "radius"});
      ObstacleSpec spec;
      if (!o.contains("position")) r.fail(p, "obstacle needs a position");
      spec.position = r.vec2(o["position"], {"world", "obstacles", "position"});
      r.field(o, p, "radius", spec.radius);
      w.obstacles.push_back(spec);
    }
  }
  if (j.contains("checkin_points")) {
    const auto p = std::vector<std::string>{"world", "checkin_points"};
    if (!j["checkin_points"].is_array()) r.fail(p, "expected an array");
    w.checkin_points.clear();
    for (const auto& c : j["checkin_points"]) w.checkin_points.push_back(r.vec2(c, p));
  }
}

void read_shield(const Reader& r, const json& j, ShieldParams& s) {
  const std::vector<std::string> path = {"shield"};
  r.only_keys(j, path, {"d_s", "a_max_self", "a_max_other", "gamma_coo", "gamma_non", "r_sense",
                        "slack_weight", "margin"});
  r.field(j, path, "d_s", s.d_s);
  r.field(j, path, "a_max_self", s.a_max_self);
  r.field(j, path, "a_max_other", s.a_max_other);
  r.field(j, path, "gamma_coo", s.gamma_coo);
  r.field(j, path, "gamma_non", s.gamma_non);
  r.field(j, path, "r_sense", s.r_sense);
  r.field(j, path, "slack_weight", s.slack_weight);
  r.field(j, path, "margin", s.margin);
}

void read_env(const Reader& r, const json& j, PatrolConfig& e) {
  const std::vector<std::string> path = {"env"};
  r.only_keys(j, path, {"episode_length", "checkin_radius", "reset_margin", "max_reset_attempts"});
  r.field(j, path, "episode_length", e.episode_length);
  r.field(j, path, "checkin_radius", e.checkin_radius);
  r.field(j, path, "reset_margin", e.reset_margin);
  r.field(j, path, "max_reset_attempts", e.max_reset_attempts);
}

void read_trainer(const Reader& r, const json& j, TrainerConfig& t) {
  const std::vector<std::string> path = {"trainer"};
  r.only_keys(j, path, {"episodes", "batch_size", "gamma", "tau", "lr_actor", "lr_critic",
                        "noise_sigma", "noise_decay", "update_every", "warmup",
                        "buffer_capacity", "hidden", "reward_scale"});
  r.field(j, path, "episodes", t.episodes);
  r.field(j, path, "batch_size", t.batch_size);
  r.field(j, path, "gamma", t.gamma);
  r.field(j, path, "tau", t.tau);
  r.field(j, path, "lr_actor", t.lr_actor);
  r.field(j, path, "lr_critic", t.lr_critic);
  r.field(j, path, "noise_sigma", t.noise_sigma);
  r.field(j, path, "noise_decay", t.noise_decay);
  r.field(j, path, "update_every", t.update_every);
  r.field(j, path, "warmup", t.warmup);
  r.field(j, path, "buffer_capacity", t.buffer_capacity);
  r.field(j, path, "hidden", t.hidden);
  r.field(j, path, "reward_scale", t.reward_scale);
}

// Validation messages look like "<section>: <key> ..."; recover the key so
// the error can point at a line.
std::vector<std::string> path_from_message(const std::string& msg) {
  const auto colon = msg.find(':');
  if (colon == std::string::npos) return {};
  std::vector<std::string> path = {msg.substr(0, colon)};
  const auto start = msg.find_first_not_of(' ', colon + 1);
  const auto end = msg.find_first_of(" ,", start);
  if (start != std::string::npos) path.push_back(msg.substr(start, end - start));
  return path;
}

}  // namespace

void RunConfig::validate() const {
  env.validate();
  trainer.validate();
  if (runs < 0) throw ConfigError("runs: must be >= 0");
  if (seeds.size() != static_cast<std::size_t>(runs)) {
    throw ConfigError("seeds: length " + std::to_string(seeds.size()) +
                      " does not match runs = " + std::to_string(runs));
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

RunConfig parse_run_config(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  const Reader r(text, source);
  r.only_keys(root, {}, {"world", "shield", "env", "trainer", "runs", "seeds", "output_dir",
                         "shield_enabled"});
  RunConfig cfg;
  if (root.contains("world")) read_world(r, root["world"], cfg.env.world);
  if (root.contains("shield")) read_shield(r, root["shield"], cfg.env.shield);
  if (root.contains("env")) read_env(r, root["env"], cfg.env);
  if (root.contains("trainer")) read_trainer(r, root["trainer"], cfg.trainer);
  r.field(root, {}, "runs", cfg.runs);
  r.field(root, {}, "output_dir", cfg.output_dir);
  r.field(root, {}, "shield_enabled", cfg.shield_enabled);
  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    if (!s.is_array()) r.fail({"seeds"}, "expected an array");
    cfg.seeds.clear();
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) r.fail({"seeds"}, "seeds must be non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  } else if (root.contains("runs")) {
    cfg.seeds.clear();
    for (int k = 0; k < cfg.runs; ++k) cfg.seeds.push_back(static_cast<std::uint64_t>(k + 1));
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    r.fail(path_from_message(e.what()), e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  return parse_run_config(text, path.string());
}

std::string to_json_text(const RunConfig& c) {
  json j;
  const auto& w = c.env.world;
  json obstacles = json::array();
  for (const auto& o : w.obstacles) {
    obstacles.push_back({{"position", {o.position.x(), o.position.y()}}, {"radius", o.radius}});
  }
  json checkins = json::array();
  for (const auto& p : w.checkin_points) checkins.push_back({p.x(), p.y()});
  j["world"] = {{"wall_half_extent", w.wall_half_extent}, {"dt", w.dt}, {"v_max", w.v_max},
                {"a_max", w.a_max}, {"obstacles", obstacles}, {"checkin_points", checkins}};
  const auto& s = c.env.shield;
  j["shield"] = {{"d_s", s.d_s}, {"a_max_self", s.a_max_self}, {"a_max_other", s.a_max_other},
                 {"gamma_coo", s.gamma_coo}, {"gamma_non", s.gamma_non}, {"r_sense", s.r_sense},
                 {"slack_weight", s.slack_weight}, {"margin", s.margin}};
  j["env"] = {{"episode_length", c.env.episode_length},
              {"checkin_radius", c.env.checkin_radius},
              {"reset_margin", c.env.reset_margin},
              {"max_reset_attempts", c.env.max_reset_attempts}};
  const auto& t = c.trainer;
  j["trainer"] = {{"episodes", t.episodes},       {"batch_size", t.batch_size},
                  {"gamma", t.gamma},             {"tau", t.tau},
                  {"lr_actor", t.lr_actor},       {"lr_critic", t.lr_critic},
                  {"noise_sigma", t.noise_sigma}, {"noise_decay", t.noise_decay},
                  {"update_every", t.update_every}, {"warmup", t.warmup},
                  {"buffer_capacity", t.buffer_capacity}, {"hidden", t.hidden},
                  {"reward_scale", t.reward_scale}};
  j["runs"] = c.runs;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["shield_enabled"] = c.shield_enabled;
  return j.dump(2);
}

}  // namespace safemarl
