#include "octopath/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "octopath/error.hpp"

namespace octopath {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "planner.max_expansions is parsed as uint64");

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw Error(ErrorCode::ConfigError, key + ": invalid value \"" + value + "\" (" + why + ")");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& v);

template <>
double parse_value<double>(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "expected a number");
  return out;
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "expected an integer");
  return out;
}

template <>
int parse_value<int>(const std::string& key, const std::string& v) { return parse_integer<int>(key, v); }
template <>
std::uint32_t parse_value<std::uint32_t>(const std::string& key, const std::string& v) {
  return parse_integer<std::uint32_t>(key, v);
}
template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& v) {
  return parse_integer<std::uint64_t>(key, v);
}
template <>
bool parse_value<bool>(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "expected true or false");
}
template <>
std::string parse_value<std::string>(const std::string&, const std::string& v) { return v; }
template <>
RouteKind parse_value<RouteKind>(const std::string& key, const std::string& v) {
  try {
    return parse_route_kind(v);
  } catch (const Error&) {
    bad_value(key, v, "expected line, s_curve, circle or waypoints");
  }
}
template <>
Method parse_value<Method>(const std::string& key, const std::string& v) {
  try {
    return parse_method(v);
  } catch (const Error&) {
    bad_value(key, v, "expected octopath, regression, hybrid_astar or oracle");
  }
}

std::string show(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
std::string show(int v) { return std::to_string(v); }
std::string show(std::uint32_t v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(RouteKind v) { return std::string(to_string(v)); }
std::string show(Method v) { return std::string(to_string(v)); }

template <typename T>
std::string show(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + show(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field scalar(Access access) {
  return {[access](RunConfig& c, const std::string& key, const std::string& v) {
            access(c) = parse_value<T>(key, v);
          },
          [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); }};
}

template <typename T, typename Access>
Field list(Access access) {
  return {[access](RunConfig& c, const std::string& key, const std::string& v) {
            std::vector<T> out;
            for (const auto& item : split_list(v)) out.push_back(parse_value<T>(key, item));
            access(c) = std::move(out);
          },
          [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); }};
}

#define OP_FIELD(type, key, expr) {key, scalar<type>([](RunConfig& c) -> type& { return expr; })}
#define OP_LIST(type, key, expr) {key, list<type>([](RunConfig& c) -> std::vector<type>& { return expr; })}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = {
      OP_FIELD(std::uint64_t, "seed", c.seed),
      OP_FIELD(double, "world.dt", c.world.dt),
      OP_FIELD(std::uint32_t, "world.ticks", c.world.ticks),
      OP_FIELD(int, "world.runs_per_kind", c.world.runs_per_kind),
      OP_LIST(RouteKind, "world.route_kinds", c.world.route_kinds),
      OP_FIELD(int, "world.n_on_route", c.world.scenario.n_on_route),
      OP_FIELD(int, "world.n_clutter", c.world.scenario.n_clutter),
      OP_FIELD(int, "world.n_dynamic", c.world.scenario.n_dynamic),
      OP_FIELD(double, "world.on_route_lateral", c.world.scenario.on_route_lateral),
      OP_FIELD(double, "world.min_radius", c.world.scenario.min_radius),
      OP_FIELD(double, "world.max_radius", c.world.scenario.max_radius),
      OP_FIELD(double, "world.dynamic_speed", c.world.scenario.dynamic_speed),
      OP_FIELD(double, "world.margin", c.world.scenario.margin),
      OP_FIELD(double, "world.start_clear", c.world.scenario.start_clear),
      OP_FIELD(double, "route.spacing", c.world.scenario.route.spacing),
      OP_FIELD(double, "route.length", c.world.scenario.route.length),
      OP_FIELD(double, "route.radius", c.world.scenario.route.radius),
      OP_FIELD(double, "route.radius2", c.world.scenario.route.radius2),
      OP_FIELD(double, "route.sweep", c.world.scenario.route.sweep),
      OP_FIELD(double, "route.loops", c.world.scenario.route.loops),
      OP_FIELD(double, "teacher.cruise_speed", c.teacher.cruise_speed),
      OP_FIELD(double, "teacher.lookahead", c.teacher.pursuit_lookahead),
      OP_FIELD(double, "teacher.plan_horizon", c.teacher.plan_horizon),
      OP_FIELD(int, "teacher.replan_every", c.teacher.replan_every),
      OP_FIELD(double, "teacher.footprint_radius", c.teacher.footprint_radius),
      OP_FIELD(double, "teacher.clearance", c.teacher.clearance),
      OP_FIELD(double, "teacher.grid_resolution", c.teacher.grid_resolution),
      OP_FIELD(int, "teacher.n_beams", c.teacher.n_beams),
      OP_FIELD(double, "teacher.max_range", c.teacher.max_range),
      OP_FIELD(int, "teacher.n_curvatures", c.teacher.n_curvatures),
      OP_FIELD(double, "teacher.primitive_length", c.teacher.primitive_length),
      OP_FIELD(double, "teacher.max_curvature", c.teacher.max_curvature),
      OP_FIELD(double, "kinematics.wheel_radius", c.kinematics.wheel_radius),
      OP_FIELD(double, "kinematics.y_icr0", c.kinematics.y_icr0),
      OP_FIELD(double, "kinematics.omega_wheel_max", c.kinematics.omega_wheel_max),
      OP_FIELD(int, "grid.width", c.grid.width),
      OP_FIELD(int, "grid.height", c.grid.height),
      OP_FIELD(double, "grid.resolution", c.grid.resolution),
      OP_FIELD(int, "dataset.tau_i", c.tau_i),
      OP_FIELD(int, "dataset.tau_o", c.tau_o),
      OP_FIELD(double, "split.train", c.split.train),
      OP_FIELD(double, "split.validation", c.split.validation),
      OP_FIELD(double, "split.test", c.split.test),
      OP_FIELD(double, "fusion.p_hit", c.map.fusion.p_hit),
      OP_FIELD(double, "fusion.p_miss", c.map.fusion.p_miss),
      OP_FIELD(double, "fusion.l_min", c.map.fusion.l_min),
      OP_FIELD(double, "fusion.l_max", c.map.fusion.l_max),
      OP_FIELD(double, "fusion.occ_threshold", c.map.fusion.occ_threshold),
      OP_FIELD(double, "fusion.max_range", c.map.fusion.max_range),
      OP_FIELD(double, "map.z_min", c.map.z_min),
      OP_FIELD(double, "map.z_max", c.map.z_max),
      OP_FIELD(double, "map.margin", c.map.margin),
      OP_FIELD(int, "model.hidden_dim", c.model.hidden_dim),
      OP_FIELD(int, "model.n_layers", c.model.n_layers),
      OP_FIELD(int, "model.embed_dim", c.model.embed_dim),
      OP_FIELD(double, "train.learning_rate", c.train.adam.learning_rate),
      OP_FIELD(double, "train.beta1", c.train.adam.beta1),
      OP_FIELD(double, "train.beta2", c.train.adam.beta2),
      OP_FIELD(double, "train.epsilon", c.train.adam.epsilon),
      OP_FIELD(int, "train.epochs", c.train.epochs),
      OP_FIELD(int, "train.batch_size", c.train.batch_size),
      OP_FIELD(bool, "train.teacher_forcing", c.train.teacher_forcing),
      OP_FIELD(double, "train.target_train_loss", c.train.target_train_loss),
      OP_FIELD(int, "planner.theta_bins", c.planner.theta_bins),
      OP_FIELD(double, "planner.goal_tolerance", c.planner.goal_tolerance),
      OP_FIELD(double, "planner.footprint_radius", c.planner.footprint_radius),
      OP_FIELD(double, "planner.unknown_penalty", c.planner.unknown_penalty),
      OP_FIELD(std::uint64_t, "planner.max_expansions", c.planner.max_expansions),
      OP_LIST(Method, "eval.methods", c.eval.methods),
      OP_FIELD(int, "eval.beam_width", c.eval.beam_width),
      OP_FIELD(int, "eval.latency_trials", c.eval.latency_trials),
      OP_FIELD(double, "eval.primitive_speed", c.eval.primitive_speed),
      OP_FIELD(int, "eval.primitive_curvatures", c.eval.primitive_curvatures),
      OP_FIELD(double, "eval.primitive_duration", c.eval.primitive_duration),
      OP_FIELD(double, "eval.max_curvature", c.eval.max_curvature),
      OP_LIST(double, "sweep.resolutions", c.sweep.resolutions),
      OP_LIST(int, "sweep.hidden_sizes", c.sweep.hidden_sizes),
      OP_LIST(int, "sweep.layer_counts", c.sweep.layer_counts),
      OP_FIELD(int, "sweep.epochs", c.sweep.epochs),
      OP_FIELD(std::string, "plan.map", c.plan.map),
      OP_FIELD(double, "plan.start_x", c.plan.start_x),
      OP_FIELD(double, "plan.start_y", c.plan.start_y),
      OP_FIELD(double, "plan.start_theta", c.plan.start_theta),
      OP_FIELD(double, "plan.goal_x", c.plan.goal_x),
      OP_FIELD(double, "plan.goal_y", c.plan.goal_y),
      OP_FIELD(double, "map_build.side_length", c.map_build.side_length),
      OP_FIELD(double, "map_build.resolution", c.map_build.resolution),
      OP_FIELD(double, "map_build.origin_x", c.map_build.origin_x),
      OP_FIELD(double, "map_build.origin_y", c.map_build.origin_y),
      OP_FIELD(double, "map_build.origin_z", c.map_build.origin_z),
      OP_FIELD(double, "map_build.sensor_x", c.map_build.sensor_x),
      OP_FIELD(double, "map_build.sensor_y", c.map_build.sensor_y),
      OP_FIELD(double, "map_build.sensor_z", c.map_build.sensor_z),
  };
  return fields;
}

#undef OP_FIELD
#undef OP_LIST

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& reg = registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw Error(ErrorCode::ConfigError, "unknown key \"" + key + "\"");
  it->second.set(cfg, key, value);
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw Error(ErrorCode::ConfigError, key + ": " + why);
}

}  // namespace

void RunConfig::validate() const {
  require(world.dt > 0.0, "world.dt", "must be positive");
  require(world.runs_per_kind >= 1, "world.runs_per_kind", "must be at least 1");
  require(!world.route_kinds.empty(), "world.route_kinds", "must not be empty");
  require(world.scenario.min_radius > 0.0 && world.scenario.max_radius >= world.scenario.min_radius,
          "world.max_radius", "radii must satisfy 0 < min_radius <= max_radius");
  require(world.scenario.route.spacing > 0.0, "route.spacing", "must be positive");
  require(teacher.cruise_speed > 0.0, "teacher.cruise_speed", "must be positive");
  require(teacher.n_beams >= 1, "teacher.n_beams", "must be at least 1");
  require(teacher.max_range > 0.0, "teacher.max_range", "must be positive");
  require(teacher.n_curvatures >= 1 && teacher.n_curvatures % 2 == 1, "teacher.n_curvatures", "must be odd");
  require(teacher.replan_every >= 1, "teacher.replan_every", "must be at least 1");
  require(kinematics.wheel_radius > 0.0, "kinematics.wheel_radius", "must be positive");
  require(kinematics.y_icr0 > 0.0, "kinematics.y_icr0", "must be positive");
  require(kinematics.omega_wheel_max > 0.0, "kinematics.omega_wheel_max", "must be positive");
  require(grid.width >= 1, "grid.width", "must be at least 1");
  require(grid.height >= 1, "grid.height", "must be at least 1");
  require(grid.resolution > 0.0, "grid.resolution", "must be positive");
  require(tau_i >= 0, "dataset.tau_i", "must be non-negative");
  require(tau_o >= 1, "dataset.tau_o", "must be at least 1");
  require(split.train >= 0.0 && split.validation >= 0.0 && split.test >= 0.0 &&
              std::abs(split.train + split.validation + split.test - 1.0) < 1e-9,
          "split.train", "ratios must be non-negative and sum to 1");
  try {
    map.fusion.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, std::string("fusion: ") + e.what());
  }
  require(map.z_min < map.z_max, "map.z_min", "must be below map.z_max");
  require(model.hidden_dim >= 1, "model.hidden_dim", "must be at least 1");
  require(model.n_layers >= 1, "model.n_layers", "must be at least 1");
  require(model.embed_dim >= 1, "model.embed_dim", "must be at least 1");
  require(train.adam.learning_rate > 0.0, "train.learning_rate", "must be positive");
  require(train.epochs >= 1, "train.epochs", "must be at least 1");
  require(train.batch_size >= 1, "train.batch_size", "must be at least 1");
  require(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0, "train.beta1", "must lie in [0, 1)");
  require(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0, "train.beta2", "must lie in [0, 1)");
  require(train.adam.epsilon > 0.0, "train.epsilon", "must be positive");
  require(planner.theta_bins >= 1, "planner.theta_bins", "must be at least 1");
  require(planner.footprint_radius >= 0.0, "planner.footprint_radius", "must be non-negative");
  require(planner.unknown_penalty >= 1.0, "planner.unknown_penalty", "must be at least 1");
  require(eval.beam_width >= 1, "eval.beam_width", "must be at least 1");
  require(eval.latency_trials >= 10, "eval.latency_trials", "must be at least 10");
  require(eval.primitive_curvatures >= 1 && eval.primitive_curvatures % 2 == 1, "eval.primitive_curvatures",
          "must be odd");
  require(!sweep.resolutions.empty(), "sweep.resolutions", "must not be empty");
  for (double r : sweep.resolutions) require(r > 0.0, "sweep.resolutions", "entries must be positive");
  require(!sweep.hidden_sizes.empty(), "sweep.hidden_sizes", "must not be empty");
  for (int h : sweep.hidden_sizes) require(h >= 1, "sweep.hidden_sizes", "entries must be positive");
  require(!sweep.layer_counts.empty(), "sweep.layer_counts", "must not be empty");
  for (int l : sweep.layer_counts) require(l >= 1, "sweep.layer_counts", "entries must be positive");
  require(sweep.epochs >= 1, "sweep.epochs", "must be at least 1");
  require(map_build.resolution > 0.0, "map_build.resolution", "must be positive");
  require(map_build.side_length > map_build.resolution, "map_build.side_length", "must exceed the resolution");
}

ModelSpec RunConfig::model_spec(Head head) const {
  ModelSpec s = model;
  s.grid = grid;
  s.tau_i = tau_i;
  s.tau_o = tau_o;
  s.head = head;
  return s;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key=value");
    }
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "override \"" + assignment + "\" lacks '='");
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : registry()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : registry()) keys.push_back(key);
  return keys;
}

}  // namespace octopath
