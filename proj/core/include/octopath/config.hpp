#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octopath/dataset.hpp"
#include "octopath/eval.hpp"
#include "octopath/kinematics.hpp"
#include "octopath/planners.hpp"
#include "octopath/seq2seq.hpp"
#include "octopath/world_sim.hpp"

namespace octopath {

struct WorldConfig {
  double dt = 0.1;
  std::uint32_t ticks = 400;
  int runs_per_kind = 4;
  std::vector<RouteKind> route_kinds{RouteKind::Line, RouteKind::SCurve, RouteKind::Circle};
  ScenarioConfig scenario;  // kind and route are overridden per run
};

struct EvalConfig {
  std::vector<Method> methods{Method::Octopath, Method::Regression, Method::HybridAStar};
  int beam_width = 1;
  int latency_trials = 100;
  double primitive_speed = 1.0;
  int primitive_curvatures = 5;
  double primitive_duration = 0.4;
  double max_curvature = 1.0;
};

struct SweepConfig {
  std::vector<double> resolutions{0.2, 0.4};
  std::vector<int> hidden_sizes{32, 64};
  std::vector<int> layer_counts{1};
  int epochs = 20;
};

struct PlanConfig {
  std::string map;            // octree file
  double start_x = 0.0;
  double start_y = 0.0;
  double start_theta = 0.0;
  double goal_x = 0.0;
  double goal_y = 0.0;
};

struct MapBuildConfig {
  double side_length = 51.2;
  double resolution = 0.2;
  double origin_x = -25.6;
  double origin_y = -25.6;
  double origin_z = -25.6;
  double sensor_x = 0.0;
  double sensor_y = 0.0;
  double sensor_z = 0.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  TeacherConfig teacher;
  KinematicParams kinematics;
  GridSpec grid;
  int tau_i = 4;
  int tau_o = 10;
  SplitRatios split;
  MapBuilderConfig map;
  ModelSpec model;    // grid and horizons are copied from the fields above
  TrainConfig train;  // seed is derived from `seed`
  PlannerConfig planner;
  EvalConfig eval;
  SweepConfig sweep;
  PlanConfig plan;
  MapBuildConfig map_build;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Model spec with the configured grid and horizons.
  [[nodiscard]] ModelSpec model_spec(Head head) const;
};

/// key=value lines; '#' starts a comment; keys are dotted (e.g. train.epochs).
/// Unknown keys and malformed values throw ConfigError naming the key.
[[nodiscard]] RunConfig parse_config_text(const std::string& text);
/// Throws IoError when the file cannot be read.
[[nodiscard]] RunConfig parse_config(const std::string& path);
/// Applies one "key=value" override.
void apply_override(RunConfig& cfg, const std::string& assignment);
/// Every key with its resolved value, sorted; parseable by parse_config_text.
[[nodiscard]] std::string dump_config(const RunConfig& cfg);
[[nodiscard]] std::vector<std::string> config_keys();

}  // namespace octopath
