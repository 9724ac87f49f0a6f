#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "octopath/dataset.hpp"
#include "octopath/planners.hpp"
#include "octopath/seq2seq.hpp"

namespace octopath {

/// sqrt(mean over steps of squared Euclidean error). Throws ShapeError.
[[nodiscard]] double rmse(std::span<const Vec2> pred, std::span<const Vec2> gt);

struct AxisErrors {
  double mean_ex = 0.0;
  double max_ex = 0.0;
  double mean_ey = 0.0;
  double max_ey = 0.0;
};

/// Absolute per-step errors along x and y. Throws ShapeError.
[[nodiscard]] AxisErrors axis_errors(std::span<const Vec2> pred, std::span<const Vec2> gt);

enum class Method { Octopath, Regression, HybridAStar, Oracle };

[[nodiscard]] std::string_view to_string(Method m);
/// "octopath", "regression", "hybrid_astar", "oracle". Throws ConfigError.
[[nodiscard]] Method parse_method(std::string_view name);

struct MetricsRecord {
  std::string scenario;
  std::string method;
  double mean_ex = 0.0;
  double max_ex = 0.0;
  double mean_ey = 0.0;
  double max_ey = 0.0;
  double rmse = 0.0;               // mean of per-window RMSE
  std::size_t windows = 0;
  std::size_t fallbacks = 0;       // planner failures answered by straight-line interpolation
  std::vector<double> step_mean;   // per-timestep Euclidean error
  std::vector<double> step_std;
};

struct EvalScenario {
  std::string name;
  std::vector<const SampleSequence*> samples;
};

struct BenchmarkConfig {
  const ModelParams* classifier = nullptr;
  const ModelParams* regressor = nullptr;
  int beam_width = 1;
  KinematicParams kinematics;
  PlannerConfig planner;
  double primitive_speed = 1.0;
  int primitive_curvatures = 5;
  double primitive_duration = 0.4;
  double planner_max_curvature = 1.0;
  double behind_margin = 2.0;  // Unknown cells added behind the window for the planner [m]
};

/// Predicts or plans tau_o steps for every sample and compares against the
/// logged future. Throws MissingArtifact when a learned method lacks weights.
[[nodiscard]] std::vector<MetricsRecord> run_benchmark(const std::vector<EvalScenario>& scenarios,
                                                       const std::vector<Method>& methods,
                                                       const BenchmarkConfig& config);

/// Ego-frame prediction of one method for one sample (oracle: the logged future).
/// `fallback` is set when the planner failed.
[[nodiscard]] std::vector<Vec2> predict_ego(Method method, const SampleSequence& sample, const GridSpec& grid,
                                            const BenchmarkConfig& config, bool* fallback = nullptr);

/// Window at the anchor tick as a planning grid in the anchor frame.
[[nodiscard]] TriStateGrid window_grid(const SampleSequence& sample, const GridSpec& grid, double behind_margin);

/// scenario,method,mean_ex,max_ex,mean_ey,max_ey,rmse
[[nodiscard]] std::string report_csv(const std::vector<MetricsRecord>& records);
/// timestep,mean,std,method pooled over scenarios.
[[nodiscard]] std::string error_curve_csv(const std::vector<MetricsRecord>& records);
[[nodiscard]] std::string error_curve_svg(const std::vector<MetricsRecord>& records);
[[nodiscard]] std::string learning_curve_svg(const std::vector<CurvePoint>& curve, std::string_view title);

struct LatencyReport {
  std::vector<double> samples_ms;
  double min_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double paths_per_second = 0.0;
};

/// Wall time of single-sample predict calls after `warmup` untimed calls.
/// Throws InvalidArgument when n_trials < 10.
[[nodiscard]] LatencyReport latency_bench(const ModelParams& params, const SampleSequence& sample, int n_trials,
                                          int warmup = 5, int beam_width = 1);
[[nodiscard]] LatencyReport summarize_latency(std::vector<double> samples_ms);
[[nodiscard]] std::string latency_csv(const LatencyReport& report);

}  // namespace octopath
