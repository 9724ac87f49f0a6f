#pragma once

#include <string>
#include <vector>

#include "octopath/config.hpp"

namespace octopath {

/// Run ids are kind_index * runs_per_kind + k; every run gets its own
/// scenario seed derived from the global seed.
[[nodiscard]] std::vector<DriveLog> simulate(const RunConfig& cfg);
[[nodiscard]] DriveLog simulate_run(const RunConfig& cfg, int run_id);
[[nodiscard]] RouteKind route_kind_of_run(const RunConfig& cfg, int run_id);

[[nodiscard]] Dataset build_dataset(const RunConfig& cfg, const std::vector<DriveLog>& logs,
                                    BuildStats* stats = nullptr);

[[nodiscard]] TrainResult train_head(const RunConfig& cfg, const Dataset& data, Head head,
                                     const EpochCallback& on_epoch = {});

[[nodiscard]] BenchmarkConfig benchmark_config(const RunConfig& cfg, const ModelParams* classifier,
                                               const ModelParams* regressor);

/// Test-split samples grouped per route kind, followed by "all".
[[nodiscard]] std::vector<EvalScenario> test_scenarios(const RunConfig& cfg, const Dataset& data);

/// Rebuilds the samples of `log` with the configured grid and decodes the one
/// anchored at `tick`. Throws ConfigError when the checkpoint grid or horizons
/// differ from the configuration, InvalidArgument when no sample has that tick.
[[nodiscard]] PredictionResult predict_from_log(const RunConfig& cfg, const ModelParams& params, const DriveLog& log,
                                                std::uint32_t tick);
/// "step,x,y" rows in the global frame.
[[nodiscard]] std::string trajectory_csv(const std::vector<Vec2>& points);

struct SweepRow {
  double resolution = 0.0;
  int width = 0;
  int height = 0;
  int hidden_dim = 0;
  int n_layers = 0;
  int epochs = 0;
  double final_train_nll = 0.0;
  double best_val_nll = 0.0;
  double rmse = 0.0;
  double train_seconds = 0.0;
};

/// Resolution x hidden size x layer count grid. The window keeps its metric
/// extent, so coarser resolutions use fewer cells.
[[nodiscard]] std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<DriveLog>& logs);
/// Deterministic columns only.
[[nodiscard]] std::string sweep_csv(const std::vector<SweepRow>& rows);
[[nodiscard]] std::string sweep_timing_csv(const std::vector<SweepRow>& rows);

}  // namespace octopath
