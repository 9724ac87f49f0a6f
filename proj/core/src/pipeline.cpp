#include "octopath/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "octopath/error.hpp"
#include "octopath/random.hpp"

namespace octopath {

RouteKind route_kind_of_run(const RunConfig& cfg, int run_id) {
  const int n_kinds = static_cast<int>(cfg.world.route_kinds.size());
  const int k = run_id / cfg.world.runs_per_kind;
  if (run_id < 0 || k >= n_kinds) throw Error(ErrorCode::InvalidArgument, "run id out of range");
  return cfg.world.route_kinds[static_cast<std::size_t>(k)];
}

DriveLog simulate_run(const RunConfig& cfg, int run_id) {
  ScenarioConfig sc = cfg.world.scenario;
  sc.kind = route_kind_of_run(cfg, run_id);
  const Scenario scenario = make_scenario(sc, derive_seed(cfg.seed, "scenario/" + std::to_string(run_id)), run_id);
  return collect_run(scenario.world, scenario.route, cfg.kinematics, cfg.world.dt, cfg.world.ticks, cfg.teacher,
                     run_id);
}

std::vector<DriveLog> simulate(const RunConfig& cfg) {
  cfg.validate();
  std::vector<DriveLog> logs;
  const int total = cfg.world.runs_per_kind * static_cast<int>(cfg.world.route_kinds.size());
  for (int run = 0; run < total; ++run) logs.push_back(simulate_run(cfg, run));
  return logs;
}

Dataset build_dataset(const RunConfig& cfg, const std::vector<DriveLog>& logs, BuildStats* stats) {
  std::vector<SampleSequence> samples;
  for (const auto& log : logs) {
    if (log.records.size() < static_cast<std::size_t>(cfg.tau_i + cfg.tau_o + 1)) {
      if (stats != nullptr) ++stats->dropped;  // too short to yield any sample
      continue;
    }
    auto part = build_samples(log, cfg.grid, cfg.tau_i, cfg.tau_o, cfg.map, stats);
    samples.insert(samples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return split_dataset(std::move(samples), cfg.grid, cfg.tau_i, cfg.tau_o, cfg.split, derive_seed(cfg.seed, "split"));
}

TrainResult train_head(const RunConfig& cfg, const Dataset& data, Head head, const EpochCallback& on_epoch) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, head == Head::Classification ? "train/classification" : "train/regression");
  return train(data, cfg.model_spec(head), tc, on_epoch);
}

BenchmarkConfig benchmark_config(const RunConfig& cfg, const ModelParams* classifier, const ModelParams* regressor) {
  BenchmarkConfig bc;
  bc.classifier = classifier;
  bc.regressor = regressor;
  bc.beam_width = cfg.eval.beam_width;
  bc.kinematics = cfg.kinematics;
  bc.planner = cfg.planner;
  bc.primitive_speed = cfg.eval.primitive_speed;
  bc.primitive_curvatures = cfg.eval.primitive_curvatures;
  bc.primitive_duration = cfg.eval.primitive_duration;
  bc.planner_max_curvature = cfg.eval.max_curvature;
  return bc;
}

std::vector<EvalScenario> test_scenarios(const RunConfig& cfg, const Dataset& data) {
  std::vector<EvalScenario> out;
  EvalScenario all{"all", {}};
  for (RouteKind kind : cfg.world.route_kinds) {
    EvalScenario sc{std::string(to_string(kind)), {}};
    for (const auto* s : data.subset(Split::Test)) {
      if (route_kind_of_run(cfg, s->run_id) == kind) sc.samples.push_back(s);
    }
    if (!sc.samples.empty()) out.push_back(std::move(sc));
  }
  all.samples = data.subset(Split::Test);
  out.push_back(std::move(all));
  return out;
}

PredictionResult predict_from_log(const RunConfig& cfg, const ModelParams& params, const DriveLog& log,
                                  std::uint32_t tick) {
  const ModelSpec& ms = params.spec;
  if (ms.grid.width != cfg.grid.width || ms.grid.height != cfg.grid.height ||
      ms.grid.resolution != cfg.grid.resolution) {
    throw Error(ErrorCode::ConfigError, "grid: checkpoint grid differs from the configured grid");
  }
  if (ms.tau_i != cfg.tau_i || ms.tau_o != cfg.tau_o) {
    throw Error(ErrorCode::ConfigError, "dataset.tau_i/tau_o: checkpoint horizons differ from the configuration");
  }
  const auto samples = build_samples(log, cfg.grid, cfg.tau_i, cfg.tau_o, cfg.map);
  for (const auto& s : samples) {
    if (s.tick == tick) return predict(params, s, DecodeOptions{cfg.eval.beam_width});
  }
  throw Error(ErrorCode::InvalidArgument, "no sample anchored at tick " + std::to_string(tick));
}

std::string trajectory_csv(const std::vector<Vec2>& points) {
  std::ostringstream out;
  out.precision(9);
  out << "step,x,y\n";
  for (std::size_t i = 0; i < points.size(); ++i) out << i + 1 << ',' << points[i].x << ',' << points[i].y << '\n';
  return out.str();
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<DriveLog>& logs) {
  std::vector<SweepRow> rows;
  for (double res : cfg.sweep.resolutions) {
    RunConfig c = cfg;
    c.grid.resolution = res;
    c.grid.width = std::max(1, static_cast<int>(std::lround(cfg.grid.width * cfg.grid.resolution / res)));
    c.grid.height = std::max(1, static_cast<int>(std::lround(cfg.grid.height * cfg.grid.resolution / res)));
    const Dataset data = build_dataset(c, logs);
    for (int hidden : cfg.sweep.hidden_sizes) {
      for (int layers : cfg.sweep.layer_counts) {
        c.model.hidden_dim = hidden;
        c.model.n_layers = layers;
        c.train.epochs = cfg.sweep.epochs;
        const auto t0 = std::chrono::steady_clock::now();
        const TrainResult tr = train_head(c, data, Head::Classification);
        const auto t1 = std::chrono::steady_clock::now();
        const BenchmarkConfig bc = benchmark_config(c, &tr.params, nullptr);
        EvalScenario all{"all", data.subset(Split::Test)};
        const auto rec = run_benchmark({all}, {Method::Octopath}, bc);
        SweepRow row;
        row.resolution = res;
        row.width = c.grid.width;
        row.height = c.grid.height;
        row.hidden_dim = hidden;
        row.n_layers = layers;
        row.epochs = static_cast<int>(tr.curve.size());
        row.final_train_nll = tr.curve.back().train_loss;
        row.best_val_nll = tr.curve[static_cast<std::size_t>(tr.best_epoch - 1)].val_loss;
        row.rmse = rec.front().rmse;
        row.train_seconds = std::chrono::duration<double>(t1 - t0).count();
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(9);
  out << "resolution,width,height,hidden_dim,n_layers,epochs,final_train_nll,best_val_nll,rmse\n";
  for (const auto& r : rows) {
    out << r.resolution << ',' << r.width << ',' << r.height << ',' << r.hidden_dim << ',' << r.n_layers << ','
        << r.epochs << ',' << r.final_train_nll << ',' << r.best_val_nll << ',' << r.rmse << '\n';
  }
  return out.str();
}

std::string sweep_timing_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(6);
  out << "resolution,hidden_dim,n_layers,train_seconds,rmse\n";
  for (const auto& r : rows) {
    out << r.resolution << ',' << r.hidden_dim << ',' << r.n_layers << ',' << r.train_seconds << ',' << r.rmse
        << '\n';
  }
  return out.str();
}

}  // namespace octopath
