#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "octopath/config.hpp"
#include "octopath/error.hpp"
#include "octopath/pipeline.hpp"

namespace fs = std::filesystem;
using namespace octopath;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value config file");
  sub->add_option("--seed", c.seed, "global seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--set", c.overrides, "key=value override (repeatable)");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config(c.config);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "config.resolved", dump_config(cfg));
  return cfg;
}

fs::path log_path(const fs::path& dir, int run_id) {
  std::ostringstream name;
  name << "run_" << std::setw(4) << std::setfill('0') << run_id << ".jsonl";
  return dir / name.str();
}

std::vector<DriveLog> read_logs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "log directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::IoError, "no .jsonl logs in " + dir.string());
  std::vector<DriveLog> logs;
  for (const auto& f : files) logs.push_back(read_drive_log(f.string()));
  return logs;
}

std::vector<DriveLog> cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  const auto logs = simulate(cfg);
  fs::create_directories(out / "logs");
  int aborted = 0;
  for (const auto& log : logs) {
    write_drive_log(log_path(out / "logs", log.run_id).string(), log);
    if (log.aborted) ++aborted;
  }
  std::cerr << "simulate: " << logs.size() << " runs, " << aborted << " aborted\n";
  return logs;
}

Dataset cmd_dataset(const RunConfig& cfg, const std::vector<DriveLog>& logs, const fs::path& out) {
  BuildStats stats;
  Dataset ds = build_dataset(cfg, logs, &stats);
  save_dataset((out / "dataset.opd").string(), ds);
  std::cerr << "dataset: " << stats.kept << " samples kept, " << stats.dropped << " dropped (train "
            << ds.count(Split::Train) << ", val " << ds.count(Split::Validation) << ", test " << ds.count(Split::Test)
            << ")\n";
  return ds;
}

std::string head_name(Head h) { return h == Head::Classification ? "classification" : "regression"; }

ModelParams cmd_train(const RunConfig& cfg, const Dataset& ds, Head head, const fs::path& out, bool with_optimizer) {
  const std::string name = head_name(head);
  const auto result = train_head(cfg, ds, head, [&](const CurvePoint& p) {
    if (p.epoch % 10 == 0 || p.epoch == 1) {
      std::cerr << name << " epoch " << p.epoch << " train " << p.train_loss << " val " << p.val_loss << "\n";
    }
  });
  save_checkpoint((out / ("model_" + name + ".opm")).string(), result.params,
                  with_optimizer ? &result.optimizer : nullptr);
  write_text(out / ("curve_" + name + ".csv"), curve_to_csv(result.curve));
  write_text(out / ("curve_" + name + ".svg"), learning_curve_svg(result.curve, name));
  std::cerr << name << ": best epoch " << result.best_epoch << "\n";
  return result.params;
}

void cmd_bench(const RunConfig& cfg, const Dataset& ds, const ModelParams* cls, const ModelParams* reg,
               const fs::path& out) {
  std::vector<Method> methods;
  for (Method m : cfg.eval.methods) {
    if (m == Method::Octopath && cls == nullptr) throw Error(ErrorCode::MissingArtifact, "classification checkpoint");
    if (m == Method::Regression && reg == nullptr) throw Error(ErrorCode::MissingArtifact, "regression checkpoint");
    methods.push_back(m);
  }
  const auto scenarios = test_scenarios(cfg, ds);
  const auto records = run_benchmark(scenarios, methods, benchmark_config(cfg, cls, reg));
  write_text(out / "report.csv", report_csv(records));
  write_text(out / "error_curve.csv", error_curve_csv(records));
  write_text(out / "error_curve.svg", error_curve_svg(records));
  std::cout << report_csv(records);
  const auto test = ds.subset(Split::Test);
  if (cls != nullptr && !test.empty()) {
    const auto lat = latency_bench(*cls, *test.front(), cfg.eval.latency_trials, 5, cfg.eval.beam_width);
    // wall times vary run to run, so they go to their own file
    write_text(out / "latency.csv", latency_csv(lat));
    std::cerr << "latency: median " << lat.median_ms << " ms, p95 " << lat.p95_ms << " ms, "
              << lat.paths_per_second << " paths/s\n";
  }
}

std::optional<ModelParams> load_params(const std::string& path) {
  if (path.empty() || !fs::exists(path)) return std::nullopt;
  return load_checkpoint(path).params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"octopath: octree maps, trajectory prediction and planning workbench"};
  app.require_subcommand(1);

  Common c;
  std::string logs_dir;
  std::string dataset_path;
  std::string heads = "both";
  bool with_optimizer = false;
  std::string cls_path;
  std::string reg_path;
  std::string log_file;
  std::uint32_t tick = 0;
  std::string points_path;

  auto* sim = app.add_subcommand("simulate", "generate worlds and routes, drive them and write logs");
  add_common(sim, c);

  auto* dset = app.add_subcommand("dataset", "build the sample container from logs");
  add_common(dset, c);
  dset->add_option("--logs", logs_dir, "log directory (default <out>/logs)");

  auto* tr = app.add_subcommand("train", "train the classification and/or regression heads");
  add_common(tr, c);
  tr->add_option("--dataset", dataset_path, "dataset file (default <out>/dataset.opd)");
  tr->add_option("--head", heads, "classification, regression or both")
      ->check(CLI::IsMember({"classification", "regression", "both"}));
  tr->add_flag("--with-optimizer", with_optimizer, "store Adam state in the checkpoint");

  auto* pred = app.add_subcommand("predict", "decode one trajectory from a log tick");
  add_common(pred, c);
  pred->add_option("--checkpoint", cls_path, "model checkpoint")->required();
  pred->add_option("--log", log_file, "drive log (.jsonl)")->required();
  pred->add_option("--tick", tick, "anchor tick")->required();

  auto* plan = app.add_subcommand("plan", "hybrid A* on an octree map");
  add_common(plan, c);

  auto* bench = app.add_subcommand("bench", "benchmark methods on the test split");
  add_common(bench, c);
  bench->add_option("--dataset", dataset_path, "dataset file (default <out>/dataset.opd)");
  bench->add_option("--classifier", cls_path, "classification checkpoint (default <out>/model_classification.opm)");
  bench->add_option("--regressor", reg_path, "regression checkpoint (default <out>/model_regression.opm)");

  auto* sweep = app.add_subcommand("sweep", "resolution x hidden size x layer count ablation");
  add_common(sweep, c);
  sweep->add_option("--logs", logs_dir, "log directory (default <out>/logs)");

  auto* mapb = app.add_subcommand("map-build", "integrate a point-cloud file into an octree file");
  add_common(mapb, c);
  mapb->add_option("--points", points_path, "x y z per line")->required();

  auto* all = app.add_subcommand("pipeline", "simulate, dataset, train and bench in one go");
  add_common(all, c);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve(c);
    const fs::path out = c.out;
    if (logs_dir.empty()) logs_dir = (out / "logs").string();
    if (dataset_path.empty()) dataset_path = (out / "dataset.opd").string();

    if (sim->parsed()) {
      (void)cmd_simulate(cfg, out);
    } else if (dset->parsed()) {
      (void)cmd_dataset(cfg, read_logs(logs_dir), out);
    } else if (tr->parsed()) {
      const Dataset ds = load_dataset(dataset_path);
      if (heads != "regression") (void)cmd_train(cfg, ds, Head::Classification, out, with_optimizer);
      if (heads != "classification") (void)cmd_train(cfg, ds, Head::Regression, out, with_optimizer);
    } else if (pred->parsed()) {
      const Checkpoint ck = load_checkpoint(cls_path);
      const auto result = predict_from_log(cfg, ck.params, read_drive_log(log_file), tick);
      write_text(out / "prediction.csv", trajectory_csv(result.points));
      std::cout << trajectory_csv(result.points);
    } else if (plan->parsed()) {
      if (cfg.plan.map.empty()) throw Error(ErrorCode::ConfigError, "plan.map: no map file given");
      const OctreeMap map = OctreeMap::load(cfg.plan.map);
      const TriStateGrid grid = map.project_2d(cfg.map.z_min, cfg.map.z_max);
      const auto prims = motion_primitives(cfg.kinematics, cfg.eval.primitive_speed, cfg.eval.primitive_curvatures,
                                           cfg.eval.primitive_duration, cfg.eval.max_curvature);
      const PlanResult result = hybrid_astar(grid, Pose2{cfg.plan.start_x, cfg.plan.start_y, cfg.plan.start_theta},
                                             Vec2{cfg.plan.goal_x, cfg.plan.goal_y}, prims, cfg.planner);
      write_plan_csv((out / "plan.csv").string(), result);
      std::cerr << "plan: length " << result.length << " m, cost " << result.cost << ", " << result.expansions
                << " expansions\n";
    } else if (bench->parsed()) {
      const Dataset ds = load_dataset(dataset_path);
      if (cls_path.empty()) cls_path = (out / "model_classification.opm").string();
      if (reg_path.empty()) reg_path = (out / "model_regression.opm").string();
      const auto cls = load_params(cls_path);
      const auto reg = load_params(reg_path);
      cmd_bench(cfg, ds, cls ? &*cls : nullptr, reg ? &*reg : nullptr, out);
    } else if (sweep->parsed()) {
      const auto rows = run_sweep(cfg, read_logs(logs_dir));
      write_text(out / "sweep.csv", sweep_csv(rows));
      write_text(out / "sweep_timing.csv", sweep_timing_csv(rows));
      std::cout << sweep_csv(rows);
    } else if (mapb->parsed()) {
      const auto& mb = cfg.map_build;
      OctreeMap map(Vec3{mb.origin_x, mb.origin_y, mb.origin_z}, mb.side_length, mb.resolution, cfg.map.fusion);
      const auto points = read_point_cloud(points_path);
      map.integrate_scan(Vec3{mb.sensor_x, mb.sensor_y, mb.sensor_z}, points);
      map.save((out / "map.oct").string());
      std::cerr << "map-build: " << points.size() << " points, " << map.leaf_count() << " leaves\n";
    } else if (all->parsed()) {
      const auto logs = cmd_simulate(cfg, out);
      const Dataset ds = cmd_dataset(cfg, logs, out);
      const ModelParams cls = cmd_train(cfg, ds, Head::Classification, out, false);
      const ModelParams reg = cmd_train(cfg, ds, Head::Regression, out, false);
      cmd_bench(cfg, ds, &cls, &reg, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
