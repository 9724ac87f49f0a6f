#include "octopath/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "octopath/error.hpp"

namespace octopath {

namespace {

void check_lengths(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::ShapeError, "trajectories differ in length (" + std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()) + ")");
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}

std::vector<Vec2> straight_fallback(Vec2 goal, int steps) {
  std::vector<Vec2> out;
  for (int k = 1; k <= steps; ++k) out.push_back((static_cast<double>(k) / steps) * goal);
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

double rmse(std::span<const Vec2> pred, std::span<const Vec2> gt) {
  check_lengths(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const Vec2 d = pred[t] - gt[t];
    sum += d.x * d.x + d.y * d.y;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

AxisErrors axis_errors(std::span<const Vec2> pred, std::span<const Vec2> gt) {
  check_lengths(pred, gt);
  AxisErrors e;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double ex = std::abs(pred[t].x - gt[t].x);
    const double ey = std::abs(pred[t].y - gt[t].y);
    e.mean_ex += ex;
    e.mean_ey += ey;
    e.max_ex = std::max(e.max_ex, ex);
    e.max_ey = std::max(e.max_ey, ey);
  }
  e.mean_ex /= static_cast<double>(pred.size());
  e.mean_ey /= static_cast<double>(pred.size());
  return e;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Octopath: return "octopath";
    case Method::Regression: return "regression";
    case Method::HybridAStar: return "hybrid_astar";
    case Method::Oracle: return "oracle";
  }
  return "octopath";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::Octopath, Method::Regression, Method::HybridAStar, Method::Oracle}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown method \"" + std::string(name) + "\"");
}

TriStateGrid window_grid(const SampleSequence& sample, const GridSpec& grid, double behind_margin) {
  const auto& w = sample.windows.back();
  const int behind = static_cast<int>(std::ceil(behind_margin / grid.resolution - 1e-9));
  const double half = 0.5 * grid.height * grid.resolution;
  TriStateGrid g({-behind * grid.resolution, -half}, grid.width + behind, grid.height, grid.resolution);
  for (int i = 0; i < grid.width; ++i) {
    for (int j = 0; j < grid.height; ++j) {
      const auto v = w[static_cast<std::size_t>(i) * static_cast<std::size_t>(grid.height) +
                       static_cast<std::size_t>(j)];
      g.set(i + behind, j, v > 0 ? CellState::Occupied : (v < 0 ? CellState::Free : CellState::Unknown));
    }
  }
  return g;
}

std::vector<Vec2> predict_ego(Method method, const SampleSequence& sample, const GridSpec& grid,
                              const BenchmarkConfig& config, bool* fallback) {
  if (fallback != nullptr) *fallback = false;
  const int steps = static_cast<int>(sample.future.size());
  switch (method) {
    case Method::Oracle:
      return sample.future;
    case Method::Octopath: {
      if (config.classifier == nullptr) throw Error(ErrorCode::MissingArtifact, "no classifier checkpoint");
      return predict(*config.classifier, sample, {config.beam_width}).ego_points;
    }
    case Method::Regression: {
      if (config.regressor == nullptr) throw Error(ErrorCode::MissingArtifact, "no regression checkpoint");
      return forward_regression(*config.regressor, sample, false);
    }
    case Method::HybridAStar: {
      const Vec2 goal = sample.ref_window.back();
      try {
        const TriStateGrid g = window_grid(sample, grid, config.behind_margin);
        const PrimitiveSet prims = motion_primitives(config.kinematics, config.primitive_speed,
                                                     config.primitive_curvatures, config.primitive_duration,
                                                     config.planner_max_curvature);
        const PlanResult plan = hybrid_astar(g, {0.0, 0.0, 0.0}, goal, prims, config.planner);
        std::vector<Vec2> out;
        for (int k = 1; k <= steps; ++k) {
          out.push_back(pose_at_arc_length(plan, plan.length * k / steps).position());
        }
        return out;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoPath && e.code() != ErrorCode::InvalidGoal &&
            e.code() != ErrorCode::InvalidArgument) {
          throw;
        }
        if (fallback != nullptr) *fallback = true;
        return straight_fallback(goal, steps);
      }
    }
  }
  return {};
}

std::vector<MetricsRecord> run_benchmark(const std::vector<EvalScenario>& scenarios,
                                         const std::vector<Method>& methods, const BenchmarkConfig& config) {
  for (Method m : methods) {
    if (m == Method::Octopath && config.classifier == nullptr) {
      throw Error(ErrorCode::MissingArtifact, "octopath needs a classification checkpoint");
    }
    if (m == Method::Regression && config.regressor == nullptr) {
      throw Error(ErrorCode::MissingArtifact, "regression needs a regression checkpoint");
    }
  }
  GridSpec grid;
  if (config.classifier != nullptr) grid = config.classifier->spec.grid;
  else if (config.regressor != nullptr) grid = config.regressor->spec.grid;

  std::vector<MetricsRecord> records;
  for (const auto& sc : scenarios) {
    for (Method m : methods) {
      MetricsRecord rec;
      rec.scenario = sc.name;
      rec.method = std::string(to_string(m));
      std::vector<double> sum;
      std::vector<double> sq;
      double rmse_sum = 0.0;
      double ex_sum = 0.0;
      double ey_sum = 0.0;
      std::size_t steps_total = 0;
      for (const SampleSequence* s : sc.samples) {
        bool fb = false;
        const std::vector<Vec2> pred_ego = predict_ego(m, *s, grid, config, &fb);
        if (fb) ++rec.fallbacks;
        std::vector<Vec2> pred;
        std::vector<Vec2> gt;
        for (std::size_t k = 0; k < s->future.size(); ++k) {
          pred.push_back(to_global(s->anchor, pred_ego[k]));
          gt.push_back(to_global(s->anchor, s->future[k]));
        }
        const AxisErrors ax = axis_errors(pred, gt);
        rmse_sum += rmse(pred, gt);
        ex_sum += ax.mean_ex * static_cast<double>(pred.size());
        ey_sum += ax.mean_ey * static_cast<double>(pred.size());
        steps_total += pred.size();
        rec.max_ex = std::max(rec.max_ex, ax.max_ex);
        rec.max_ey = std::max(rec.max_ey, ax.max_ey);
        sum.resize(pred.size(), 0.0);
        sq.resize(pred.size(), 0.0);
        for (std::size_t k = 0; k < pred.size(); ++k) {
          const double e = norm(pred[k] - gt[k]);
          sum[k] += e;
          sq[k] += e * e;
        }
        ++rec.windows;
      }
      if (rec.windows > 0) {
        const auto n = static_cast<double>(rec.windows);
        rec.rmse = rmse_sum / n;
        rec.mean_ex = ex_sum / static_cast<double>(steps_total);
        rec.mean_ey = ey_sum / static_cast<double>(steps_total);
        for (std::size_t k = 0; k < sum.size(); ++k) {
          const double mean = sum[k] / n;
          rec.step_mean.push_back(mean);
          rec.step_std.push_back(std::sqrt(std::max(0.0, sq[k] / n - mean * mean)));
        }
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::string report_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "scenario,method,mean_ex,max_ex,mean_ey,max_ey,rmse\n";
  for (const auto& r : records) {
    out += r.scenario + "," + r.method + "," + fmt(r.mean_ex) + "," + fmt(r.max_ex) + "," + fmt(r.mean_ey) + "," +
           fmt(r.max_ey) + "," + fmt(r.rmse) + "\n";
  }
  return out;
}

namespace {

struct PooledCurve {
  std::vector<double> mean;
  std::vector<double> std;
};

std::vector<std::pair<std::string, PooledCurve>> pool_curves(const std::vector<MetricsRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::tuple<std::vector<double>, std::vector<double>, double>> acc;
  for (const auto& r : records) {
    if (r.windows == 0) continue;
    if (acc.find(r.method) == acc.end()) order.push_back(r.method);
    auto& [sum, sq, n] = acc[r.method];
    sum.resize(r.step_mean.size(), 0.0);
    sq.resize(r.step_mean.size(), 0.0);
    const auto w = static_cast<double>(r.windows);
    for (std::size_t k = 0; k < r.step_mean.size(); ++k) {
      sum[k] += r.step_mean[k] * w;
      sq[k] += (r.step_std[k] * r.step_std[k] + r.step_mean[k] * r.step_mean[k]) * w;
    }
    n += w;
  }
  std::vector<std::pair<std::string, PooledCurve>> out;
  for (const auto& m : order) {
    const auto& [sum, sq, n] = acc[m];
    PooledCurve c;
    for (std::size_t k = 0; k < sum.size(); ++k) {
      const double mean = sum[k] / n;
      c.mean.push_back(mean);
      c.std.push_back(std::sqrt(std::max(0.0, sq[k] / n - mean * mean)));
    }
    out.emplace_back(m, std::move(c));
  }
  return out;
}

}  // namespace

std::string error_curve_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "timestep,mean,std,method\n";
  for (const auto& [method, c] : pool_curves(records)) {
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
      out += std::to_string(k + 1) + "," + fmt(c.mean[k]) + "," + fmt(c.std[k]) + "," + method + "\n";
    }
  }
  return out;
}

std::string error_curve_svg(const std::vector<MetricsRecord>& records) {
  const auto curves = pool_curves(records);
  constexpr double kW = 640, kH = 400, kL = 60, kR = 140, kT = 30, kB = 50;
  std::size_t steps = 1;
  double ymax = 1e-6;
  for (const auto& [m, c] : curves) {
    steps = std::max(steps, c.mean.size());
    for (std::size_t k = 0; k < c.mean.size(); ++k) ymax = std::max(ymax, c.mean[k] + c.std[k]);
  }
  auto px = [&](double k) { return kL + (kW - kL - kR) * (steps > 1 ? (k - 1) / static_cast<double>(steps - 1) : 0.5); };
  auto py = [&](double v) { return kT + (kH - kT - kB) * (1.0 - v / ymax); };
  std::ostringstream s;
  s.precision(5);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (kW - kR + kL) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">timestep</text>\n";
  s << "<text x=\"14\" y=\"" << (kH - kB + kT) / 2 << "\" transform=\"rotate(-90 14 " << (kH - kB + kT) / 2
    << ")\" text-anchor=\"middle\">position error [m]</text>\n";
  s << "<text x=\"" << kL - 6 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\">" << ymax << "</text>\n";
  s << "<text x=\"" << kL - 6 << "\" y=\"" << py(0) + 4 << "\" text-anchor=\"end\">0</text>\n";
  std::size_t ci = 0;
  for (const auto& [m, c] : curves) {
    const char* color = kPalette[ci % 5];
    std::ostringstream band;
    std::ostringstream line;
    for (std::size_t k = 0; k < c.mean.size(); ++k) band << px(k + 1.0) << ',' << py(c.mean[k] + c.std[k]) << ' ';
    for (std::size_t k = c.mean.size(); k-- > 0;) band << px(k + 1.0) << ',' << py(std::max(0.0, c.mean[k] - c.std[k])) << ' ';
    for (std::size_t k = 0; k < c.mean.size(); ++k) line << px(k + 1.0) << ',' << py(c.mean[k]) << ' ';
    s << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    s << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 20 * (ci + 1) << "\" fill=\"" << color << "\">" << m
      << "</text>\n";
    ++ci;
  }
  s << "</svg>\n";
  return s.str();
}

std::string learning_curve_svg(const std::vector<CurvePoint>& curve, std::string_view title) {
  constexpr double kW = 640, kH = 400, kL = 60, kR = 120, kT = 40, kB = 50;
  double ymax = 1e-6;
  for (const auto& c : curve) {
    ymax = std::max(ymax, c.train_loss);
    if (std::isfinite(c.val_loss)) ymax = std::max(ymax, c.val_loss);
  }
  const double n = std::max<double>(2.0, static_cast<double>(curve.size()));
  auto px = [&](double e) { return kL + (kW - kL - kR) * (e - 1.0) / (n - 1.0); };
  auto py = [&](double v) { return kT + (kH - kT - kB) * (1.0 - v / ymax); };
  std::ostringstream s;
  s.precision(5);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (kW - kR + kL) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">epoch</text>\n";
  s << "<text x=\"" << kL - 6 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\">" << ymax << "</text>\n";
  std::ostringstream train;
  std::ostringstream val;
  for (const auto& c : curve) {
    train << px(c.epoch) << ',' << py(c.train_loss) << ' ';
    if (std::isfinite(c.val_loss)) val << px(c.epoch) << ',' << py(c.val_loss) << ' ';
  }
  s << "<polyline points=\"" << train.str() << "\" fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"2\"/>\n";
  s << "<polyline points=\"" << val.str() << "\" fill=\"none\" stroke=\"" << kPalette[1] << "\" stroke-width=\"2\"/>\n";
  s << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 20 << "\" fill=\"" << kPalette[0] << "\">train</text>\n";
  s << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 40 << "\" fill=\"" << kPalette[1] << "\">validation</text>\n";
  s << "</svg>\n";
  return s.str();
}

LatencyReport summarize_latency(std::vector<double> samples_ms) {
  LatencyReport r;
  r.samples_ms = samples_ms;
  if (samples_ms.empty()) return r;
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  r.min_ms = samples_ms.front();
  r.median_ms = n % 2 == 1 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  r.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  r.paths_per_second = r.median_ms > 0.0 ? 1000.0 / r.median_ms : 0.0;
  return r;
}

LatencyReport latency_bench(const ModelParams& params, const SampleSequence& sample, int n_trials, int warmup,
                            int beam_width) {
  if (n_trials < 10) throw Error(ErrorCode::InvalidArgument, "latency bench needs at least 10 trials");
  using Clock = std::chrono::steady_clock;
  for (int k = 0; k < warmup; ++k) (void)predict(params, sample, {beam_width});
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(n_trials));
  for (int k = 0; k < n_trials; ++k) {
    const auto t0 = Clock::now();
    const PredictionResult r = predict(params, sample, {beam_width});
    const auto t1 = Clock::now();
    if (r.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty prediction");
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return summarize_latency(std::move(ms));
}

std::string latency_csv(const LatencyReport& report) {
  std::string out = "trials,min_ms,median_ms,p95_ms,paths_per_second\n";
  out += std::to_string(report.samples_ms.size()) + "," + fmt(report.min_ms) + "," + fmt(report.median_ms) + "," +
         fmt(report.p95_ms) + "," + fmt(report.paths_per_second) + "\n";
  return out;
}

}  // namespace octopath
