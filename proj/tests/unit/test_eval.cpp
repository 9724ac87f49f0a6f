#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "octopath/error.hpp"
#include "octopath/eval.hpp"
#include "octopath/random.hpp"
#include "support/fixtures.hpp"

using namespace octopath;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidArgument;
}

// Straightforward restatement of the RMSE formula.
double rmse_reference(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    s += (a[k].x - b[k].x) * (a[k].x - b[k].x) + (a[k].y - b[k].y) * (a[k].y - b[k].y);
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::vector<SampleSequence> line_samples() {
  RouteParams p;
  p.length = 30.0;
  World w;
  w.bounds = {{-6, -6}, {36, 6}};
  w.static_obstacles.push_back(Circle{{12.0, 2.5}, 0.8});
  const auto log = collect_run(w, make_route(RouteKind::Line, p), KinematicParams{}, 0.2, 60);
  return build_samples(log, GridSpec{}, 4, 10);
}

int line_count(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Metrics, RmseExamples) {
  const std::vector<Vec2> gt{{0, 0}, {1, 1}, {2, 3}};
  EXPECT_EQ(rmse(gt, gt), 0.0);
  std::vector<Vec2> off = gt;
  for (auto& p : off) p = p + Vec2{3, 4};
  EXPECT_NEAR(rmse(off, gt), 5.0, 1e-12);
  EXPECT_NEAR(rmse(std::vector<Vec2>{{1, 0}, {0, 1}}, std::vector<Vec2>{{0, 0}, {0, 0}}), 1.0, 1e-15);
  EXPECT_EQ(code_of([&] { (void)rmse(gt, std::vector<Vec2>{{0, 0}}); }), ErrorCode::ShapeError);
}

TEST(Metrics, AxisErrorExamples) {
  const std::vector<Vec2> gt{{0, 0}, {1, 1}};
  const std::vector<Vec2> off{{1, 2}, {2, 3}};
  const auto a = axis_errors(off, gt);
  EXPECT_EQ(a.mean_ex, 1.0);
  EXPECT_EQ(a.max_ex, 1.0);
  EXPECT_EQ(a.mean_ey, 2.0);
  EXPECT_EQ(a.max_ey, 2.0);
  const auto z = axis_errors(gt, gt);
  EXPECT_EQ(z.mean_ex + z.max_ex + z.mean_ey + z.max_ey, 0.0);
  const auto one = axis_errors(std::vector<Vec2>{{-3, 0}}, std::vector<Vec2>{{0, 0}});
  EXPECT_EQ(one.mean_ex, 3.0);
  EXPECT_EQ(one.max_ex, 3.0);
  EXPECT_EQ(code_of([&] { (void)axis_errors(gt, std::vector<Vec2>{}); }), ErrorCode::ShapeError);
}

TEST(Metrics, SymmetryRigidInvarianceAndReference) {
  Rng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<Vec2> a;
    std::vector<Vec2> b;
    for (std::size_t k = 0; k < n; ++k) {
      a.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
      b.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
    }
    const double r = rmse(a, b);
    EXPECT_EQ(r, rmse(b, a));
    EXPECT_NEAR(r, rmse_reference(a, b), 1e-12);
    const Pose2 t{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3.2, 3.2)};
    std::vector<Vec2> ta;
    std::vector<Vec2> tb;
    for (std::size_t k = 0; k < n; ++k) {
      ta.push_back(to_global(t, a[k]));
      tb.push_back(to_global(t, b[k]));
    }
    EXPECT_NEAR(rmse(ta, tb), r, 1e-9);
    const auto ax = axis_errors(a, b);
    EXPECT_GE(ax.max_ex, ax.mean_ex);
    EXPECT_GE(ax.max_ey, ax.mean_ey);
    EXPECT_GE(ax.mean_ex, 0.0);
  }
}

TEST(Benchmark, OracleIsZeroAndShapes) {
  const auto samples = line_samples();
  ASSERT_FALSE(samples.empty());
  EvalScenario sc{"line", {}};
  for (const auto& s : samples) sc.samples.push_back(&s);
  const BenchmarkConfig cfg;
  const auto recs = run_benchmark({sc}, {Method::Oracle, Method::HybridAStar}, cfg);
  ASSERT_EQ(recs.size(), 2u);
  const auto& o = recs[0];
  EXPECT_EQ(o.method, "oracle");
  EXPECT_EQ(o.windows, samples.size());
  EXPECT_EQ(o.rmse + o.mean_ex + o.max_ex + o.mean_ey + o.max_ey, 0.0);
  ASSERT_EQ(o.step_mean.size(), 10u);
  for (double v : o.step_mean) EXPECT_EQ(v, 0.0);

  const auto& h = recs[1];
  EXPECT_EQ(h.method, "hybrid_astar");
  EXPECT_GT(h.rmse, 0.0);
  EXPECT_LT(h.rmse, 3.0);
  EXPECT_GE(h.max_ex, h.mean_ex);
  EXPECT_GE(h.max_ey, h.mean_ey);

  const std::string csv = report_csv(recs);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scenario,method,mean_ex,max_ex,mean_ey,max_ey,rmse");
  EXPECT_EQ(line_count(csv), 3);
  const std::string curve = error_curve_csv(recs);
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "timestep,mean,std,method");
  EXPECT_EQ(line_count(curve), 21);
  EXPECT_NE(error_curve_svg(recs).find("<svg"), std::string::npos);

  EXPECT_TRUE(run_benchmark({sc}, {}, cfg).empty());
  EXPECT_EQ(code_of([&] { (void)run_benchmark({sc}, {Method::Octopath}, cfg); }), ErrorCode::MissingArtifact);
  EXPECT_EQ(code_of([&] { (void)run_benchmark({sc}, {Method::Regression}, cfg); }), ErrorCode::MissingArtifact);
}

TEST(Benchmark, WindowGridLayout) {
  const auto samples = line_samples();
  const GridSpec g;
  const TriStateGrid grid = window_grid(samples.back(), g, 2.0);
  EXPECT_EQ(grid.width(), 50);
  EXPECT_EQ(grid.height(), 40);
  EXPECT_NEAR(grid.origin().x, -2.0, 1e-12);
  EXPECT_NEAR(grid.origin().y, -4.0, 1e-12);
  for (int i = 0; i < g.width; ++i) {
    for (int j = 0; j < g.height; ++j) {
      const auto v = samples.back().windows.back()[static_cast<std::size_t>(i * g.height + j)];
      const CellState want = v > 0 ? CellState::Occupied : (v < 0 ? CellState::Free : CellState::Unknown);
      ASSERT_EQ(grid.at(i + 10, j), want);
    }
  }
  for (int j = 0; j < g.height; ++j) EXPECT_EQ(grid.at(0, j), CellState::Unknown);
}

TEST(Methods, NamesRoundtrip) {
  for (Method m : {Method::Octopath, Method::Regression, Method::HybridAStar, Method::Oracle}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_EQ(code_of([] { (void)parse_method("rrt"); }), ErrorCode::ConfigError);
}

TEST(Latency, OrderStatistics) {
  ModelSpec s;
  s.grid = {6, 6, 0.2};
  s.hidden_dim = 8;
  s.embed_dim = 8;
  Rng rng(4);
  const auto sample = fixture::random_sample(s, rng);
  const auto rep = latency_bench(init_params(s, 1), sample, 100);
  ASSERT_EQ(rep.samples_ms.size(), 100u);
  EXPECT_LE(rep.min_ms, rep.median_ms);
  EXPECT_LE(rep.median_ms, rep.p95_ms);
  EXPECT_NEAR(rep.paths_per_second, 1000.0 / rep.median_ms, 1e-9);
  EXPECT_NE(latency_csv(rep).find("paths_per_second"), std::string::npos);
  EXPECT_EQ(code_of([&] { (void)latency_bench(init_params(s, 1), sample, 5); }), ErrorCode::InvalidArgument);

  const auto fixed = summarize_latency({5.0, 1.0, 3.0, 2.0, 4.0});
  EXPECT_EQ(fixed.min_ms, 1.0);
  EXPECT_EQ(fixed.median_ms, 3.0);
  EXPECT_EQ(fixed.p95_ms, 5.0);
}
