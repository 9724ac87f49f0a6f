#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "octopath/dataset.hpp"
#include "octopath/error.hpp"

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

DriveLog line_log(double dt, std::uint32_t ticks, int run_id = 0) {
  RouteParams p;
  p.length = 60.0;
  const auto route = make_route(RouteKind::Line, p);
  World w;
  w.bounds = {{-10, -10}, {70, 10}};
  w.static_obstacles.push_back(Circle{{16.0, 2.5}, 0.8});
  return collect_run(w, route, KinematicParams{}, dt, ticks, TeacherConfig{}, run_id);
}

DriveLog circle_log(double dt, std::uint32_t ticks) {
  RouteParams p;
  p.radius = 2.0;
  p.spacing = 0.2;
  p.loops = 2.0;
  const auto route = make_route(RouteKind::Circle, p);
  World w;
  w.bounds = {{-8, -6}, {8, 10}};
  return collect_run(w, route, KinematicParams{}, dt, ticks);
}

bool in_window(Vec2 ego, const GridSpec& g) {
  return ego.x >= 0.0 && ego.x < g.width * g.resolution && ego.y >= -g.height * g.resolution / 2 &&
         ego.y < g.height * g.resolution / 2;
}

}  // namespace

TEST(CellOfPosition, Examples) {
  const GridSpec g;
  EXPECT_EQ(cell_of_position({0.1, 0.1}, {0, 0, 0}, g), 20u);
  EXPECT_EQ(cell_of_position({0.2, 0.1}, {0, 0, 0}, g), 60u);
  EXPECT_EQ(code_of([&] { (void)cell_of_position({-0.1, 0.0}, {0, 0, 0}, g); }), ErrorCode::LabelOutOfWindow);
  EXPECT_EQ(code_of([&] { (void)cell_of_position({1.0, 4.0}, {0, 0, 0}, g); }), ErrorCode::LabelOutOfWindow);
  const Vec2 c = position_of_cell(20, {0, 0, 0}, g);
  EXPECT_NEAR(c.x, 0.1, 1e-12);
  EXPECT_NEAR(c.y, 0.1, 1e-12);
  EXPECT_EQ(code_of([&] { (void)position_of_cell(1600, {0, 0, 0}, g); }), ErrorCode::InvalidClass);
}

TEST(CellOfPosition, RoundtripWithinHalfDiagonal) {
  const GridSpec g;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double bound = g.resolution * std::numbers::sqrt2 / 2 + 1e-12;
  for (int n = 0; n < 100000; ++n) {
    const Pose2 anchor{20 * u(rng) - 10, 20 * u(rng) - 10, 2 * std::numbers::pi * u(rng) - std::numbers::pi};
    const Vec2 ego{7.99 * u(rng), 7.99 * u(rng) - 3.995};
    const Vec2 p = to_global(anchor, ego);
    const auto cls = cell_of_position(p, anchor, g);
    ASSERT_LT(cls, 1600u);
    ASSERT_LE(norm(position_of_cell(cls, anchor, g) - p), bound);
  }
}

TEST(BuildSamples, CountsAndAccounting) {
  const DriveLog log = line_log(0.1, 100);
  ASSERT_EQ(log.records.size(), 100u);
  BuildStats stats;
  const auto samples = build_samples(log, GridSpec{}, 4, 10, {}, &stats);
  EXPECT_EQ(stats.candidates, 86u);
  EXPECT_EQ(stats.kept + stats.dropped, 86u);
  EXPECT_EQ(samples.size(), stats.kept);
  EXPECT_LE(samples.size(), 86u);
  for (const auto& s : samples) {
    EXPECT_EQ(s.windows.size(), 5u);
    EXPECT_EQ(s.windows.front().size(), 1600u);
    EXPECT_EQ(s.ref_window.size(), 15u);
    EXPECT_EQ(s.labels.size(), 10u);
    for (const auto& w : s.windows) {
      for (auto v : w) ASSERT_TRUE(v == -1 || v == 0 || v == 1);
    }
  }
}

TEST(BuildSamples, DroppedCountMatchesGeometry) {
  const DriveLog log = circle_log(0.4, 60);
  const GridSpec g{10, 10, 0.2};
  const int ti = 2;
  const int to = 5;
  BuildStats stats;
  const auto samples = build_samples(log, g, ti, to, {}, &stats);
  std::size_t expected_drop = 0;
  for (std::size_t t = ti; t + to < log.records.size(); ++t) {
    const Pose2 anchor = log.records[t].state.pose();
    bool ok = true;
    for (int k = 1; k <= to; ++k) ok = ok && in_window(to_ego(anchor, log.records[t + k].state.position()), g);
    expected_drop += ok ? 0 : 1;
  }
  EXPECT_GT(expected_drop, 0u);
  EXPECT_EQ(stats.dropped, expected_drop);
  EXPECT_EQ(stats.kept, samples.size());
  EXPECT_EQ(stats.kept + stats.dropped, log.records.size() - ti - to);
}

TEST(BuildSamples, StraightLogLabelsMoveForward) {
  const DriveLog log = line_log(0.25, 60);
  const GridSpec g;
  const auto samples = build_samples(log, g, 4, 10);
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) {
    for (std::size_t k = 1; k < s.labels.size(); ++k) {
      EXPECT_GT(s.labels[k] / static_cast<std::uint32_t>(g.height), s.labels[k - 1] / static_cast<std::uint32_t>(g.height));
    }
  }
}

TEST(BuildSamples, LabelsDecodeNearTruth) {
  const DriveLog log = circle_log(0.2, 80);
  const GridSpec g;
  const auto samples = build_samples(log, g, 4, 10);
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < s.labels.size(); ++k) {
      const Vec2 truth = log.records[s.tick + k + 1].state.position();
      EXPECT_LE(norm(position_of_cell(s.labels[k], s.anchor, g) - truth), g.resolution * std::numbers::sqrt2 / 2 + 1e-9);
      EXPECT_NEAR(norm(to_global(s.anchor, s.future[k]) - truth), 0.0, 1e-9);
    }
  }
}

TEST(BuildSamples, ShortLogRejected) {
  const DriveLog log = line_log(0.1, 10);
  EXPECT_EQ(code_of([&] { (void)build_samples(log, GridSpec{}, 4, 10); }), ErrorCode::InsufficientLog);
}

TEST(BuildSamples, WindowsSeeObstacles) {
  const DriveLog log = line_log(0.1, 120);
  const auto samples = build_samples(log, GridSpec{}, 4, 10);
  int occupied = 0;
  int free_cells = 0;
  for (auto v : samples.back().windows.back()) {
    occupied += v == 1;
    free_cells += v == -1;
  }
  EXPECT_GT(occupied, 0);
  EXPECT_GT(free_cells, 100);
}

namespace {

std::vector<SampleSequence> synthetic(int runs, int per_run) {
  std::vector<SampleSequence> out;
  for (int r = 0; r < runs; ++r) {
    for (int k = 0; k < per_run; ++k) {
      SampleSequence s;
      s.run_id = r;
      s.tick = static_cast<std::uint32_t>(k);
      s.windows.assign(2, std::vector<std::int8_t>(4, static_cast<std::int8_t>((r + k) % 3 - 1)));
      s.ref_window.assign(4, Vec2{0.1 * k, -0.2 * r});
      s.labels = {static_cast<std::uint32_t>(k % 4), static_cast<std::uint32_t>(r % 4)};
      s.future = {{0.1, 0.2}, {0.3, 0.4}};
      s.anchor = {1.0 * r, 2.0 * k, 0.3};
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST(SplitDataset, RunLevelRatios) {
  const GridSpec g{2, 2, 0.2};
  const Dataset ds = split_dataset(synthetic(10, 10), g, 1, 2, {}, 42);
  std::map<Split, std::set<int>> runs;
  std::map<int, std::set<Split>> splits_of_run;
  for (const auto& s : ds.samples) {
    runs[s.split].insert(s.run_id);
    splits_of_run[s.run_id].insert(s.split);
  }
  EXPECT_EQ(runs[Split::Train].size(), 8u);
  EXPECT_EQ(runs[Split::Validation].size(), 1u);
  EXPECT_EQ(runs[Split::Test].size(), 1u);
  for (const auto& [run, sp] : splits_of_run) EXPECT_EQ(sp.size(), 1u) << run;
  EXPECT_EQ(ds.count(Split::Train), 80u);

  const Dataset again = split_dataset(synthetic(10, 10), g, 1, 2, {}, 42);
  EXPECT_EQ(again, ds);
  EXPECT_EQ(code_of([&] { (void)split_dataset(synthetic(2, 5), g, 1, 2, {}, 1); }), ErrorCode::InsufficientRuns);
}

TEST(DatasetIo, RoundtripAndCorruption) {
  const GridSpec g{2, 2, 0.2};
  const Dataset ds = split_dataset(synthetic(5, 7), g, 1, 2, {}, 3);
  const auto bytes = serialize_dataset(ds);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "OPD1");
  EXPECT_EQ(deserialize_dataset(bytes), ds);
  EXPECT_EQ(serialize_dataset(deserialize_dataset(bytes)), bytes);
  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  EXPECT_EQ(code_of([&] { (void)deserialize_dataset(cut); }), ErrorCode::FormatError);

  const std::string path = testing::TempDir() + "/ds.opd";
  save_dataset(path, ds);
  EXPECT_EQ(load_dataset(path), ds);
  EXPECT_EQ(code_of([&] { (void)load_dataset(path + ".missing"); }), ErrorCode::IoError);
}
