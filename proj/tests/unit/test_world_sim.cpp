#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "octopath/error.hpp"
#include "octopath/random.hpp"
#include "octopath/world_sim.hpp"

using namespace octopath;

namespace {

World open_world(Vec2 lo, Vec2 hi) {
  World w;
  w.bounds = {lo, hi};
  return w;
}

double cross_z(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - b); }

}  // namespace

TEST(Route, LineCount) {
  RouteParams p;
  p.length = 10.0;
  p.spacing = 0.5;
  const auto r = make_route(RouteKind::Line, p);
  EXPECT_EQ(r.points.size(), 21u);
  EXPECT_DOUBLE_EQ(r.spacing, 0.5);
}

TEST(Route, CircleRadius) {
  RouteParams p;
  p.radius = 5.0;
  p.spacing = 2.0 * std::numbers::pi * 5.0 / 100.0;
  const auto r = make_route(RouteKind::Circle, p);
  ASSERT_EQ(r.points.size(), 100u);
  const Vec2 center{0.0, 5.0};
  for (const auto& q : r.points) EXPECT_NEAR(norm(q - center), 5.0, 1e-9);
}

TEST(Route, SCurveFlipsCurvatureOnce) {
  RouteParams p;
  p.radius = 3.0;
  p.radius2 = 3.0;
  p.spacing = 0.2;
  const auto r = make_route(RouteKind::SCurve, p);
  int flips = 0;
  double prev = 0.0;
  for (std::size_t i = 1; i + 1 < r.points.size(); ++i) {
    const double k = cross_z(r.points[i - 1], r.points[i], r.points[i + 1]);
    if (std::abs(k) < 1e-12) continue;
    if (prev != 0.0 && (k > 0) != (prev > 0)) ++flips;
    prev = k;
  }
  EXPECT_EQ(flips, 1);
}

TEST(Route, SpacingInvariant) {
  for (auto kind : {RouteKind::Line, RouteKind::SCurve, RouteKind::Circle}) {
    RouteParams p;
    const auto r = make_route(kind, p);
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      const double d = norm(r.points[i] - r.points[i - 1]);
      EXPECT_GE(d, 0.5 * r.spacing);
      EXPECT_LE(d, 2.0 * r.spacing);
    }
  }
}

TEST(Route, InvalidParams) {
  RouteParams p;
  p.radius = -1.0;
  EXPECT_THROW((void)make_route(RouteKind::Circle, p), Error);
  p = {};
  p.spacing = 0.0;
  EXPECT_THROW((void)make_route(RouteKind::Line, p), Error);
  EXPECT_EQ(parse_route_kind("s_curve"), RouteKind::SCurve);
  EXPECT_THROW((void)parse_route_kind("zigzag"), Error);
}

TEST(Lidar, CircleRange) {
  World w = open_world({-30, -30}, {30, 30});
  w.static_obstacles.push_back(Circle{{5.0, 0.0}, 1.0});
  const auto scan = lidar_scan(w, {0, 0, 0}, 360, 20.0);
  EXPECT_NEAR(scan.ranges[0], 4.0, 1e-12);
  EXPECT_EQ(scan.hits[0], 1);
  EXPECT_EQ(scan.endpoints[0].z, 0.0);
}

TEST(Lidar, NoHitBeam) {
  World w = open_world({-30, -30}, {30, 30});
  const auto scan = lidar_scan(w, {0, 0, 0}, 8, 20.0);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(scan.hits[k], 0);
    EXPECT_DOUBLE_EQ(scan.ranges[k], 20.0);
  }
}

TEST(Lidar, RotationShiftsBeams) {
  World w = open_world({-12, -9}, {14, 11});
  w.static_obstacles.push_back(Circle{{5.0, 1.0}, 1.0});
  w.static_obstacles.push_back(Rect{{-4.0, -3.0}, {-2.0, 4.0}});
  const int n = 360;
  const double dtheta = 2.0 * std::numbers::pi / n;
  const auto a = lidar_scan(w, {0.3, 0.2, 0.0}, n, 20.0);
  const int shift = 37;
  const auto b = lidar_scan(w, {0.3, 0.2, shift * dtheta}, n, 20.0);
  for (int k = 0; k < n; ++k) {
    EXPECT_NEAR(b.ranges[static_cast<std::size_t>(k)], a.ranges[static_cast<std::size_t>((k + shift) % n)], 1e-9);
  }
}

TEST(StepWorld, MotionAndReflection) {
  World w = open_world({0, 0}, {10, 10});
  w.dynamic_obstacles.push_back({Circle{{5.0, 5.0}, 0.3}, {1.0, 0.0}});
  const World n = step_world(w, 0.1);
  EXPECT_NEAR(std::get<Circle>(n.dynamic_obstacles[0].shape).center.x, 5.1, 1e-12);

  World edge = open_world({0, 0}, {10, 10});
  edge.dynamic_obstacles.push_back({Circle{{9.65, 5.0}, 0.3}, {1.0, 0.0}});
  const World e = step_world(edge, 0.1);
  EXPECT_LT(e.dynamic_obstacles[0].velocity.x, 0.0);

  World st = open_world({0, 0}, {10, 10});
  st.static_obstacles.push_back(Circle{{2, 2}, 1});
  const World s = step_world(st, 0.5);
  ASSERT_EQ(s.static_obstacles.size(), 1u);
  EXPECT_EQ(std::get<Circle>(s.static_obstacles[0]).center, (Vec2{2, 2}));
  EXPECT_TRUE(s.dynamic_obstacles.empty());
}

TEST(CollectRun, ObstacleFreeLineTracksRoute) {
  RouteParams p;
  p.length = 15.0;
  const auto route = make_route(RouteKind::Line, p);
  const World w = open_world({-6, -6}, {21, 6});
  const auto log = collect_run(w, route, KinematicParams{}, 0.1, 400);
  EXPECT_FALSE(log.aborted);
  ASSERT_GT(log.records.size(), 100u);
  for (const auto& r : log.records) EXPECT_LT(std::abs(r.state.y), 0.1);
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    EXPECT_NEAR(log.records[i].t - log.records[i - 1].t, 0.1, 1e-12);
  }
}

TEST(CollectRun, WallWithGapIsAvoided) {
  RouteParams p;
  p.length = 16.0;
  const auto route = make_route(RouteKind::Line, p);
  World w = open_world({-4, -8}, {20, 8});
  w.static_obstacles.push_back(Rect{{7.0, -8.0}, {7.6, 1.0}});  // gap above y = 1
  const auto log = collect_run(w, route, KinematicParams{}, 0.1, 600);
  EXPECT_FALSE(log.aborted) << log.abort_reason;
  double max_y = 0.0;
  for (const auto& r : log.records) {
    EXPECT_FALSE(footprint_collides(w, r.state.position(), TeacherConfig{}.footprint_radius));
    max_y = std::max(max_y, r.state.y);
  }
  EXPECT_GT(max_y, 1.0);
  EXPECT_GT(log.records.back().state.x, 12.0);
}

TEST(CollectRun, ZeroTicksAndStartInCollision) {
  RouteParams p;
  const auto route = make_route(RouteKind::Line, p);
  World w = open_world({-6, -6}, {36, 6});
  EXPECT_TRUE(collect_run(w, route, KinematicParams{}, 0.1, 0).records.empty());
  w.static_obstacles.push_back(Circle{{0.0, 0.0}, 0.5});
  try {
    (void)collect_run(w, route, KinematicParams{}, 0.1, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidScenario);
  }
}

TEST(CollectRun, ScenarioLogsAreConsistent) {
  ScenarioConfig cfg;
  for (RouteKind kind : {RouteKind::Line, RouteKind::SCurve, RouteKind::Circle}) {
    cfg.kind = kind;
    const Scenario sc = make_scenario(cfg, derive_seed(5, "scenario"), 3);
    const auto a = collect_run(sc.world, sc.route, KinematicParams{}, 0.1, 200, TeacherConfig{}, 3);
    const auto b = collect_run(sc.world, sc.route, KinematicParams{}, 0.1, 200, TeacherConfig{}, 3);
    EXPECT_EQ(drive_log_to_jsonl(a), drive_log_to_jsonl(b));

    // Replay the world and re-raycast at every logged pose.
    World w = sc.world;
    const TeacherConfig t;
    for (const auto& r : a.records) {
      const auto scan = lidar_scan(w, r.state.pose(), t.n_beams, t.max_range);
      ASSERT_EQ(scan.endpoints.size(), r.scan.endpoints.size());
      for (std::size_t k = 0; k < scan.endpoints.size(); ++k) {
        ASSERT_EQ(scan.endpoints[k].x, r.scan.endpoints[k].x);
        ASSERT_EQ(scan.endpoints[k].y, r.scan.endpoints[k].y);
      }
      if (!a.aborted || &r != &a.records.back()) {
        EXPECT_FALSE(footprint_collides(w, r.state.position(), t.footprint_radius));
      }
      w = step_world(w, a.dt);
    }
  }
}

TEST(DriveLogIo, JsonlRoundtrip) {
  ScenarioConfig cfg;
  cfg.kind = RouteKind::SCurve;
  const Scenario sc = make_scenario(cfg, 77, 1);
  const auto log = collect_run(sc.world, sc.route, KinematicParams{}, 0.1, 40, TeacherConfig{}, 1);
  const std::string text = drive_log_to_jsonl(log);
  const DriveLog back = drive_log_from_jsonl(text);
  EXPECT_EQ(drive_log_to_jsonl(back), text);
  ASSERT_EQ(back.records.size(), log.records.size());
  EXPECT_EQ(back.records[7].state, log.records[7].state);
  EXPECT_THROW((void)drive_log_from_jsonl("{not json"), Error);
}
