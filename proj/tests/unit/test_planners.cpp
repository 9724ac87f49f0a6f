#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "octopath/error.hpp"
#include "octopath/planners.hpp"
#include "octopath/random.hpp"
#include "support/oracles.hpp"

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

PrimitiveSet default_prims() { return motion_primitives(KinematicParams{}, 1.0, 5, 0.4, 1.0); }

TriStateGrid free_grid() { return TriStateGrid({0.0, 0.0}, 100, 100, 0.2, CellState::Free); }

void wall(TriStateGrid& g, int ix0, int ix1, int iy0, int iy1) {
  for (int iy = iy0; iy <= iy1; ++iy) {
    for (int ix = ix0; ix <= ix1; ++ix) g.set(ix, iy, CellState::Occupied);
  }
}

void expect_consistent(const PlanResult& plan, const TriStateGrid& grid, double radius) {
  ASSERT_EQ(plan.segments.size() + 1, plan.poses.size());
  EXPECT_FALSE(oracle::brute_force_collides(grid, {plan.poses[0].x, plan.poses[0].y}, radius));
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const auto& a = plan.poses[i];
    const auto& seg = plan.segments[i];
    EgoState s;
    s.x = a.x;
    s.y = a.y;
    s.theta = a.theta;
    const EgoState e = step_exact(s, seg.control(), seg.duration);
    EXPECT_NEAR(e.x, plan.poses[i + 1].x, 1e-9);
    EXPECT_NEAR(e.y, plan.poses[i + 1].y, 1e-9);
    EXPECT_NEAR(angle_diff(e.theta, plan.poses[i + 1].theta), 0.0, 1e-9);
    const int n = std::max(1, static_cast<int>(std::ceil(seg.length() / (0.5 * grid.resolution()))));
    for (int k = 1; k <= n; ++k) {
      const EgoState m = step_exact(s, seg.control(), seg.duration * k / n);
      EXPECT_FALSE(oracle::brute_force_collides(grid, m.position(), radius)) << m.x << ' ' << m.y;
    }
  }
}

}  // namespace

TEST(Primitives, Construction) {
  const KinematicParams kp;
  const auto three = motion_primitives(kp, 1.0, 3, 0.5);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_NEAR(three[0].omega_z, -three[2].omega_z, 1e-15);
  EXPECT_EQ(three[1].omega_z, 0.0);
  EXPECT_LT(three[0].omega_z, 0.0);
  for (const auto& p : motion_primitives(kp, 1.0, 7, 0.5)) {
    EXPECT_NO_THROW((void)body_to_wheel(p.control(), kp));
    EXPECT_EQ(p.v_x, 1.0);
  }
  const auto capped = motion_primitives(kp, 1.0, 3, 0.5, 0.25);
  EXPECT_NEAR(capped[2].omega_z, 0.25, 1e-15);

  EgoState s;
  s.x = 1.0;
  s.y = 2.0;
  s.theta = 0.6;
  const EgoState e = step_exact(s, three[1].control(), three[1].duration);
  EXPECT_NEAR(e.x, 1.0 + 0.5 * std::cos(0.6), 1e-12);
  EXPECT_NEAR(e.y, 2.0 + 0.5 * std::sin(0.6), 1e-12);

  EXPECT_EQ(code_of([&] { (void)motion_primitives(kp, 1.0, 4, 0.5); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { (void)motion_primitives(kp, 100.0, 3, 0.5); }), ErrorCode::WheelSpeedExceeded);
}

TEST(Heuristic, OctileOnEmptyGrid) {
  const TriStateGrid g({0.0, 0.0}, 30, 20, 0.2, CellState::Free);
  const Vec2 goal = g.center_of(7, 11);
  const CostField f = holonomic_heuristic(g, goal);
  for (int iy = 0; iy < 20; ++iy) {
    for (int ix = 0; ix < 30; ++ix) {
      const int dx = std::abs(ix - 7);
      const int dy = std::abs(iy - 11);
      const double octile = 0.2 * (std::max(dx, dy) + (std::numbers::sqrt2 - 1.0) * std::min(dx, dy));
      EXPECT_NEAR(f.at(ix, iy), octile, 1e-9);
    }
  }
  EXPECT_EQ(f.at(7, 11), 0.0);
  EXPECT_TRUE(std::isinf(f.at_point({-1.0, 0.0})));
}

TEST(Heuristic, WallForcesDetour) {
  TriStateGrid g({0.0, 0.0}, 30, 30, 0.2, CellState::Free);
  wall(g, 15, 15, 0, 25);
  const Vec2 goal = g.center_of(20, 5);
  const CostField f = holonomic_heuristic(g, goal);
  EXPECT_GT(f.at(10, 5), norm(g.center_of(10, 5) - goal) + 1.0);
  EXPECT_TRUE(std::isinf(f.at(15, 3)));
  EXPECT_EQ(code_of([&] { (void)holonomic_heuristic(g, g.center_of(15, 3)); }), ErrorCode::InvalidGoal);
  EXPECT_EQ(code_of([&] { (void)holonomic_heuristic(g, {-3.0, 1.0}); }), ErrorCode::InvalidGoal);
}

TEST(Footprint, MatchesBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    TriStateGrid g({-1.0, 2.0}, 40, 30, 0.2, CellState::Free);
    for (int k = 0; k < 60; ++k) {
      g.set(static_cast<int>(rng.index(40)), static_cast<int>(rng.index(30)),
            rng.uniform() < 0.5 ? CellState::Occupied : CellState::Unknown);
    }
    const double r = rng.uniform(0.1, 0.7);
    const FootprintChecker fc(g, r);
    for (int k = 0; k < 500; ++k) {
      const Vec2 p{rng.uniform(-1.5, 7.5), rng.uniform(1.5, 8.5)};
      ASSERT_EQ(fc.collides(p), oracle::brute_force_collides(g, p, r)) << p.x << ' ' << p.y << ' ' << r;
    }
  }
}

TEST(HybridAStar, EmptyGridStraightRun) {
  const TriStateGrid g = free_grid();
  const auto plan = hybrid_astar(g, {1.0, 1.0, 0.0}, {17.0, 1.0}, default_prims());
  EXPECT_GE(plan.length, 16.0 - 0.3);
  EXPECT_LE(plan.length, 16.5);
  EXPECT_NEAR(plan.cost, plan.length, 1e-9);
  EXPECT_LE(norm(Vec2{plan.poses.back().x, plan.poses.back().y} - Vec2{17.0, 1.0}), 0.3 + 1e-12);
  const auto oracle_cost = oracle::lattice_dijkstra(g, {1.0, 1.0, 0.0}, {17.0, 1.0}, default_prims(), PlannerConfig{});
  ASSERT_TRUE(oracle_cost.has_value());
  EXPECT_LE(plan.cost, *oracle_cost * 1.05);
  expect_consistent(plan, g, PlannerConfig{}.footprint_radius);
}

TEST(HybridAStar, FullWallIsNoPath) {
  TriStateGrid g = free_grid();
  wall(g, 50, 51, 0, 99);
  EXPECT_FALSE(oracle::grid_connected(g, {2.0, 10.0}, {18.0, 10.0}, 0.4));
  EXPECT_EQ(code_of([&] { (void)hybrid_astar(g, {2.0, 10.0, 0.0}, {18.0, 10.0}, default_prims()); }),
            ErrorCode::NoPath);
  EXPECT_EQ(code_of([&] { (void)hybrid_astar(g, {2.0, 10.0, 0.0}, {10.1, 10.0}, default_prims()); }),
            ErrorCode::InvalidGoal);
  EXPECT_EQ(code_of([&] { (void)hybrid_astar(g, {0.1, 10.0, 0.0}, {5.0, 10.0}, default_prims()); }),
            ErrorCode::InvalidArgument);
}

TEST(HybridAStar, WallWithGap) {
  TriStateGrid g = free_grid();
  wall(g, 50, 51, 0, 79);
  const Pose2 start{2.0, 4.0, 0.0};
  const Vec2 goal{18.0, 4.0};
  const auto plan = hybrid_astar(g, start, goal, default_prims());
  EXPECT_GE(plan.length, norm(goal - start.position()) - 0.3);
  double max_y = 0.0;
  for (const auto& p : plan.poses) max_y = std::max(max_y, p.y);
  EXPECT_GT(max_y, 16.0);
  expect_consistent(plan, g, PlannerConfig{}.footprint_radius);
}

TEST(HybridAStar, UnknownCellsArePenalized) {
  TriStateGrid g = free_grid();
  for (int iy = 0; iy < 100; ++iy) {
    for (int ix = 0; ix < 100; ++ix) g.set(ix, iy, CellState::Unknown);
  }
  const auto plan = hybrid_astar(g, {1.0, 1.0, 0.0}, {17.0, 1.0}, default_prims());
  EXPECT_NEAR(plan.cost, 1.5 * plan.length, 1e-9);
}

TEST(HybridAStar, ObstacleFreeNearEuclidean) {
  Rng rng(8);
  const TriStateGrid g = free_grid();
  for (int k = 0; k < 30; ++k) {
    const Vec2 s{rng.uniform(1, 19), rng.uniform(1, 19)};
    const Vec2 t{rng.uniform(1, 19), rng.uniform(1, 19)};
    if (norm(t - s) < 3.0) continue;
    const Pose2 start{s.x, s.y, std::atan2(t.y - s.y, t.x - s.x)};
    const auto plan = hybrid_astar(g, start, t, default_prims());
    EXPECT_LE(plan.cost, 1.05 * norm(t - s));
    EXPECT_GE(plan.cost, norm(t - s) - 0.3);
    expect_consistent(plan, g, PlannerConfig{}.footprint_radius);
  }
}

TEST(HybridAStar, RandomMapsAgainstOracles) {
  const PlannerConfig cfg;
  const auto prims = default_prims();
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto c = oracle::random_planning_case(seed, 8, cfg.footprint_radius);
    const auto oracle_cost = oracle::lattice_dijkstra(c.grid, c.start, c.goal, prims, cfg);
    try {
      const auto plan = hybrid_astar(c.grid, c.start, c.goal, prims, cfg);
      expect_consistent(plan, c.grid, cfg.footprint_radius);
      EXPECT_GE(plan.cost, norm(c.goal - c.start.position()) - 1.5 * c.grid.resolution());
      if (oracle_cost) EXPECT_LE(plan.cost, *oracle_cost * 1.05) << seed;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NoPath);
      EXPECT_FALSE(oracle_cost.has_value()) << seed;
    }
  }
}

TEST(HybridAStar, Deterministic) {
  auto c = oracle::random_planning_case(2, 3, 0.4);
  for (std::uint64_t seed = 3; !oracle::lattice_dijkstra(c.grid, c.start, c.goal, default_prims(), PlannerConfig{}); ++seed) {
    c = oracle::random_planning_case(seed, 3, 0.4);
  }
  const auto a = hybrid_astar(c.grid, c.start, c.goal, default_prims());
  const auto b = hybrid_astar(c.grid, c.start, c.goal, default_prims());
  EXPECT_EQ(plan_to_csv(a), plan_to_csv(b));
  EXPECT_EQ(a.expansions, b.expansions);
  EXPECT_EQ(plan_to_csv(a).substr(0, 11), "x,y,theta,g");
}

TEST(PlanSampling, ArcLength) {
  const auto plan = hybrid_astar(free_grid(), {1.0, 1.0, 0.0}, {9.0, 1.0}, default_prims());
  const Pose2 mid = pose_at_arc_length(plan, 3.0);
  EXPECT_NEAR(mid.x, 4.0, 1e-9);
  EXPECT_NEAR(mid.y, 1.0, 1e-9);
  const Pose2 end = pose_at_arc_length(plan, 1e9);
  EXPECT_EQ(end.x, plan.poses.back().x);
  const auto pts = sample_path(plan, 0.5);
  ASSERT_GE(pts.size(), 2u);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LE(norm(pts[i].position() - pts[i - 1].position()), 0.5 + 1e-9);
  EXPECT_EQ(pts.back().x, plan.poses.back().x);
  EXPECT_EQ(code_of([&] { (void)sample_path(plan, 0.0); }), ErrorCode::InvalidArgument);
}
