#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "octopath/geometry.hpp"
#include "octopath/kinematics.hpp"
#include "octopath/octree_map.hpp"

namespace octopath {

/// Constant (v_x, omega_z) command held for `duration` seconds.
struct Primitive {
  double v_x = 0.0;
  double omega_z = 0.0;
  double duration = 0.0;

  [[nodiscard]] double length() const { return std::abs(v_x) * duration; }
  [[nodiscard]] ControlSignal control() const { return {v_x, omega_z}; }
};

using PrimitiveSet = std::vector<Primitive>;

/// Forward arcs with curvatures evenly spaced over [-k_max, k_max], where k_max
/// is the tighter of the wheel-speed limit at v_x and `max_curvature`.
/// n_curvatures must be odd so the straight primitive is included.
[[nodiscard]] PrimitiveSet motion_primitives(const KinematicParams& params, double v_x, int n_curvatures,
                                             double duration,
                                             double max_curvature = std::numeric_limits<double>::infinity());

/// Per-cell cost-to-goal over the 8-connected grid (meters). Occupied and
/// unreachable cells hold +inf.
class CostField {
 public:
  CostField(const TriStateGrid& grid, std::vector<double> values)
      : origin_(grid.origin()), width_(grid.width()), height_(grid.height()), resolution_(grid.resolution()),
        values_(std::move(values)) {}

  [[nodiscard]] double at(int ix, int iy) const {
    return values_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)];
  }
  /// Value of the cell containing p; +inf outside the grid.
  [[nodiscard]] double at_point(Vec2 p) const;
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }

 private:
  Vec2 origin_;
  int width_;
  int height_;
  double resolution_;
  std::vector<double> values_;
};

/// Dijkstra from the goal cell; straight steps cost res, diagonal res*sqrt(2).
/// Throws InvalidGoal when the goal cell is Occupied or outside the grid.
[[nodiscard]] CostField holonomic_heuristic(const TriStateGrid& grid, Vec2 goal);

/// Disk footprint against Occupied cells. Anything outside the grid counts as
/// an obstacle.
class FootprintChecker {
 public:
  FootprintChecker(const TriStateGrid& grid, double radius);

  [[nodiscard]] bool collides(Vec2 p) const;
  [[nodiscard]] double radius() const { return radius_; }

 private:
  [[nodiscard]] bool blocked(int ix, int iy) const {
    return !grid_->in_bounds(ix, iy) || grid_->at(ix, iy) == CellState::Occupied;
  }

  const TriStateGrid* grid_;
  double radius_;
  int reach_;
  std::vector<std::uint8_t> clear_;  // 1: no blocked cell within reach of this cell
};

struct PlannerConfig {
  int theta_bins = 36;
  double goal_tolerance = -1.0;  // <= 0 selects 1.5 * grid resolution
  double footprint_radius = 0.4;
  double unknown_penalty = 1.5;  // cost per meter driven through Unknown cells
  std::size_t max_expansions = 2'000'000;
};

struct PlanPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double g = 0.0;
};

struct PlanResult {
  std::vector<PlanPose> poses;       // start first
  std::vector<Primitive> segments;   // segments[i] drives poses[i] -> poses[i + 1]
  double cost = 0.0;
  double length = 0.0;
  std::size_t expansions = 0;
};

/// Hybrid A* over (cell, heading bin) with one continuous state retained per
/// bin. f = g + max(euclidean, holonomic). Throws NoPath or InvalidGoal; a
/// start pose in collision is an InvalidArgument.
[[nodiscard]] PlanResult hybrid_astar(const TriStateGrid& grid, const Pose2& start, Vec2 goal,
                                      const PrimitiveSet& primitives, const PlannerConfig& config = {});

/// Position reached after driving arc length s along the plan (clamped to the ends).
[[nodiscard]] Pose2 pose_at_arc_length(const PlanResult& plan, double s);

/// Poses every `spacing` meters of arc (plus the final pose).
[[nodiscard]] std::vector<Pose2> sample_path(const PlanResult& plan, double spacing);

/// "x,y,theta,g" rows with a header line.
[[nodiscard]] std::string plan_to_csv(const PlanResult& plan);
void write_plan_csv(const std::string& path, const PlanResult& plan);

}  // namespace octopath
