#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "octopath/geometry.hpp"
#include "octopath/kinematics.hpp"
#include "octopath/octree_map.hpp"
#include "octopath/planners.hpp"

namespace octopath {

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

struct Rect {
  Vec2 min;
  Vec2 max;
};

using Shape = std::variant<Circle, Rect>;

struct DynamicObstacle {
  Shape shape;
  Vec2 velocity;
};

struct Bounds {
  Vec2 min;
  Vec2 max;
  [[nodiscard]] bool contains(Vec2 p) const { return p.x >= min.x && p.y >= min.y && p.x <= max.x && p.y <= max.y; }
};

struct World {
  Bounds bounds;
  std::vector<Shape> static_obstacles;
  std::vector<DynamicObstacle> dynamic_obstacles;
  std::uint64_t rng_seed = 0;
  double time = 0.0;
};

enum class RouteKind { Line, SCurve, Circle, Waypoints };

[[nodiscard]] std::string_view to_string(RouteKind kind);
/// Accepts "line", "s_curve", "circle", "waypoints".
[[nodiscard]] RouteKind parse_route_kind(std::string_view name);

struct RouteParams {
  Vec2 start;
  double heading = 0.0;
  double spacing = 0.3;
  double length = 30.0;                       // line
  double radius = 6.0;                        // circle, first s-curve arc
  double radius2 = 6.0;                       // second s-curve arc
  double sweep = 1.5707963267948966;          // per s-curve arc [rad]
  double loops = 1.0;                         // circle
  std::vector<Vec2> waypoints;
};

struct ReferencePath {
  std::vector<Vec2> points;
  double spacing = 0.0;
  int id = 0;
  RouteKind kind = RouteKind::Line;
};

/// Evenly spaced route; s-curves are two tangent arcs of opposite curvature.
/// Throws InvalidGeometry for degenerate parameters.
[[nodiscard]] ReferencePath make_route(RouteKind kind, const RouteParams& params);

/// Arc-length resampling of a polyline at (approximately) `spacing`.
[[nodiscard]] std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, double spacing);

struct LidarScan {
  std::vector<Vec3> endpoints;   // global frame, z = 0
  std::vector<std::uint8_t> hits;
  std::vector<double> ranges;
};

/// Distance along `dir` (unit) to the nearest obstacle or world boundary; +inf if none.
[[nodiscard]] double ray_cast(const World& world, Vec2 origin, Vec2 dir);

/// n_beams rays over 360 degrees starting at the sensor heading. Beams with
/// nothing inside max_range are flagged as misses with the endpoint at max_range.
[[nodiscard]] LidarScan lidar_scan(const World& world, const Pose2& pose, int n_beams, double max_range);

/// Advances dynamic obstacles; a velocity component flips when the shape
/// touches the corresponding boundary.
[[nodiscard]] World step_world(const World& world, double dt);

[[nodiscard]] bool footprint_collides(const World& world, Vec2 p, double radius);

/// Grid over the world bounds: Free everywhere, Occupied where a cell overlaps
/// an obstacle (static and dynamic at the current time).
[[nodiscard]] TriStateGrid rasterize(const World& world, double resolution);

struct TeacherConfig {
  double cruise_speed = 1.0;
  double pursuit_lookahead = 1.0;  // pure-pursuit lookahead [m]
  double plan_horizon = 6.0;       // route arc length to the planning goal [m]
  int replan_every = 5;            // ticks
  double footprint_radius = 0.4;
  double clearance = 0.15;         // extra planning margin around the footprint
  double grid_resolution = 0.2;
  int n_beams = 360;
  double max_range = 20.0;
  int n_curvatures = 5;
  double primitive_length = 0.6;
  double max_curvature = 1.0;
};

struct LogRecord {
  std::uint32_t tick = 0;
  double t = 0.0;
  EgoState state;
  WheelSpeeds wheels;
  LidarScan scan;
  int route_id = 0;
};

struct DriveLog {
  int run_id = 0;
  double dt = 0.1;
  ReferencePath route;
  std::vector<LogRecord> records;
  bool aborted = false;
  std::string abort_reason;
};

/// Drives the route with a hybrid-A*-plus-pure-pursuit teacher and logs state
/// and scan every tick. Collisions end the run early with `aborted` set; a
/// start pose in collision throws InvalidScenario.
[[nodiscard]] DriveLog collect_run(const World& world, const ReferencePath& route, const KinematicParams& params,
                                   double dt, std::uint32_t ticks, const TeacherConfig& teacher = {},
                                   int run_id = 0);

/// One JSON object per line: a header (route, dt, status) then one record per tick.
[[nodiscard]] std::string drive_log_to_jsonl(const DriveLog& log);
[[nodiscard]] DriveLog drive_log_from_jsonl(const std::string& text);
void write_drive_log(const std::string& path, const DriveLog& log);
[[nodiscard]] DriveLog read_drive_log(const std::string& path);

/// Obstacle layout used for dataset generation: obstacles straddling the route
/// (forcing detours), clutter beside it, and slow movers crossing it.
struct ScenarioConfig {
  RouteKind kind = RouteKind::Line;
  RouteParams route;
  int n_on_route = 3;
  int n_clutter = 6;
  int n_dynamic = 1;
  double on_route_lateral = 0.5;   // |offset| bound of on-route obstacles [m]
  double min_radius = 0.3;
  double max_radius = 0.6;
  double dynamic_speed = 0.3;
  double margin = 6.0;             // world bounds beyond the route bbox [m]
  double start_clear = 3.0;        // no obstacles within this arc length of the start
};

struct Scenario {
  World world;
  ReferencePath route;
};

[[nodiscard]] Scenario make_scenario(const ScenarioConfig& config, std::uint64_t seed, int route_id);

}  // namespace octopath
