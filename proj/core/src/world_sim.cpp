#include "octopath/world_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "octopath/error.hpp"
#include "octopath/random.hpp"

namespace octopath {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 heading_vec(double h) { return {std::cos(h), std::sin(h)}; }

double ray_circle(Vec2 o, Vec2 d, const Circle& c) {
  const Vec2 oc = o - c.center;
  const double cc = dot(oc, oc) - c.radius * c.radius;
  if (cc <= 0.0) return 0.0;
  const double b = dot(oc, d);
  const double disc = b * b - cc;
  if (disc < 0.0) return kInf;
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : kInf;
}

double ray_rect(Vec2 o, Vec2 d, const Rect& r) {
  double t_enter = -kInf;
  double t_exit = kInf;
  const double lo[2] = {r.min.x, r.min.y};
  const double hi[2] = {r.max.x, r.max.y};
  const double org[2] = {o.x, o.y};
  const double dir[2] = {d.x, d.y};
  for (int a = 0; a < 2; ++a) {
    if (dir[a] == 0.0) {
      if (org[a] < lo[a] || org[a] > hi[a]) return kInf;
      continue;
    }
    double t0 = (lo[a] - org[a]) / dir[a];
    double t1 = (hi[a] - org[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_exit < 0.0) return kInf;
  return std::max(t_enter, 0.0);
}

double ray_bounds_exit(Vec2 o, Vec2 d, const Bounds& b) {
  double t = kInf;
  if (d.x > 0.0) t = std::min(t, (b.max.x - o.x) / d.x);
  if (d.x < 0.0) t = std::min(t, (b.min.x - o.x) / d.x);
  if (d.y > 0.0) t = std::min(t, (b.max.y - o.y) / d.y);
  if (d.y < 0.0) t = std::min(t, (b.min.y - o.y) / d.y);
  return std::max(t, 0.0);
}

double shape_ray(Vec2 o, Vec2 d, const Shape& s) {
  return std::visit([&](const auto& sh) {
    if constexpr (std::is_same_v<std::decay_t<decltype(sh)>, Circle>) return ray_circle(o, d, sh);
    else return ray_rect(o, d, sh);
  }, s);
}

double point_rect_distance(Vec2 p, const Rect& r) {
  const double dx = std::max({r.min.x - p.x, 0.0, p.x - r.max.x});
  const double dy = std::max({r.min.y - p.y, 0.0, p.y - r.max.y});
  return std::hypot(dx, dy);
}

bool disk_hits_shape(Vec2 p, double radius, const Shape& s) {
  return std::visit([&](const auto& sh) {
    if constexpr (std::is_same_v<std::decay_t<decltype(sh)>, Circle>) return norm(p - sh.center) < radius + sh.radius;
    else return point_rect_distance(p, sh) < radius;
  }, s);
}

/// Half extents of a shape's bounding box and its center.
std::pair<Vec2, Vec2> shape_box(const Shape& s) {
  return std::visit([](const auto& sh) -> std::pair<Vec2, Vec2> {
    if constexpr (std::is_same_v<std::decay_t<decltype(sh)>, Circle>) return {sh.center, {sh.radius, sh.radius}};
    else return {0.5 * (sh.min + sh.max), 0.5 * (sh.max - sh.min)};
  }, s);
}

Shape translate(const Shape& s, Vec2 d) {
  return std::visit([&](const auto& sh) -> Shape {
    if constexpr (std::is_same_v<std::decay_t<decltype(sh)>, Circle>) return Circle{sh.center + d, sh.radius};
    else return Rect{sh.min + d, sh.max + d};
  }, s);
}

std::vector<double> cumulative_length(const std::vector<Vec2>& pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + norm(pts[i] - pts[i - 1]);
  return s;
}

}  // namespace

std::string_view to_string(RouteKind kind) {
  switch (kind) {
    case RouteKind::Line: return "line";
    case RouteKind::SCurve: return "s_curve";
    case RouteKind::Circle: return "circle";
    case RouteKind::Waypoints: return "waypoints";
  }
  return "line";
}

RouteKind parse_route_kind(std::string_view name) {
  if (name == "line") return RouteKind::Line;
  if (name == "s_curve") return RouteKind::SCurve;
  if (name == "circle") return RouteKind::Circle;
  if (name == "waypoints") return RouteKind::Waypoints;
  throw Error(ErrorCode::ConfigError, "unknown route kind \"" + std::string(name) + "\"");
}

std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, double spacing) {
  if (points.size() < 2) throw Error(ErrorCode::InvalidGeometry, "polyline needs at least two points");
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidGeometry, "spacing must be positive");
  const auto s = cumulative_length(points);
  const double total = s.back();
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidGeometry, "polyline has zero length");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(total / spacing)));
  std::vector<Vec2> out;
  out.reserve(n + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 2 < points.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double u = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(points[seg] + u * (points[seg + 1] - points[seg]));
  }
  return out;
}

ReferencePath make_route(RouteKind kind, const RouteParams& p) {
  if (!(p.spacing > 0.0)) throw Error(ErrorCode::InvalidGeometry, "route spacing must be positive");
  ReferencePath route;
  route.kind = kind;
  const double h = p.heading;
  switch (kind) {
    case RouteKind::Line: {
      if (!(p.length > 0.0)) throw Error(ErrorCode::InvalidGeometry, "line length must be positive");
      const auto n = static_cast<std::size_t>(std::max(1.0, std::round(p.length / p.spacing)));
      for (std::size_t k = 0; k <= n; ++k) {
        route.points.push_back(p.start + (p.length * static_cast<double>(k) / static_cast<double>(n)) * heading_vec(h));
      }
      break;
    }
    case RouteKind::Circle: {
      if (!(p.radius > 0.0) || !(p.loops > 0.0)) throw Error(ErrorCode::InvalidGeometry, "circle radius must be positive");
      const double arc = p.loops * 2.0 * std::numbers::pi * p.radius;
      const auto n = static_cast<std::size_t>(std::max(3.0, std::round(arc / p.spacing)));
      const Vec2 center = p.start + p.radius * Vec2{-std::sin(h), std::cos(h)};
      const double phi0 = h - std::numbers::pi / 2.0;
      const double step = p.loops * 2.0 * std::numbers::pi / static_cast<double>(n);
      const bool closed = std::abs(p.loops - std::round(p.loops)) < 1e-12;
      const std::size_t count = closed ? n : n + 1;
      for (std::size_t k = 0; k < count; ++k) {
        const double phi = phi0 + step * static_cast<double>(k);
        route.points.push_back(center + p.radius * Vec2{std::cos(phi), std::sin(phi)});
      }
      break;
    }
    case RouteKind::SCurve: {
      if (!(p.radius > 0.0) || !(p.radius2 > 0.0) || !(p.sweep > 0.0)) {
        throw Error(ErrorCode::InvalidGeometry, "s-curve radii and sweep must be positive");
      }
      const double l1 = p.radius * p.sweep;
      const double total = l1 + p.radius2 * p.sweep;
      const auto n = static_cast<std::size_t>(std::max(2.0, std::round(total / p.spacing)));
      const Vec2 c1 = p.start + p.radius * Vec2{-std::sin(h), std::cos(h)};
      const double hj = h + p.sweep;
      const Vec2 pj = c1 + p.radius * Vec2{std::cos(h - std::numbers::pi / 2.0 + p.sweep),
                                           std::sin(h - std::numbers::pi / 2.0 + p.sweep)};
      const Vec2 c2 = pj + p.radius2 * Vec2{std::sin(hj), -std::cos(hj)};
      for (std::size_t k = 0; k <= n; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(n);
        if (s <= l1) {
          const double phi = h - std::numbers::pi / 2.0 + s / p.radius;
          route.points.push_back(c1 + p.radius * Vec2{std::cos(phi), std::sin(phi)});
        } else {
          const double psi = hj + std::numbers::pi / 2.0 - (s - l1) / p.radius2;
          route.points.push_back(c2 + p.radius2 * Vec2{std::cos(psi), std::sin(psi)});
        }
      }
      break;
    }
    case RouteKind::Waypoints:
      route.points = resample_polyline(p.waypoints, p.spacing);
      break;
  }
  const auto s = cumulative_length(route.points);
  route.spacing = route.points.size() > 1 ? s.back() / static_cast<double>(route.points.size() - 1) : p.spacing;
  return route;
}

double ray_cast(const World& world, Vec2 origin, Vec2 dir) {
  double best = ray_bounds_exit(origin, dir, world.bounds);
  for (const auto& s : world.static_obstacles) best = std::min(best, shape_ray(origin, dir, s));
  for (const auto& d : world.dynamic_obstacles) best = std::min(best, shape_ray(origin, dir, d.shape));
  return best;
}

LidarScan lidar_scan(const World& world, const Pose2& pose, int n_beams, double max_range) {
  if (n_beams < 1) throw Error(ErrorCode::InvalidArgument, "n_beams must be positive");
  LidarScan scan;
  scan.endpoints.reserve(static_cast<std::size_t>(n_beams));
  scan.hits.reserve(static_cast<std::size_t>(n_beams));
  scan.ranges.reserve(static_cast<std::size_t>(n_beams));
  const Vec2 o = pose.position();
  for (int k = 0; k < n_beams; ++k) {
    const double a = pose.theta + 2.0 * std::numbers::pi * k / n_beams;
    const Vec2 d = heading_vec(a);
    double range = ray_cast(world, o, d);
    const bool hit = range <= max_range;
    if (!hit) range = max_range;
    const Vec2 e = o + range * d;
    scan.endpoints.push_back({e.x, e.y, 0.0});
    scan.hits.push_back(hit ? 1 : 0);
    scan.ranges.push_back(range);
  }
  return scan;
}

World step_world(const World& world, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  World next = world;
  next.time += dt;
  for (auto& d : next.dynamic_obstacles) {
    d.shape = translate(d.shape, dt * d.velocity);
    const auto [c, half] = shape_box(d.shape);
    if ((c.x - half.x <= world.bounds.min.x && d.velocity.x < 0.0) ||
        (c.x + half.x >= world.bounds.max.x && d.velocity.x > 0.0)) {
      d.velocity.x = -d.velocity.x;
    }
    if ((c.y - half.y <= world.bounds.min.y && d.velocity.y < 0.0) ||
        (c.y + half.y >= world.bounds.max.y && d.velocity.y > 0.0)) {
      d.velocity.y = -d.velocity.y;
    }
  }
  return next;
}

bool footprint_collides(const World& world, Vec2 p, double radius) {
  const Bounds& b = world.bounds;
  if (p.x - radius < b.min.x || p.y - radius < b.min.y || p.x + radius > b.max.x || p.y + radius > b.max.y) {
    return true;
  }
  for (const auto& s : world.static_obstacles) {
    if (disk_hits_shape(p, radius, s)) return true;
  }
  for (const auto& d : world.dynamic_obstacles) {
    if (disk_hits_shape(p, radius, d.shape)) return true;
  }
  return false;
}

TriStateGrid rasterize(const World& world, double resolution) {
  const Vec2 size = world.bounds.max - world.bounds.min;
  const int w = static_cast<int>(std::ceil(size.x / resolution - 1e-9));
  const int h = static_cast<int>(std::ceil(size.y / resolution - 1e-9));
  TriStateGrid grid(world.bounds.min, w, h, resolution, CellState::Free);
  auto mark = [&](const Shape& s) {
    const auto [c, half] = shape_box(s);
    const auto ix0 = static_cast<int>(std::floor((c.x - half.x - grid.origin().x) / resolution));
    const auto ix1 = static_cast<int>(std::floor((c.x + half.x - grid.origin().x) / resolution));
    const auto iy0 = static_cast<int>(std::floor((c.y - half.y - grid.origin().y) / resolution));
    const auto iy1 = static_cast<int>(std::floor((c.y + half.y - grid.origin().y) / resolution));
    for (int iy = std::max(iy0, 0); iy <= std::min(iy1, h - 1); ++iy) {
      for (int ix = std::max(ix0, 0); ix <= std::min(ix1, w - 1); ++ix) {
        const Rect cell{{grid.origin().x + ix * resolution, grid.origin().y + iy * resolution},
                        {grid.origin().x + (ix + 1) * resolution, grid.origin().y + (iy + 1) * resolution}};
        const bool overlap = std::visit([&](const auto& sh) {
          if constexpr (std::is_same_v<std::decay_t<decltype(sh)>, Circle>) {
            return point_rect_distance(sh.center, cell) < sh.radius;
          } else {
            return sh.min.x < cell.max.x && sh.max.x > cell.min.x && sh.min.y < cell.max.y && sh.max.y > cell.min.y;
          }
        }, s);
        if (overlap) grid.set(ix, iy, CellState::Occupied);
      }
    }
  };
  for (const auto& s : world.static_obstacles) mark(s);
  for (const auto& d : world.dynamic_obstacles) mark(d.shape);
  return grid;
}

namespace {

std::size_t nearest_forward(const std::vector<Vec2>& pts, Vec2 p, std::size_t from, std::size_t window) {
  std::size_t best = from;
  double best_d = kInf;
  const std::size_t end = std::min(pts.size(), from + window + 1);
  for (std::size_t i = from; i < end; ++i) {
    const double d = norm(pts[i] - p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

class Teacher {
 public:
  Teacher(const ReferencePath& route, const KinematicParams& params, const TeacherConfig& cfg)
      : route_(route), params_(params), cfg_(cfg),
        primitives_(motion_primitives(params, cfg.cruise_speed, cfg.n_curvatures,
                                      cfg.primitive_length / cfg.cruise_speed, cfg.max_curvature)) {}

  void update_progress(Vec2 p) {
    const auto window = static_cast<std::size_t>(std::ceil(3.0 / std::max(route_.spacing, 1e-3)));
    progress_ = nearest_forward(route_.points, p, progress_, window);
  }

  [[nodiscard]] bool finished(Vec2 p) const {
    return progress_ + 1 >= route_.points.size() && norm(route_.points.back() - p) < 0.5 * cfg_.cruise_speed;
  }

  void replan(const World& world, const EgoState& state) {
    World planning = world;
    for (const auto& d : world.dynamic_obstacles) {
      for (int k = 1; k <= 4; ++k) {
        const Vec2 shift{d.velocity.x * 0.5 * k, d.velocity.y * 0.5 * k};
        planning.static_obstacles.push_back(translate(d.shape, shift));
      }
    }
    const TriStateGrid grid = rasterize(planning, cfg_.grid_resolution);
    const double inflated = cfg_.footprint_radius + cfg_.clearance;
    const FootprintChecker checker(grid, inflated);
    const std::size_t last = route_.points.size() - 1;
    const auto ahead = static_cast<std::size_t>(std::round(cfg_.plan_horizon / std::max(route_.spacing, 1e-3)));
    std::size_t goal = std::min(last, progress_ + ahead);
    while (goal < last && checker.collides(route_.points[goal])) ++goal;
    while (goal > progress_ && checker.collides(route_.points[goal])) --goal;

    path_.clear();
    PlannerConfig pc;
    pc.footprint_radius = inflated;
    pc.max_expansions = 20'000;
    for (int attempt = 0; attempt < 2 && path_.empty(); ++attempt) {
      try {
        const PlanResult plan = hybrid_astar(grid, state.pose(), route_.points[goal], primitives_, pc);
        for (const Pose2& q : sample_path(plan, 0.1)) path_.push_back(q.position());
      } catch (const Error&) {
        pc.footprint_radius = cfg_.footprint_radius;  // retry without the clearance margin
      }
    }
    if (path_.empty()) {
      for (std::size_t i = progress_; i <= last; ++i) path_.push_back(route_.points[i]);
    } else {
      for (std::size_t i = goal + 1; i <= last; ++i) path_.push_back(route_.points[i]);
    }
  }

  [[nodiscard]] ControlSignal pursue(const EgoState& state) const {
    const Vec2 p = state.position();
    std::size_t nearest = nearest_forward(path_, p, 0, path_.size());
    Vec2 target = path_.back();
    for (std::size_t i = nearest; i < path_.size(); ++i) {
      if (norm(path_[i] - p) >= cfg_.pursuit_lookahead) {
        target = path_[i];
        break;
      }
    }
    const Vec2 local = to_ego(state.pose(), target);
    const double l2 = dot(local, local);
    const double v = cfg_.cruise_speed;
    double omega = l2 > 1e-12 ? v * 2.0 * local.y / l2 : 0.0;
    const double limit = max_yaw_rate(v, params_) * 0.999;
    omega = std::clamp(omega, -limit, limit);
    return {v, omega};
  }

  // Stops when waiting keeps a moving obstacle away longer than driving on.
  [[nodiscard]] ControlSignal yield(const World& world, const EgoState& state, ControlSignal u) const {
    if (world.dynamic_obstacles.empty()) return u;
    const int go = first_contact(world, state, u);
    if (go < 0) return u;
    const int stop = first_contact(world, state, {0.0, 0.0});
    return (stop < 0 || stop > go) ? ControlSignal{0.0, 0.0} : u;
  }

  [[nodiscard]] int first_contact(const World& world, EgoState s, ControlSignal u) const {
    World movers = world;
    movers.static_obstacles.clear();
    for (int k = 0; k < 15; ++k) {
      s = step_exact(s, u, 0.1);
      movers = step_world(movers, 0.1);
      for (const auto& d : movers.dynamic_obstacles) {
        if (disk_hits_shape(s.position(), cfg_.footprint_radius + cfg_.clearance, d.shape)) return k;
      }
    }
    return -1;
  }

  [[nodiscard]] bool has_path() const { return !path_.empty(); }

 private:
  const ReferencePath& route_;
  KinematicParams params_;
  TeacherConfig cfg_;
  PrimitiveSet primitives_;
  std::size_t progress_ = 0;
  std::vector<Vec2> path_;
};

}  // namespace

DriveLog collect_run(const World& world, const ReferencePath& route, const KinematicParams& params, double dt,
                     std::uint32_t ticks, const TeacherConfig& teacher_cfg, int run_id) {
  params.validate();
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  DriveLog log;
  log.run_id = run_id;
  log.dt = dt;
  log.route = route;
  if (ticks == 0) return log;
  if (route.points.size() < 2) throw Error(ErrorCode::InvalidScenario, "route needs at least two points");

  EgoState state;
  state.x = route.points[0].x;
  state.y = route.points[0].y;
  const Vec2 d0 = route.points[1] - route.points[0];
  state.theta = wrap_angle(std::atan2(d0.y, d0.x));
  if (!world.bounds.contains(state.position()) ||
      footprint_collides(world, state.position(), teacher_cfg.footprint_radius)) {
    throw Error(ErrorCode::InvalidScenario, "start pose is in collision");
  }

  World w = world;
  Teacher teacher(log.route, params, teacher_cfg);
  for (std::uint32_t tick = 0; tick < ticks; ++tick) {
    teacher.update_progress(state.position());
    if (teacher.finished(state.position())) break;
    if (tick % static_cast<std::uint32_t>(std::max(1, teacher_cfg.replan_every)) == 0 || !teacher.has_path()) {
      teacher.replan(w, state);
    }
    const ControlSignal u = teacher.yield(w, state, teacher.pursue(state));
    state.v_x = u.v_x;
    state.v_y = 0.0;
    state.omega_z = u.omega_z;

    LogRecord rec;
    rec.tick = tick;
    rec.t = tick * dt;
    rec.state = state;
    rec.wheels = body_to_wheel(u, params);
    rec.scan = lidar_scan(w, state.pose(), teacher_cfg.n_beams, teacher_cfg.max_range);
    rec.route_id = route.id;
    log.records.push_back(std::move(rec));

    const EgoState next = step_exact(state, u, dt);
    w = step_world(w, dt);
    if (footprint_collides(w, next.position(), teacher_cfg.footprint_radius)) {
      log.aborted = true;
      log.abort_reason = "collision after tick " + std::to_string(tick);
      break;
    }
    state = next;
  }
  return log;
}

std::string drive_log_to_jsonl(const DriveLog& log) {
  using nlohmann::json;
  std::string out;
  json header;
  header["kind"] = "header";
  header["run_id"] = log.run_id;
  header["dt"] = log.dt;
  header["route_id"] = log.route.id;
  header["route_kind"] = std::string(to_string(log.route.kind));
  header["route_spacing"] = log.route.spacing;
  json pts = json::array();
  for (const auto& p : log.route.points) pts.push_back({p.x, p.y});
  header["route"] = std::move(pts);
  header["aborted"] = log.aborted;
  header["abort_reason"] = log.abort_reason;
  header["ticks"] = log.records.size();
  out += header.dump();
  out += '\n';
  for (const auto& r : log.records) {
    json j;
    j["kind"] = "tick";
    j["tick"] = r.tick;
    j["t"] = r.t;
    j["pose"] = {r.state.x, r.state.y, r.state.theta};
    j["velocity"] = {r.state.v_x, r.state.v_y, r.state.omega_z};
    j["wheels"] = {r.wheels.omega_l, r.wheels.omega_r};
    j["route_id"] = r.route_id;
    json ends = json::array();
    for (const auto& e : r.scan.endpoints) ends.push_back({e.x, e.y, e.z});
    j["endpoints"] = std::move(ends);
    j["hits"] = r.scan.hits;
    j["ranges"] = r.scan.ranges;
    out += j.dump();
    out += '\n';
  }
  return out;
}

DriveLog drive_log_from_jsonl(const std::string& text) {
  using nlohmann::json;
  DriveLog log;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        log.run_id = j.at("run_id").get<int>();
        log.dt = j.at("dt").get<double>();
        log.route.id = j.at("route_id").get<int>();
        log.route.kind = parse_route_kind(j.at("route_kind").get<std::string>());
        log.route.spacing = j.at("route_spacing").get<double>();
        for (const auto& p : j.at("route")) log.route.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        log.aborted = j.at("aborted").get<bool>();
        log.abort_reason = j.at("abort_reason").get<std::string>();
        have_header = true;
      } else if (kind == "tick") {
        LogRecord r;
        r.tick = j.at("tick").get<std::uint32_t>();
        r.t = j.at("t").get<double>();
        const auto& pose = j.at("pose");
        r.state.x = pose.at(0).get<double>();
        r.state.y = pose.at(1).get<double>();
        r.state.theta = pose.at(2).get<double>();
        const auto& vel = j.at("velocity");
        r.state.v_x = vel.at(0).get<double>();
        r.state.v_y = vel.at(1).get<double>();
        r.state.omega_z = vel.at(2).get<double>();
        r.wheels = {j.at("wheels").at(0).get<double>(), j.at("wheels").at(1).get<double>()};
        r.route_id = j.at("route_id").get<int>();
        for (const auto& e : j.at("endpoints")) {
          r.scan.endpoints.push_back({e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
        }
        r.scan.hits = j.at("hits").get<std::vector<std::uint8_t>>();
        r.scan.ranges = j.at("ranges").get<std::vector<double>>();
        if (r.scan.hits.size() != r.scan.endpoints.size() || r.scan.ranges.size() != r.scan.endpoints.size()) {
          throw Error(ErrorCode::FormatError, "scan arrays differ in length");
        }
        log.records.push_back(std::move(r));
      } else {
        throw Error(ErrorCode::FormatError, "unknown record kind \"" + kind + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, "drive log line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw Error(ErrorCode::FormatError, "drive log without header record");
  return log;
}

void write_drive_log(const std::string& path, const DriveLog& log) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << drive_log_to_jsonl(log);
}

DriveLog read_drive_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return drive_log_from_jsonl(buf.str());
}

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed, int route_id) {
  Rng rng(seed);
  Scenario sc;
  sc.route = make_route(cfg.kind, cfg.route);
  sc.route.id = route_id;
  const auto& pts = sc.route.points;
  const auto s = cumulative_length(pts);
  const double total = s.back();

  Vec2 lo = pts.front();
  Vec2 hi = pts.front();
  for (const auto& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  sc.world.bounds = {lo - Vec2{cfg.margin, cfg.margin}, hi + Vec2{cfg.margin, cfg.margin}};
  sc.world.rng_seed = seed;

  auto point_at = [&](double arc, Vec2& tangent) {
    const auto it = std::lower_bound(s.begin(), s.end(), arc);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - s.begin()), pts.size() - 1);
    if (i == 0) i = 1;
    const Vec2 d = pts[i] - pts[i - 1];
    tangent = (1.0 / std::max(norm(d), 1e-12)) * d;
    const double u = std::clamp((arc - s[i - 1]) / std::max(s[i] - s[i - 1], 1e-12), 0.0, 1.0);
    return pts[i - 1] + u * d;
  };
  auto clearance_to_route = [&](Vec2 c) {
    double best = kInf;
    for (const auto& p : pts) best = std::min(best, norm(p - c));
    return best;
  };

  // Straddling obstacles: spaced along the route so each forces a separate detour.
  std::vector<double> placed;
  for (int k = 0, tries = 0; k < cfg.n_on_route && tries < 200; ++tries) {
    const double arc = rng.uniform(cfg.start_clear + 1.0, std::max(cfg.start_clear + 1.0, total - 2.0));
    if (std::any_of(placed.begin(), placed.end(), [&](double a) { return std::abs(a - arc) < 4.0; })) continue;
    Vec2 t;
    const Vec2 p = point_at(arc, t);
    const Vec2 normal{-t.y, t.x};
    const double offset = rng.uniform(-cfg.on_route_lateral, cfg.on_route_lateral);
    const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
    sc.world.static_obstacles.push_back(Circle{p + offset * normal, r});
    placed.push_back(arc);
    ++k;
  }
  for (int k = 0, tries = 0; k < cfg.n_clutter && tries < 400; ++tries) {
    const double arc = rng.uniform(0.0, total);
    Vec2 t;
    const Vec2 p = point_at(arc, t);
    const Vec2 normal{-t.y, t.x};
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double offset = side * rng.uniform(1.8, 4.0);
    const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
    const Vec2 c = p + offset * normal;
    if (clearance_to_route(c) < r + 1.2 || !sc.world.bounds.contains(c)) continue;
    if (rng.uniform() < 0.5) {
      sc.world.static_obstacles.push_back(Circle{c, r});
    } else {
      sc.world.static_obstacles.push_back(Rect{c - Vec2{r, r}, c + Vec2{r, r}});
    }
    ++k;
  }
  for (int k = 0, tries = 0; k < cfg.n_dynamic && tries < 200; ++tries) {
    const double arc = rng.uniform(cfg.start_clear + 4.0, std::max(cfg.start_clear + 4.0, total));
    Vec2 t;
    const Vec2 p = point_at(arc, t);
    const Vec2 normal{-t.y, t.x};
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const Vec2 c = p + (side * 3.0) * normal;
    if (!sc.world.bounds.contains(c)) continue;
    sc.world.dynamic_obstacles.push_back({Circle{c, 0.3}, (-side * cfg.dynamic_speed) * normal});
    ++k;
  }
  return sc;
}

}  // namespace octopath
