#include "octopath/planners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <sstream>
#include <tuple>

#include "octopath/error.hpp"

namespace octopath {

PrimitiveSet motion_primitives(const KinematicParams& params, double v_x, int n_curvatures, double duration,
                               double max_curvature) {
  params.validate();
  if (n_curvatures < 1 || n_curvatures % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "n_curvatures must be odd and positive");
  }
  if (!(v_x > 0.0) || !(duration > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "primitives need positive speed and duration");
  }
  const double yaw_limit = max_yaw_rate(v_x, params);
  if (yaw_limit < 0.0) {
    throw Error(ErrorCode::WheelSpeedExceeded, "v_x " + std::to_string(v_x) + " exceeds the wheel bounds");
  }
  // Shave a hair off the limit so round-off never pushes the extreme arcs past it.
  const double kappa_max = std::min(yaw_limit / v_x * (1.0 - 1e-9), max_curvature);
  PrimitiveSet set;
  set.reserve(static_cast<std::size_t>(n_curvatures));
  const int half = n_curvatures / 2;
  for (int i = -half; i <= half; ++i) {
    const double kappa = half == 0 ? 0.0 : kappa_max * static_cast<double>(i) / half;
    const Primitive p{v_x, kappa * v_x, duration};
    (void)body_to_wheel(p.control(), params);
    set.push_back(p);
  }
  return set;
}

double CostField::at_point(Vec2 p) const {
  const double fx = std::floor((p.x - origin_.x) / resolution_);
  const double fy = std::floor((p.y - origin_.y) / resolution_);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width_ && fy < height_)) return std::numeric_limits<double>::infinity();
  return at(static_cast<int>(fx), static_cast<int>(fy));
}

CostField holonomic_heuristic(const TriStateGrid& grid, Vec2 goal) {
  const auto goal_cell = grid.cell_of(goal);
  if (!goal_cell) throw Error(ErrorCode::InvalidGoal, "goal outside the grid");
  const auto [gx, gy] = *goal_cell;
  if (grid.at(gx, gy) == CellState::Occupied) throw Error(ErrorCode::InvalidGoal, "goal cell is occupied");

  const int w = grid.width();
  const int h = grid.height();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), inf);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[idx(gx, gy)] = 0.0;
  open.push({0.0, idx(gx, gy)});
  const double straight = grid.resolution();
  const double diagonal = grid.resolution() * std::numbers::sqrt2;
  while (!open.empty()) {
    const auto [d, cell] = open.top();
    open.pop();
    if (d > dist[cell]) continue;
    const int cx = static_cast<int>(cell % static_cast<std::size_t>(w));
    const int cy = static_cast<int>(cell / static_cast<std::size_t>(w));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx;
        const int ny = cy + dy;
        if (!grid.in_bounds(nx, ny) || grid.at(nx, ny) == CellState::Occupied) continue;
        const double nd = d + ((dx != 0 && dy != 0) ? diagonal : straight);
        if (nd < dist[idx(nx, ny)]) {
          dist[idx(nx, ny)] = nd;
          open.push({nd, idx(nx, ny)});
        }
      }
    }
  }
  return CostField(grid, std::move(dist));
}

FootprintChecker::FootprintChecker(const TriStateGrid& grid, double radius)
    : grid_(&grid), radius_(radius), reach_(static_cast<int>(std::ceil(radius / grid.resolution())) + 1) {
  const int w = grid.width();
  const int h = grid.height();
  // Summed-area table of blocked cells for the quick-accept test.
  std::vector<int> sat(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(h + 1), 0);
  auto s = [&](int x, int y) -> int& { return sat[static_cast<std::size_t>(y) * static_cast<std::size_t>(w + 1) + static_cast<std::size_t>(x)]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      s(x + 1, y + 1) = s(x, y + 1) + s(x + 1, y) - s(x, y) + (grid.at(x, y) == CellState::Occupied ? 1 : 0);
    }
  }
  clear_.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  for (int y = reach_; y < h - reach_; ++y) {
    for (int x = reach_; x < w - reach_; ++x) {
      const int x0 = x - reach_;
      const int y0 = y - reach_;
      const int x1 = x + reach_ + 1;
      const int y1 = y + reach_ + 1;
      const int count = s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0);
      clear_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = count == 0;
    }
  }
}

bool FootprintChecker::collides(Vec2 p) const {
  const double res = grid_->resolution();
  const Vec2 o = grid_->origin();
  const double fx = std::floor((p.x - o.x) / res);
  const double fy = std::floor((p.y - o.y) / res);
  if (!(fx > -1e6 && fx < 1e6 && fy > -1e6 && fy < 1e6)) return true;
  const int cx = static_cast<int>(fx);
  const int cy = static_cast<int>(fy);
  if (grid_->in_bounds(cx, cy) &&
      clear_[static_cast<std::size_t>(cy) * static_cast<std::size_t>(grid_->width()) + static_cast<std::size_t>(cx)]) {
    return false;
  }
  const double r2 = radius_ * radius_;
  for (int iy = cy - reach_; iy <= cy + reach_; ++iy) {
    for (int ix = cx - reach_; ix <= cx + reach_; ++ix) {
      if (!blocked(ix, iy)) continue;
      const double x0 = o.x + ix * res;
      const double y0 = o.y + iy * res;
      const double dx = std::max({x0 - p.x, 0.0, p.x - (x0 + res)});
      const double dy = std::max({y0 - p.y, 0.0, p.y - (y0 + res)});
      if (dx * dx + dy * dy < r2) return true;
    }
  }
  return false;
}

namespace {

struct SearchNode {
  EgoState state;
  double g = 0.0;
  std::int32_t parent = -1;
  Primitive via;  // primitive that produced this node from its parent
  bool closed = false;
  bool goal = false;
};

struct OpenEntry {
  double f;
  double h;
  std::uint64_t seq;
  std::int32_t node;
};

struct OpenOrder {
  // priority_queue pops the "largest"; invert so the lowest (f, h, seq) wins.
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    return std::tie(a.f, a.h, a.seq) > std::tie(b.f, b.h, b.seq);
  }
};

int theta_bin(double theta, int bins) {
  const double t = wrap_angle(theta) + std::numbers::pi;  // (0, 2pi]
  int b = static_cast<int>(std::floor(t / (2.0 * std::numbers::pi / bins)));
  return ((b % bins) + bins) % bins;
}

}  // namespace

PlanResult hybrid_astar(const TriStateGrid& grid, const Pose2& start, Vec2 goal, const PrimitiveSet& primitives,
                        const PlannerConfig& config) {
  if (primitives.empty()) throw Error(ErrorCode::InvalidArgument, "empty primitive set");
  if (config.theta_bins < 1) throw Error(ErrorCode::InvalidArgument, "theta_bins must be positive");
  const double res = grid.resolution();
  const double tol = config.goal_tolerance > 0.0 ? config.goal_tolerance : 1.5 * res;
  const FootprintChecker footprint(grid, config.footprint_radius);
  if (footprint.collides(start.position())) throw Error(ErrorCode::InvalidArgument, "start pose in collision");
  const CostField holo = holonomic_heuristic(grid, goal);

  // Octile distance exceeds the straight line by at most this factor.
  const double octile_excess = std::sqrt(4.0 - 2.0 * std::numbers::sqrt2);
  auto heuristic = [&](Vec2 p) { return std::max(norm(goal - p), holo.at_point(p) / octile_excess); };
  auto step_cost = [&](Vec2 p, double len) {
    return grid.state_at(p) == CellState::Unknown ? len * config.unknown_penalty : len;
  };

  const auto w = static_cast<std::size_t>(grid.width());
  const auto h = static_cast<std::size_t>(grid.height());
  const auto bins = static_cast<std::size_t>(config.theta_bins);
  std::vector<std::int32_t> cell_owner(w * h * bins, -1);
  auto cell_index = [&](const EgoState& s) -> std::optional<std::size_t> {
    const auto c = grid.cell_of(s.position());
    if (!c) return std::nullopt;
    return (static_cast<std::size_t>((*c)[1]) * w + static_cast<std::size_t>((*c)[0])) * bins +
           static_cast<std::size_t>(theta_bin(s.theta, config.theta_bins));
  };

  std::vector<SearchNode> nodes;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenOrder> open;
  std::uint64_t seq = 0;

  EgoState s0;
  s0.x = start.x;
  s0.y = start.y;
  s0.theta = wrap_angle(start.theta);
  nodes.push_back({s0, 0.0, -1, {}, false, norm(goal - start.position()) <= tol});
  const double h0 = heuristic(s0.position());
  if (!std::isfinite(h0)) throw Error(ErrorCode::NoPath, "start is disconnected from the goal");
  if (const auto c = cell_index(s0)) cell_owner[*c] = 0;
  open.push({nodes[0].goal ? 0.0 : h0, nodes[0].goal ? 0.0 : h0, seq++, 0});

  std::size_t expansions = 0;
  std::vector<EgoState> samples;
  std::vector<double> sample_t;
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    SearchNode& current = nodes[static_cast<std::size_t>(top.node)];
    if (current.closed) continue;
    if (!current.goal) {
      const auto c = cell_index(current.state);
      if (!c || cell_owner[*c] != top.node) continue;  // superseded by a cheaper state in the same bin
    }
    current.closed = true;

    if (current.goal) {
      PlanResult result;
      result.expansions = expansions;
      result.cost = current.g;
      std::vector<std::int32_t> chain;
      for (std::int32_t i = top.node; i >= 0; i = nodes[static_cast<std::size_t>(i)].parent) chain.push_back(i);
      std::reverse(chain.begin(), chain.end());
      for (std::size_t k = 0; k < chain.size(); ++k) {
        const SearchNode& n = nodes[static_cast<std::size_t>(chain[k])];
        result.poses.push_back({n.state.x, n.state.y, n.state.theta, n.g});
        if (k > 0) {
          result.segments.push_back(n.via);
          result.length += n.via.length();
        }
      }
      return result;
    }

    if (++expansions > config.max_expansions) {
      throw Error(ErrorCode::NoPath, "expansion budget exhausted");
    }
    const EgoState from = current.state;
    const double g_from = current.g;
    for (const Primitive& prim : primitives) {
      const double len = prim.length();
      const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * res))));
      samples.clear();
      sample_t.clear();
      bool blocked = false;
      for (int k = 1; k <= n; ++k) {
        const double t = prim.duration * k / n;
        const EgoState s = step_exact(from, prim.control(), t);
        if (footprint.collides(s.position())) {
          blocked = true;
          break;
        }
        samples.push_back(s);
        sample_t.push_back(t);
      }

      // Goal reached somewhere along the collision-free prefix: stop at the
      // closest approach instead of overshooting.
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const double d = norm(goal - samples[k].position());
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (best_d <= tol) {
        double lo = best == 0 ? 0.0 : sample_t[best - 1];
        double hi = best + 1 < sample_t.size() ? sample_t[best + 1] : sample_t[best];
        for (int it = 0; it < 60; ++it) {
          const double m1 = lo + (hi - lo) / 3.0;
          const double m2 = hi - (hi - lo) / 3.0;
          const double d1 = norm(goal - step_exact(from, prim.control(), std::max(m1, 1e-12)).position());
          const double d2 = norm(goal - step_exact(from, prim.control(), std::max(m2, 1e-12)).position());
          if (d1 <= d2) hi = m2; else lo = m1;
        }
        double t_star = 0.5 * (lo + hi);
        EgoState end = step_exact(from, prim.control(), std::max(t_star, 1e-12));
        if (norm(goal - end.position()) > best_d || footprint.collides(end.position())) {
          t_star = sample_t[best];
          end = samples[best];
        }
        const Primitive partial{prim.v_x, prim.omega_z, t_star};
        const int m = std::max(1, static_cast<int>(std::ceil(partial.length() / (0.5 * res))));
        double cost = 0.0;
        for (int k = 1; k <= m; ++k) {
          cost += step_cost(step_exact(from, prim.control(), t_star * k / m).position(), partial.length() / m);
        }
        nodes.push_back({end, g_from + cost, top.node, partial, false, true});
        open.push({g_from + cost, 0.0, seq++, static_cast<std::int32_t>(nodes.size() - 1)});
        continue;
      }
      if (blocked) continue;

      double cost = 0.0;
      for (const EgoState& s : samples) cost += step_cost(s.position(), len / n);
      const EgoState& end = samples.back();
      const auto c = cell_index(end);
      if (!c) continue;
      const double g = g_from + cost;
      const std::int32_t owner = cell_owner[*c];
      if (owner >= 0) {
        const SearchNode& o = nodes[static_cast<std::size_t>(owner)];
        if (o.closed || o.g <= g) continue;
      }
      const double hv = heuristic(end.position());
      if (!std::isfinite(hv)) continue;
      nodes.push_back({end, g, top.node, prim, false, false});
      const auto id = static_cast<std::int32_t>(nodes.size() - 1);
      cell_owner[*c] = id;
      open.push({g + hv, hv, seq++, id});
    }
  }
  throw Error(ErrorCode::NoPath, "open set exhausted");
}

Pose2 pose_at_arc_length(const PlanResult& plan, double s) {
  if (plan.poses.empty()) throw Error(ErrorCode::InvalidArgument, "empty plan");
  const PlanPose& p0 = plan.poses.front();
  if (s <= 0.0 || plan.segments.empty()) return {p0.x, p0.y, p0.theta};
  double remaining = s;
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const Primitive& seg = plan.segments[i];
    const double len = seg.length();
    if (remaining <= len || i + 1 == plan.segments.size()) {
      const PlanPose& a = plan.poses[i];
      EgoState st;
      st.x = a.x;
      st.y = a.y;
      st.theta = a.theta;
      const double t = seg.duration * std::min(remaining, len) / len;
      if (t <= 0.0) return {a.x, a.y, a.theta};
      return step_exact(st, seg.control(), t).pose();
    }
    remaining -= len;
  }
  const PlanPose& b = plan.poses.back();
  return {b.x, b.y, b.theta};
}

std::vector<Pose2> sample_path(const PlanResult& plan, double spacing) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  std::vector<Pose2> out;
  for (double s = 0.0; s < plan.length; s += spacing) out.push_back(pose_at_arc_length(plan, s));
  const PlanPose& b = plan.poses.back();
  out.push_back({b.x, b.y, b.theta});
  return out;
}

std::string plan_to_csv(const PlanResult& plan) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,theta,g\n";
  for (const auto& p : plan.poses) out << p.x << ',' << p.y << ',' << p.theta << ',' << p.g << '\n';
  return out.str();
}

void write_plan_csv(const std::string& path, const PlanResult& plan) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << plan_to_csv(plan);
}

}  // namespace octopath
