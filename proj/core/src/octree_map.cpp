#include "octopath/octree_map.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "octopath/error.hpp"

namespace octopath {

namespace {

constexpr std::string_view kOctreeMagic = "OCT1";

/// d such that ratio == 2^d within floating tolerance, or -1.
int dyadic_exponent(double ratio) {
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) return -1;
  const double d = std::round(std::log2(ratio));
  if (std::abs(std::ldexp(1.0, static_cast<int>(d)) - ratio) > 1e-9 * ratio) return -1;
  return static_cast<int>(d);
}

}  // namespace

void SensorFusionParams::validate() const {
  if (!(p_hit > 0.5 && p_hit < 1.0)) throw Error(ErrorCode::InvalidGeometry, "p_hit must lie in (0.5, 1)");
  if (!(p_miss > 0.0 && p_miss < 0.5)) throw Error(ErrorCode::InvalidGeometry, "p_miss must lie in (0, 0.5)");
  if (!(l_min < 0.0 && l_max > 0.0)) throw Error(ErrorCode::InvalidGeometry, "clamps must satisfy l_min < 0 < l_max");
  if (!(occ_threshold > 0.0 && occ_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidGeometry, "occ_threshold must lie in (0, 1)");
  }
  if (!(max_range > 0.0)) throw Error(ErrorCode::InvalidGeometry, "max_range must be positive");
}

void compute_ray_keys(const VoxelGeometry& geometry, Vec3 from, Vec3 to, std::vector<VoxelKey>& free_keys,
                      VoxelKey& end_key) {
  free_keys.clear();
  VoxelKey key = geometry.key_of(from);
  end_key = geometry.key_of(to);
  if (key == end_key) return;

  const std::array<double, 3> start{from.x, from.y, from.z};
  const std::array<double, 3> dir{to.x - from.x, to.y - from.y, to.z - from.z};
  const std::array<double, 3> org{geometry.origin.x, geometry.origin.y, geometry.origin.z};
  std::array<std::int64_t, 3> cur{key.x, key.y, key.z};
  const std::array<std::int64_t, 3> end{end_key.x, end_key.y, end_key.z};

  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  std::array<std::int64_t, 3> remaining{};
  const double inf = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    remaining[a] = end[a] > cur[a] ? end[a] - cur[a] : cur[a] - end[a];
    if (remaining[a] == 0 || dir[a] == 0.0) {
      step[a] = end[a] > cur[a] ? 1 : -1;
      t_max[a] = inf;
      t_delta[a] = inf;
      continue;
    }
    step[a] = dir[a] > 0.0 ? 1 : -1;
    const double boundary =
        org[a] + static_cast<double>(cur[a] + (step[a] > 0 ? 1 : 0)) * geometry.resolution;
    t_max[a] = (boundary - start[a]) / dir[a];
    t_delta[a] = geometry.resolution / std::abs(dir[a]);
  }

  // Step exactly |end - start| times per axis so the walk always lands on the
  // end voxel, even when rounding makes t_max disagree with the key arithmetic.
  if (!geometry.contains(key)) return;
  free_keys.push_back(key);
  while (true) {
    int axis = -1;
    for (int a = 0; a < 3; ++a) {
      if (remaining[a] == 0) continue;
      if (axis < 0 || t_max[a] < t_max[axis]) axis = a;
    }
    if (axis < 0) break;
    cur[axis] += step[axis];
    t_max[axis] += t_delta[axis];
    --remaining[axis];
    const VoxelKey next{cur[0], cur[1], cur[2]};
    if (next == end_key) break;
    if (!geometry.contains(next)) break;
    free_keys.push_back(next);
  }
}

TriStateGrid::TriStateGrid(Vec2 origin, int width, int height, double resolution, CellState fill)
    : origin_(origin), width_(width), height_(height), resolution_(resolution) {
  if (width <= 0 || height <= 0 || !(resolution > 0.0)) {
    throw Error(ErrorCode::InvalidGeometry, "grid dimensions and resolution must be positive");
  }
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

std::optional<std::array<int, 2>> TriStateGrid::cell_of(Vec2 p) const {
  const double fx = std::floor((p.x - origin_.x) / resolution_);
  const double fy = std::floor((p.y - origin_.y) / resolution_);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width_ && fy < height_)) return std::nullopt;
  return std::array<int, 2>{static_cast<int>(fx), static_cast<int>(fy)};
}

CellState TriStateGrid::state_at(Vec2 p) const {
  const auto c = cell_of(p);
  return c ? at((*c)[0], (*c)[1]) : CellState::Unknown;
}

std::int8_t encode_cell(CellState s) {
  switch (s) {
    case CellState::Occupied: return 1;
    case CellState::Free: return -1;
    case CellState::Unknown: return 0;
  }
  return 0;
}

EgoWindow ego_window(const TriStateGrid& grid, const Pose2& ego_pose, int width, int height, double resolution) {
  if (width <= 0 || height <= 0 || !(resolution > 0.0)) {
    throw Error(ErrorCode::InvalidGeometry, "window dimensions and resolution must be positive");
  }
  EgoWindow w;
  w.width = width;
  w.height = height;
  w.resolution = resolution;
  w.frame = ego_pose;
  w.values.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  const double c = std::cos(ego_pose.theta);
  const double s = std::sin(ego_pose.theta);
  const double half = 0.5 * height * resolution;
  for (int i = 0; i < width; ++i) {
    const double ex = (i + 0.5) * resolution;
    for (int j = 0; j < height; ++j) {
      const double ey = (j + 0.5) * resolution - half;
      const Vec2 world{ego_pose.x + c * ex - s * ey, ego_pose.y + s * ex + c * ey};
      w.values[static_cast<std::size_t>(i) * static_cast<std::size_t>(height) + static_cast<std::size_t>(j)] =
          encode_cell(grid.state_at(world));
    }
  }
  return w;
}

OctreeMap::OctreeMap(Vec3 origin, double side_length, double resolution, SensorFusionParams params)
    : side_length_(side_length), params_(params) {
  if (!(resolution > 0.0) || !(side_length > 0.0)) {
    throw Error(ErrorCode::InvalidGeometry, "side_length and resolution must be positive");
  }
  const int d = dyadic_exponent(side_length / resolution);
  if (d < 1) {
    std::ostringstream msg;
    msg << "side_length " << side_length << " is not resolution " << resolution << " times 2^d (d >= 1)";
    throw Error(ErrorCode::InvalidGeometry, msg.str());
  }
  if (d > 30) throw Error(ErrorCode::InvalidGeometry, "octree deeper than 30 levels");
  params_.validate();
  depth_ = d;
  geometry_ = VoxelGeometry{origin, resolution, std::int64_t{1} << d};
}

const OctreeMap::Node* OctreeMap::find_leaf(const VoxelKey& key) const {
  if (nodes_.empty() || !geometry_.contains(key)) return nullptr;
  std::int32_t idx = 0;
  for (int level = depth_ - 1; level >= 0; --level) {
    idx = nodes_[static_cast<std::size_t>(idx)].child[child_slot(key, level)];
    if (idx < 0) return nullptr;
  }
  return &nodes_[static_cast<std::size_t>(idx)];
}

OctreeMap::Node& OctreeMap::leaf_for(const VoxelKey& key, bool& created) {
  created = false;
  if (nodes_.empty()) nodes_.emplace_back();
  std::int32_t idx = 0;
  for (int level = depth_ - 1; level >= 0; --level) {
    const int slot = child_slot(key, level);
    std::int32_t next = nodes_[static_cast<std::size_t>(idx)].child[slot];
    if (next < 0) {
      next = static_cast<std::int32_t>(nodes_.size());
      nodes_.emplace_back();
      nodes_[static_cast<std::size_t>(idx)].child[slot] = next;
      if (level == 0) {
        created = true;
        ++leaf_count_;
      }
    }
    idx = next;
  }
  return nodes_[static_cast<std::size_t>(idx)];
}

void OctreeMap::update(const VoxelKey& key, double delta) {
  bool created = false;
  Node& leaf = leaf_for(key, created);
  leaf.log_odds = std::clamp(leaf.log_odds + delta, params_.l_min, params_.l_max);
}

void OctreeMap::integrate_scan(Vec3 sensor_origin, std::span<const Vec3> endpoints) {
  integrate_scan(sensor_origin, endpoints, {});
}

void OctreeMap::integrate_scan(Vec3 sensor_origin, std::span<const Vec3> endpoints,
                               std::span<const std::uint8_t> hit_flags) {
  if (!contains(sensor_origin)) throw Error(ErrorCode::OutOfBounds, "sensor origin outside the map");
  if (!hit_flags.empty() && hit_flags.size() != endpoints.size()) {
    throw Error(ErrorCode::InvalidArgument, "hit_flags must match endpoints");
  }
  const double hit = params_.hit_delta();
  const double miss = params_.miss_delta();
  VoxelKey end_key;
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    Vec3 target = endpoints[i];
    bool is_hit = hit_flags.empty() || hit_flags[i] != 0;
    const double range = norm(target - sensor_origin);
    if (range > params_.max_range) {
      target = sensor_origin + (params_.max_range / range) * (target - sensor_origin);
      is_hit = false;
    }
    compute_ray_keys(geometry_, sensor_origin, target, scratch_keys_, end_key);
    for (const auto& k : scratch_keys_) update(k, miss);
    if (is_hit && geometry_.contains(end_key)) update(end_key, hit);
  }
}

CellState OctreeMap::classify(double log_odds) const {
  return log_odds > params_.occupied_logit() ? CellState::Occupied : CellState::Free;
}

CellState OctreeMap::state_of(const VoxelKey& key) const {
  const Node* leaf = find_leaf(key);
  return leaf ? classify(leaf->log_odds) : CellState::Unknown;
}

CellState OctreeMap::query_state(Vec3 p) const { return state_of(geometry_.key_of(p)); }

std::optional<double> OctreeMap::log_odds(const VoxelKey& key) const {
  const Node* leaf = find_leaf(key);
  if (!leaf) return std::nullopt;
  return leaf->log_odds;
}

std::optional<double> OctreeMap::log_odds_at(Vec3 p) const { return log_odds(geometry_.key_of(p)); }

TriStateGrid OctreeMap::project_2d(double z_min, double z_max) const {
  if (!(z_min < z_max)) throw Error(ErrorCode::InvalidArgument, "project_2d requires z_min < z_max");
  const auto n = static_cast<int>(geometry_.cells_per_axis);
  TriStateGrid grid({geometry_.origin.x, geometry_.origin.y}, n, n, geometry_.resolution);
  const double res = geometry_.resolution;
  const auto k_lo = static_cast<std::int64_t>(std::floor((z_min - geometry_.origin.z) / res));
  const auto k_hi = static_cast<std::int64_t>(std::floor((z_max - geometry_.origin.z) / res));
  for_each_leaf([&](const VoxelKey& k, double lo) {
    if (k.z < k_lo || k.z > k_hi) return;
    const int ix = static_cast<int>(k.x);
    const int iy = static_cast<int>(k.y);
    const CellState s = classify(lo);
    const CellState prev = grid.at(ix, iy);
    if (s == CellState::Occupied || prev == CellState::Unknown) grid.set(ix, iy, s);
  });
  return grid;
}

OctreeMap OctreeMap::coarsen(double new_resolution) const {
  const int k = dyadic_exponent(new_resolution / geometry_.resolution);
  if (k < 1) {
    throw Error(ErrorCode::InvalidGeometry, "coarse resolution must be resolution * 2^k with k >= 1");
  }
  if (k >= depth_) throw Error(ErrorCode::InvalidGeometry, "coarse resolution leaves no tree levels");
  OctreeMap coarse(geometry_.origin, side_length_, geometry_.resolution * std::ldexp(1.0, k), params_);
  for_each_leaf([&](const VoxelKey& key, double lo) {
    bool created = false;
    Node& leaf = coarse.leaf_for({key.x >> k, key.y >> k, key.z >> k}, created);
    leaf.log_odds = created ? lo : std::max(leaf.log_odds, lo);
  });
  return coarse;
}

std::vector<std::uint8_t> OctreeMap::serialize() const {
  detail::ByteWriter w;
  w.magic(kOctreeMagic);
  w.put(geometry_.origin.x);
  w.put(geometry_.origin.y);
  w.put(geometry_.origin.z);
  w.put(side_length_);
  w.put(geometry_.resolution);
  w.put(params_.p_hit);
  w.put(params_.p_miss);
  w.put(params_.l_min);
  w.put(params_.l_max);
  w.put(params_.occ_threshold);
  if (nodes_.empty()) return w.take();

  // Preorder: child bitmask, then leaf payload or children in slot order.
  struct Frame {
    std::int32_t index;
    int level_depth;
  };
  std::vector<Frame> stack{{0, 0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<std::size_t>(f.index)];
    if (f.level_depth == depth_) {
      w.put<std::uint8_t>(0);
      w.put(n.log_odds);
      continue;
    }
    std::uint8_t mask = 0;
    for (int slot = 0; slot < 8; ++slot) {
      if (n.child[slot] >= 0) mask |= static_cast<std::uint8_t>(1u << slot);
    }
    w.put(mask);
    for (int slot = 7; slot >= 0; --slot) {
      if (n.child[slot] >= 0) stack.push_back({n.child[slot], f.level_depth + 1});
    }
  }
  return w.take();
}

OctreeMap OctreeMap::deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "octree stream");
  r.expect_magic(kOctreeMagic);
  Vec3 origin;
  origin.x = r.get<double>();
  origin.y = r.get<double>();
  origin.z = r.get<double>();
  const double side = r.get<double>();
  const double res = r.get<double>();
  SensorFusionParams params;
  params.p_hit = r.get<double>();
  params.p_miss = r.get<double>();
  params.l_min = r.get<double>();
  params.l_max = r.get<double>();
  params.occ_threshold = r.get<double>();

  std::optional<OctreeMap> parsed;
  try {
    parsed.emplace(origin, side, res, params);
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("invalid octree header: ") + e.what());
  }
  OctreeMap& map = *parsed;
  if (r.at_end()) return map;

  struct Frame {
    std::int32_t index;
    int level_depth;
  };
  map.nodes_.emplace_back();
  std::vector<Frame> stack{{0, 0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const auto mask = r.get<std::uint8_t>();
    if (f.level_depth == map.depth_) {
      if (mask != 0) throw Error(ErrorCode::FormatError, "leaf record with children");
      const double lo = r.get<double>();
      if (!std::isfinite(lo)) throw Error(ErrorCode::FormatError, "non-finite log-odds");
      map.nodes_[static_cast<std::size_t>(f.index)].log_odds = lo;
      ++map.leaf_count_;
      continue;
    }
    if (mask == 0) throw Error(ErrorCode::FormatError, "inner node without children");
    std::array<std::int32_t, 8> created{};
    for (int slot = 0; slot < 8; ++slot) {
      created[slot] = -1;
      if (!(mask & (1u << slot))) continue;
      const auto idx = static_cast<std::int32_t>(map.nodes_.size());
      map.nodes_.emplace_back();
      map.nodes_[static_cast<std::size_t>(f.index)].child[slot] = idx;
      created[slot] = idx;
    }
    for (int slot = 7; slot >= 0; --slot) {
      if (created[slot] >= 0) stack.push_back({created[slot], f.level_depth + 1});
    }
  }
  r.expect_end();
  return map;
}

void OctreeMap::save(const std::string& path) const { detail::write_file(path, serialize()); }

OctreeMap OctreeMap::load(const std::string& path) { return deserialize(detail::read_file(path)); }

std::vector<Vec3> read_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open point cloud " + path);
  std::vector<Vec3> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    Vec3 p;
    if (!(fields >> p.x)) continue;  // blank line
    std::string extra;
    if (!(fields >> p.y >> p.z) || (fields >> extra)) {
      throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": expected \"x y z\"");
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace octopath
