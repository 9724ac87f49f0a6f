#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "octopath/geometry.hpp"

namespace octopath {

/// Log-odds sensor model. Defaults follow common occupancy-mapping practice.
struct SensorFusionParams {
  double p_hit = 0.7;
  double p_miss = 0.4;
  double l_min = std::log(0.12 / 0.88);
  double l_max = std::log(0.97 / 0.03);
  double occ_threshold = 0.5;
  double max_range = 20.0;

  /// Throws InvalidGeometry when a probability or clamp is out of range.
  void validate() const;

  [[nodiscard]] double hit_delta() const { return std::log(p_hit / (1.0 - p_hit)); }
  [[nodiscard]] double miss_delta() const { return std::log(p_miss / (1.0 - p_miss)); }
  [[nodiscard]] double occupied_logit() const { return std::log(occ_threshold / (1.0 - occ_threshold)); }
};

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Integer voxel coordinates, each in [0, 2^depth) for voxels inside the map.
struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
};

/// The cubic lattice underlying a map: half-open voxels [o + k*res, o + (k+1)*res).
struct VoxelGeometry {
  Vec3 origin;
  double resolution = 0.0;
  std::int64_t cells_per_axis = 0;

  [[nodiscard]] VoxelKey key_of(Vec3 p) const {
    return {static_cast<std::int64_t>(std::floor((p.x - origin.x) / resolution)),
            static_cast<std::int64_t>(std::floor((p.y - origin.y) / resolution)),
            static_cast<std::int64_t>(std::floor((p.z - origin.z) / resolution))};
  }
  [[nodiscard]] bool contains(const VoxelKey& k) const {
    return k.x >= 0 && k.y >= 0 && k.z >= 0 && k.x < cells_per_axis && k.y < cells_per_axis &&
           k.z < cells_per_axis;
  }
  [[nodiscard]] Vec3 center_of(const VoxelKey& k) const {
    return {origin.x + (static_cast<double>(k.x) + 0.5) * resolution,
            origin.y + (static_cast<double>(k.y) + 0.5) * resolution,
            origin.z + (static_cast<double>(k.z) + 0.5) * resolution};
  }
};

/// Voxels crossed by the segment from -> to, in traversal order, starting at the
/// voxel containing `from` and stopping before the voxel containing `to`
/// (Amanatides-Woo stepping). Traversal ends early at the first voxel outside
/// the lattice. `end_key` receives the voxel containing `to`.
void compute_ray_keys(const VoxelGeometry& geometry, Vec3 from, Vec3 to, std::vector<VoxelKey>& free_keys,
                      VoxelKey& end_key);

/// Projected 2D tri-state grid. Cell (ix, iy) covers
/// [origin.x + ix*res, +res) x [origin.y + iy*res, +res).
class TriStateGrid {
 public:
  TriStateGrid() = default;
  TriStateGrid(Vec2 origin, int width, int height, double resolution, CellState fill = CellState::Unknown);

  [[nodiscard]] Vec2 origin() const { return origin_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] double resolution() const { return resolution_; }

  [[nodiscard]] bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  [[nodiscard]] CellState at(int ix, int iy) const { return cells_[index(ix, iy)]; }
  void set(int ix, int iy, CellState s) { cells_[index(ix, iy)] = s; }

  /// Cell containing p; nullopt outside the grid.
  [[nodiscard]] std::optional<std::array<int, 2>> cell_of(Vec2 p) const;
  [[nodiscard]] Vec2 center_of(int ix, int iy) const {
    return {origin_.x + (ix + 0.5) * resolution_, origin_.y + (iy + 0.5) * resolution_};
  }
  /// State at a metric point; Unknown outside the grid.
  [[nodiscard]] CellState state_at(Vec2 p) const;

  [[nodiscard]] std::span<const CellState> cells() const { return cells_; }
  friend bool operator==(const TriStateGrid&, const TriStateGrid&) = default;

 private:
  [[nodiscard]] std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix);
  }

  Vec2 origin_;
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.0;
  std::vector<CellState> cells_;
};

/// Fixed-size ego-frame crop of a projected grid. Cell (i, j) has its center at
/// ego coordinates ((i + 0.5) res, (j + 0.5) res - height*res/2); i runs forward,
/// j runs left. Values: free -1, unknown 0, occupied +1.
struct EgoWindow {
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  std::vector<std::int8_t> values;  // index i * height + j
  Pose2 frame;

  [[nodiscard]] std::int8_t at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(height) + static_cast<std::size_t>(j)];
  }
};

[[nodiscard]] std::int8_t encode_cell(CellState s);

[[nodiscard]] EgoWindow ego_window(const TriStateGrid& grid, const Pose2& ego_pose, int width, int height,
                                   double resolution);

/// Sparse probabilistic octree. All leaves live at the finest depth; coarser
/// resolutions are produced by `coarsen`, which returns a new map.
class OctreeMap {
 public:
  /// Throws InvalidGeometry unless side_length = resolution * 2^d with d >= 1.
  OctreeMap(Vec3 origin, double side_length, double resolution, SensorFusionParams params = {});

  [[nodiscard]] Vec3 origin() const { return geometry_.origin; }
  [[nodiscard]] double side_length() const { return side_length_; }
  [[nodiscard]] double resolution() const { return geometry_.resolution; }
  [[nodiscard]] int depth() const { return depth_; }
  [[nodiscard]] const SensorFusionParams& params() const { return params_; }
  [[nodiscard]] const VoxelGeometry& geometry() const { return geometry_; }

  [[nodiscard]] bool contains(Vec3 p) const { return geometry_.contains(geometry_.key_of(p)); }

  /// Integrates one scan; every endpoint is treated as a return unless it lies
  /// beyond max_range. Throws OutOfBounds if the sensor is outside the map.
  void integrate_scan(Vec3 sensor_origin, std::span<const Vec3> endpoints);
  /// As above; beams with hit_flags[i] == 0 only carve free space.
  void integrate_scan(Vec3 sensor_origin, std::span<const Vec3> endpoints, std::span<const std::uint8_t> hit_flags);

  [[nodiscard]] CellState query_state(Vec3 p) const;
  [[nodiscard]] CellState state_of(const VoxelKey& key) const;
  [[nodiscard]] std::optional<double> log_odds(const VoxelKey& key) const;
  [[nodiscard]] std::optional<double> log_odds_at(Vec3 p) const;

  [[nodiscard]] TriStateGrid project_2d(double z_min, double z_max) const;

  /// Throws InvalidGeometry unless new_resolution = resolution * 2^k, k >= 1, and
  /// the coarse map keeps at least one level.
  [[nodiscard]] OctreeMap coarsen(double new_resolution) const;

  [[nodiscard]] std::vector<std::uint8_t> serialize() const;
  [[nodiscard]] static OctreeMap deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  [[nodiscard]] static OctreeMap load(const std::string& path);

  [[nodiscard]] std::size_t leaf_count() const { return leaf_count_; }
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

  /// Visits (key, log_odds) of every stored leaf in preorder.
  template <typename F>
  void for_each_leaf(F&& visit) const {
    if (!nodes_.empty()) walk(0, 0, VoxelKey{}, visit);
  }

 private:
  struct Node {
    std::array<std::int32_t, 8> child;
    double log_odds = 0.0;
    Node() { child.fill(-1); }
  };

  [[nodiscard]] int child_slot(const VoxelKey& key, int level) const {
    return static_cast<int>(((key.x >> level) & 1) | (((key.y >> level) & 1) << 1) | (((key.z >> level) & 1) << 2));
  }
  [[nodiscard]] const Node* find_leaf(const VoxelKey& key) const;
  Node& leaf_for(const VoxelKey& key, bool& created);
  void update(const VoxelKey& key, double delta);
  [[nodiscard]] CellState classify(double log_odds) const;

  template <typename F>
  void walk(std::int32_t index, int level_depth, VoxelKey prefix, F& visit) const {
    const Node& n = nodes_[static_cast<std::size_t>(index)];
    if (level_depth == depth_) {
      visit(prefix, n.log_odds);
      return;
    }
    for (int slot = 0; slot < 8; ++slot) {
      if (n.child[slot] < 0) continue;
      VoxelKey k{(prefix.x << 1) | (slot & 1), (prefix.y << 1) | ((slot >> 1) & 1), (prefix.z << 1) | ((slot >> 2) & 1)};
      walk(n.child[slot], level_depth + 1, k, visit);
    }
  }

  VoxelGeometry geometry_;
  double side_length_ = 0.0;
  int depth_ = 0;
  SensorFusionParams params_;
  std::vector<Node> nodes_;  // nodes_[0] is the root once anything is stored
  std::size_t leaf_count_ = 0;
  std::vector<VoxelKey> scratch_keys_;
};

/// Reads whitespace-separated "x y z" lines (meters); '#' starts a comment.
[[nodiscard]] std::vector<Vec3> read_point_cloud(const std::string& path);

}  // namespace octopath
