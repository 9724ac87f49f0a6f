#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octopath/geometry.hpp"
#include "octopath/kinematics.hpp"
#include "octopath/octree_map.hpp"
#include "octopath/world_sim.hpp"

namespace octopath {

struct GridSpec {
  int width = 40;
  int height = 40;
  double resolution = 0.2;

  [[nodiscard]] int n_classes() const { return width * height; }
  /// Throws InvalidSpec for non-positive dimensions.
  void validate() const;
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Class index of a global point in the ego window anchored at `anchor`.
/// Throws LabelOutOfWindow outside [0, W res) x [-H res/2, H res/2).
[[nodiscard]] std::uint32_t cell_of_position(Vec2 p, const Pose2& anchor, const GridSpec& spec);
/// Global center of a class cell. Throws InvalidClass.
[[nodiscard]] Vec2 position_of_cell(std::uint32_t cls, const Pose2& anchor, const GridSpec& spec);

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

struct SampleSequence {
  std::vector<std::vector<std::int8_t>> windows;  // tau_i + 1 windows, each W*H values (index i*H + j)
  std::vector<Vec2> ref_window;                   // tau_i + tau_o + 1 ego-frame route points
  std::vector<std::uint32_t> labels;              // tau_o classes for t+1 .. t+tau_o
  std::vector<Vec2> future;                       // tau_o logged ego-frame positions (unquantized)
  Pose2 anchor;
  std::int32_t run_id = 0;
  std::uint32_t tick = 0;
  Split split = Split::Train;

  friend bool operator==(const SampleSequence&, const SampleSequence&) = default;
};

struct MapBuilderConfig {
  SensorFusionParams fusion;
  double z_min = -0.05;  // projection slab
  double z_max = 0.05;
  double margin = 10.0;  // map extent beyond the route bounding box [m]
};

struct BuildStats {
  std::size_t candidates = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Persistent octree over the whole log, one sample per anchor tick. Throws
/// InsufficientLog when the log is shorter than tau_i + tau_o + 1.
[[nodiscard]] std::vector<SampleSequence> build_samples(const DriveLog& log, const GridSpec& spec, int tau_i,
                                                        int tau_o, const MapBuilderConfig& map_cfg = {},
                                                        BuildStats* stats = nullptr);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct Dataset {
  GridSpec spec;
  int tau_i = 4;
  int tau_o = 10;
  std::vector<SampleSequence> samples;

  [[nodiscard]] std::vector<const SampleSequence*> subset(Split s) const;
  [[nodiscard]] std::size_t count(Split s) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Assigns whole runs to splits after a seeded shuffle of run ids. Validation
/// and test get max(1, round(ratio * runs)) runs each; train keeps the rest.
/// Throws InsufficientRuns when fewer than three runs are present.
[[nodiscard]] Dataset split_dataset(std::vector<SampleSequence> samples, const GridSpec& spec, int tau_i, int tau_o,
                                    const SplitRatios& ratios, std::uint64_t seed);

[[nodiscard]] std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
[[nodiscard]] Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const std::string& path, const Dataset& ds);
[[nodiscard]] Dataset load_dataset(const std::string& path);

}  // namespace octopath
