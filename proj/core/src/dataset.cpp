#include "octopath/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "binary_io.hpp"
#include "octopath/error.hpp"
#include "octopath/random.hpp"

namespace octopath {

namespace {

constexpr std::uint8_t kContainerVersion = 1;

double smallest_dyadic_side(double resolution, double extent) {
  double side = 2.0 * resolution;
  while (side < extent) side *= 2.0;
  return side;
}

OctreeMap map_for_log(const DriveLog& log, const GridSpec& spec, const MapBuilderConfig& cfg) {
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-lo.x, -lo.y};
  auto grow = [&](Vec2 p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  };
  for (const auto& p : log.route.points) grow(p);
  for (const auto& r : log.records) grow(r.state.position());
  const double res = spec.resolution;
  const double extent = std::max(hi.x - lo.x, hi.y - lo.y) + 2.0 * cfg.margin;
  const double side = smallest_dyadic_side(res, extent);
  const Vec2 mid = 0.5 * (lo + hi);
  // Lattice-aligned origin with z = 0 at a voxel center.
  const Vec3 origin{std::floor((mid.x - side / 2.0) / res) * res, std::floor((mid.y - side / 2.0) / res) * res,
                    -side / 2.0 + res / 2.0};
  return OctreeMap(origin, side, res, cfg.fusion);
}

/// Any-occupied projection of the voxel column containing (x, y) over [kz0, kz1].
CellState column_state(const OctreeMap& map, double x, double y, std::int64_t kz0, std::int64_t kz1) {
  VoxelKey key = map.geometry().key_of({x, y, 0.0});
  bool any_free = false;
  for (std::int64_t kz = kz0; kz <= kz1; ++kz) {
    key.z = kz;
    const CellState s = map.state_of(key);
    if (s == CellState::Occupied) return CellState::Occupied;
    any_free = any_free || s == CellState::Free;
  }
  return any_free ? CellState::Free : CellState::Unknown;
}

std::vector<std::int8_t> sample_window(const OctreeMap& map, const Pose2& pose, const GridSpec& spec,
                                       std::int64_t kz0, std::int64_t kz1) {
  std::vector<std::int8_t> values(static_cast<std::size_t>(spec.n_classes()));
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double res = spec.resolution;
  const double half = 0.5 * spec.height * res;
  for (int i = 0; i < spec.width; ++i) {
    const double ex = (i + 0.5) * res;
    for (int j = 0; j < spec.height; ++j) {
      const double ey = (j + 0.5) * res - half;
      values[static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.height) + static_cast<std::size_t>(j)] =
          encode_cell(column_state(map, pose.x + c * ex - s * ey, pose.y + s * ex + c * ey, kz0, kz1));
    }
  }
  return values;
}

Vec2 nearest_route_point(const ReferencePath& route, Vec2 p) {
  Vec2 best = route.points.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& q : route.points) {
    const Vec2 d = q - p;
    const double d2 = dot(d, d);
    if (d2 < best_d) {
      best_d = d2;
      best = q;
    }
  }
  return best;
}

}  // namespace

void GridSpec::validate() const {
  if (width < 1 || height < 1 || !(resolution > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "grid spec needs positive width, height and resolution");
  }
}

std::uint32_t cell_of_position(Vec2 p, const Pose2& anchor, const GridSpec& spec) {
  const Vec2 e = to_ego(anchor, p);
  const double half = 0.5 * spec.height * spec.resolution;
  const double fi = std::floor(e.x / spec.resolution);
  const double fj = std::floor((e.y + half) / spec.resolution);
  if (!(fi >= 0.0 && fi < spec.width && fj >= 0.0 && fj < spec.height)) {
    throw Error(ErrorCode::LabelOutOfWindow, "point outside the ego window");
  }
  return static_cast<std::uint32_t>(static_cast<int>(fi) * spec.height + static_cast<int>(fj));
}

Vec2 position_of_cell(std::uint32_t cls, const Pose2& anchor, const GridSpec& spec) {
  if (cls >= static_cast<std::uint32_t>(spec.n_classes())) {
    throw Error(ErrorCode::InvalidClass, "class " + std::to_string(cls) + " out of range");
  }
  const int i = static_cast<int>(cls) / spec.height;
  const int j = static_cast<int>(cls) % spec.height;
  const Vec2 e{(i + 0.5) * spec.resolution, (j + 0.5) * spec.resolution - 0.5 * spec.height * spec.resolution};
  return to_global(anchor, e);
}

std::vector<SampleSequence> build_samples(const DriveLog& log, const GridSpec& spec, int tau_i, int tau_o,
                                          const MapBuilderConfig& map_cfg, BuildStats* stats) {
  spec.validate();
  if (tau_i < 0 || tau_o < 1) throw Error(ErrorCode::InvalidArgument, "tau_i >= 0 and tau_o >= 1 required");
  const std::size_t need = static_cast<std::size_t>(tau_i + tau_o + 1);
  if (log.records.size() < need) {
    throw Error(ErrorCode::InsufficientLog, "log has " + std::to_string(log.records.size()) + " ticks, need " +
                                                std::to_string(need));
  }
  if (log.route.points.empty()) throw Error(ErrorCode::InsufficientLog, "log has no route");

  OctreeMap map = map_for_log(log, spec, map_cfg);
  const auto& geo = map.geometry();
  const std::int64_t kz0 = std::max<std::int64_t>(0, geo.key_of({0, 0, map_cfg.z_min}).z);
  const std::int64_t kz1 = std::min<std::int64_t>(geo.cells_per_axis - 1, geo.key_of({0, 0, map_cfg.z_max}).z);

  const std::size_t n = log.records.size();
  std::vector<std::vector<std::int8_t>> windows(n);
  std::vector<Vec2> nearest(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& rec = log.records[k];
    const Vec3 sensor{rec.state.x, rec.state.y, 0.0};
    map.integrate_scan(sensor, rec.scan.endpoints, rec.scan.hits);
    windows[k] = sample_window(map, rec.state.pose(), spec, kz0, kz1);
    nearest[k] = nearest_route_point(log.route, rec.state.position());
  }

  std::vector<SampleSequence> out;
  BuildStats local;
  const auto ti = static_cast<std::size_t>(tau_i);
  const auto to = static_cast<std::size_t>(tau_o);
  for (std::size_t t = ti; t + to < n; ++t) {
    ++local.candidates;
    const Pose2 anchor = log.records[t].state.pose();
    SampleSequence s;
    s.anchor = anchor;
    s.run_id = log.run_id;
    s.tick = log.records[t].tick;
    bool ok = true;
    for (std::size_t k = 1; k <= to && ok; ++k) {
      const Vec2 p = log.records[t + k].state.position();
      try {
        s.labels.push_back(cell_of_position(p, anchor, spec));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::LabelOutOfWindow) throw;
        ok = false;
      }
      s.future.push_back(to_ego(anchor, p));
    }
    if (!ok) {
      ++local.dropped;
      continue;
    }
    for (std::size_t k = t - ti; k <= t; ++k) s.windows.push_back(windows[k]);
    for (std::size_t k = t - ti; k <= t + to; ++k) s.ref_window.push_back(to_ego(anchor, nearest[k]));
    out.push_back(std::move(s));
    ++local.kept;
  }
  if (local.candidates > 0 && 20 * local.dropped > local.candidates) {
    std::fprintf(stderr, "warning: run %d dropped %zu of %zu samples (labels outside the window)\n", log.run_id,
                 local.dropped, local.candidates);
  }
  if (stats != nullptr) {
    stats->candidates += local.candidates;
    stats->kept += local.kept;
    stats->dropped += local.dropped;
  }
  return out;
}

std::vector<const SampleSequence*> Dataset::subset(Split s) const {
  std::vector<const SampleSequence*> out;
  for (const auto& x : samples) {
    if (x.split == s) out.push_back(&x);
  }
  return out;
}

std::size_t Dataset::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [s](const SampleSequence& x) { return x.split == s; }));
}

Dataset split_dataset(std::vector<SampleSequence> samples, const GridSpec& spec, int tau_i, int tau_o,
                      const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0.0 || ratios.validation < 0.0 || ratios.test < 0.0) {
    throw Error(ErrorCode::ConfigError, "split ratios must be non-negative and sum to 1");
  }
  std::set<std::int32_t> run_set;
  for (const auto& s : samples) run_set.insert(s.run_id);
  std::vector<std::int32_t> runs(run_set.begin(), run_set.end());
  if (runs.size() < 3) {
    throw Error(ErrorCode::InsufficientRuns, std::to_string(runs.size()) + " runs cannot fill three splits");
  }
  Rng rng(seed);
  rng.shuffle(runs.begin(), runs.end());
  const auto n = static_cast<double>(runs.size());
  const auto n_val = static_cast<std::size_t>(std::max(1.0, std::round(ratios.validation * n)));
  const auto n_test = static_cast<std::size_t>(std::max(1.0, std::round(ratios.test * n)));
  if (n_val + n_test >= runs.size()) {
    throw Error(ErrorCode::InsufficientRuns, "no runs left for the training split");
  }
  std::map<std::int32_t, Split> assign;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    assign[runs[k]] = k < n_val ? Split::Validation : (k < n_val + n_test ? Split::Test : Split::Train);
  }
  for (auto& s : samples) s.split = assign.at(s.run_id);
  return Dataset{spec, tau_i, tau_o, std::move(samples)};
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  detail::ByteWriter w;
  w.magic("OPD1");
  w.put<std::uint8_t>(kContainerVersion);
  w.put<std::int32_t>(ds.spec.width);
  w.put<std::int32_t>(ds.spec.height);
  w.put<double>(ds.spec.resolution);
  w.put<std::int32_t>(ds.tau_i);
  w.put<std::int32_t>(ds.tau_o);
  w.put<std::uint64_t>(ds.samples.size());
  w.put<std::uint64_t>(ds.count(Split::Train));
  w.put<std::uint64_t>(ds.count(Split::Validation));
  w.put<std::uint64_t>(ds.count(Split::Test));
  const auto cells = static_cast<std::size_t>(ds.spec.n_classes());
  for (const auto& s : ds.samples) {
    if (s.windows.size() != static_cast<std::size_t>(ds.tau_i + 1) ||
        s.ref_window.size() != static_cast<std::size_t>(ds.tau_i + ds.tau_o + 1) ||
        s.labels.size() != static_cast<std::size_t>(ds.tau_o) || s.future.size() != s.labels.size()) {
      throw Error(ErrorCode::ShapeError, "sample does not match the dataset horizons");
    }
    w.put(s.anchor.x);
    w.put(s.anchor.y);
    w.put(s.anchor.theta);
    for (const auto& win : s.windows) {
      if (win.size() != cells) throw Error(ErrorCode::ShapeError, "window does not match the grid spec");
      w.put_span(std::span<const std::int8_t>(win));
    }
    for (const auto& p : s.ref_window) {
      w.put(p.x);
      w.put(p.y);
    }
    w.put_span(std::span<const std::uint32_t>(s.labels));
    for (const auto& p : s.future) {
      w.put(p.x);
      w.put(p.y);
    }
    w.put<std::int32_t>(s.run_id);
    w.put<std::uint32_t>(s.tick);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.split));
  }
  return w.take();
}

Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "dataset");
  r.expect_magic("OPD1");
  if (r.get<std::uint8_t>() != kContainerVersion) throw Error(ErrorCode::FormatError, "dataset: unsupported version");
  Dataset ds;
  ds.spec.width = r.get<std::int32_t>();
  ds.spec.height = r.get<std::int32_t>();
  ds.spec.resolution = r.get<double>();
  ds.tau_i = r.get<std::int32_t>();
  ds.tau_o = r.get<std::int32_t>();
  try {
    ds.spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("dataset header: ") + e.what());
  }
  if (ds.tau_i < 0 || ds.tau_o < 1 || ds.spec.n_classes() > (1 << 24)) {
    throw Error(ErrorCode::FormatError, "dataset header out of range");
  }
  const auto total = r.get<std::uint64_t>();
  std::uint64_t expected[3];
  for (auto& c : expected) c = r.get<std::uint64_t>();
  if (expected[0] + expected[1] + expected[2] != total) throw Error(ErrorCode::FormatError, "dataset counts disagree");
  const auto cells = static_cast<std::size_t>(ds.spec.n_classes());
  const auto n_in = static_cast<std::size_t>(ds.tau_i + 1);
  const auto n_ref = static_cast<std::size_t>(ds.tau_i + ds.tau_o + 1);
  const auto n_out = static_cast<std::size_t>(ds.tau_o);
  const std::size_t per_sample = 24 + n_in * cells + 16 * n_ref + 4 * n_out + 16 * n_out + 9;
  if (total > bytes.size() / per_sample + 1) throw Error(ErrorCode::FormatError, "dataset: truncated stream");
  ds.samples.reserve(total);
  for (std::uint64_t k = 0; k < total; ++k) {
    SampleSequence s;
    s.anchor.x = r.get<double>();
    s.anchor.y = r.get<double>();
    s.anchor.theta = r.get<double>();
    s.windows.assign(n_in, std::vector<std::int8_t>(cells));
    for (auto& win : s.windows) r.get_span(std::span<std::int8_t>(win));
    s.ref_window.resize(n_ref);
    for (auto& p : s.ref_window) {
      p.x = r.get<double>();
      p.y = r.get<double>();
    }
    s.labels.resize(n_out);
    r.get_span(std::span<std::uint32_t>(s.labels));
    for (auto l : s.labels) {
      if (l >= cells) throw Error(ErrorCode::FormatError, "dataset: label out of range");
    }
    s.future.resize(n_out);
    for (auto& p : s.future) {
      p.x = r.get<double>();
      p.y = r.get<double>();
    }
    s.run_id = r.get<std::int32_t>();
    s.tick = r.get<std::uint32_t>();
    const auto split = r.get<std::uint8_t>();
    if (split > 2) throw Error(ErrorCode::FormatError, "dataset: bad split tag");
    s.split = static_cast<Split>(split);
    ds.samples.push_back(std::move(s));
  }
  r.expect_end();
  if (ds.count(Split::Train) != expected[0] || ds.count(Split::Validation) != expected[1] ||
      ds.count(Split::Test) != expected[2]) {
    throw Error(ErrorCode::FormatError, "dataset split counts disagree with the header");
  }
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  const auto bytes = serialize_dataset(ds);
  detail::write_file(path, bytes);
}

Dataset load_dataset(const std::string& path) { return deserialize_dataset(detail::read_file(path)); }

}  // namespace octopath
