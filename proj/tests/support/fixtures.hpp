#pragma once

#include <cstdint>
#include <vector>

#include "octopath/dataset.hpp"
#include "octopath/random.hpp"
#include "octopath/seq2seq.hpp"

namespace fixture {

using namespace octopath;

// Random windows, route points and labels shaped for `spec`.
inline SampleSequence random_sample(const ModelSpec& spec, Rng& rng) {
  SampleSequence s;
  const auto cells = static_cast<std::size_t>(spec.grid.n_classes());
  for (int t = 0; t <= spec.tau_i; ++t) {
    std::vector<std::int8_t> w(cells);
    for (auto& v : w) v = static_cast<std::int8_t>(static_cast<int>(rng.index(3)) - 1);
    s.windows.push_back(std::move(w));
  }
  for (int t = 0; t < spec.tau_i + spec.tau_o + 1; ++t) s.ref_window.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
  for (int t = 0; t < spec.tau_o; ++t) {
    s.labels.push_back(static_cast<std::uint32_t>(rng.index(static_cast<std::uint64_t>(spec.n_classes()))));
    s.future.push_back({rng.uniform(0, 2), rng.uniform(-1, 1)});
  }
  s.anchor = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3)};
  return s;
}

inline Dataset random_dataset(const ModelSpec& spec, int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds{spec.grid, spec.tau_i, spec.tau_o, {}};
  for (int k = 0; k < n; ++k) {
    auto s = random_sample(spec, rng);
    s.run_id = k;
    s.tick = static_cast<std::uint32_t>(k);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Identical all-unknown inputs whose futures go straight ahead at a lateral
// offset of +d for half of the samples and -d for the rest.
inline Dataset two_target_set(const ModelSpec& spec, double d, int per_side, double step = 0.3) {
  Dataset ds{spec.grid, spec.tau_i, spec.tau_o, {}};
  const auto cells = static_cast<std::size_t>(spec.grid.n_classes());
  for (int k = 0; k < 2 * per_side; ++k) {
    SampleSequence s;
    s.windows.assign(static_cast<std::size_t>(spec.tau_i + 1), std::vector<std::int8_t>(cells, 0));
    s.ref_window.assign(static_cast<std::size_t>(spec.tau_i + spec.tau_o + 1), Vec2{0.0, 0.0});
    const double side = k % 2 == 0 ? d : -d;
    for (int t = 1; t <= spec.tau_o; ++t) {
      const Vec2 p{step * t, side};
      s.future.push_back(p);
      s.labels.push_back(cell_of_position(p, s.anchor, spec.grid));
    }
    s.run_id = k;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Every coordinate of every tensor uniform in [-scale, scale].
inline void randomize(ModelParams& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& t : params.tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
  }
}

}  // namespace fixture
