#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "octopath/random.hpp"
#include "octopath/seq2seq.hpp"

namespace oracle {

using namespace octopath;

struct GradCheck {
  double max_rel_error = 0.0;
  int coords = 0;
};

// Central differences on `n_coords` random coordinates against the analytic
// gradient. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck gradient_check(ModelParams params, std::span<const SampleSequence* const> batch, int n_coords,
                                std::uint64_t seed, double h = 1e-5, double floor = 1e-6,
                                bool teacher_forcing = true) {
  Gradients grads;
  (void)loss_and_gradients(params, batch, teacher_forcing, &grads);
  std::size_t total = 0;
  for (const auto& t : params.tensors) total += static_cast<std::size_t>(t.size());
  Rng rng(seed);
  GradCheck out;
  for (int c = 0; c < n_coords; ++c) {
    std::size_t flat = rng.index(total);
    std::size_t ti = 0;
    while (flat >= static_cast<std::size_t>(params.tensors[ti].size())) flat -= static_cast<std::size_t>(params.tensors[ti++].size());
    double& x = params.tensors[ti].data()[flat];
    const double x0 = x;
    x = x0 + h;
    const double up = loss_and_gradients(params, batch, teacher_forcing, nullptr);
    x = x0 - h;
    const double down = loss_and_gradients(params, batch, teacher_forcing, nullptr);
    x = x0;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads[ti].data()[flat];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.coords;
  }
  return out;
}

}  // namespace oracle
