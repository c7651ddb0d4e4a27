#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tome/rng.hpp"

namespace tome {

/// Per-layer token-reduction quantities r_1..r_L. The runtime clamps each
/// layer against the tokens actually available, so any non-negative profile
/// is valid.
struct Schedule {
  std::vector<int> per_layer;

  int depth() const { return static_cast<int>(per_layer.size()); }
  long total() const {
    return std::accumulate(per_layer.begin(), per_layer.end(), 0L);
  }

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// r tokens per layer; removes r*L in total.
inline Schedule constant_schedule(int r, int depth) {
  if (r < 0 || depth < 1) {
    throw std::invalid_argument("constant_schedule: need r >= 0 and depth >= 1");
  }
  return Schedule{std::vector<int>(static_cast<std::size_t>(depth), r)};
}

namespace detail {

/// Integerizes a linearly decreasing profile that starts at `first` and ends
/// at 0, preserving the exact total: floor everything, then hand the
/// remainder out one unit at a time to the largest fractional parts (ties:
/// earlier layer first). The result is monotone non-increasing.
inline std::vector<int> decreasing_profile(double first, long total, int depth) {
  std::vector<double> profile(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    profile[static_cast<std::size_t>(i)] =
        first * static_cast<double>(depth - 1 - i) / static_cast<double>(depth - 1);
  }
  std::vector<int> out(static_cast<std::size_t>(depth));
  long floored = 0;
  for (int i = 0; i < depth; ++i) {
    out[static_cast<std::size_t>(i)] =
        static_cast<int>(std::floor(profile[static_cast<std::size_t>(i)]));
    floored += out[static_cast<std::size_t>(i)];
  }
  long remainder = total - floored;
  std::vector<int> order(static_cast<std::size_t>(depth));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    const double fx = profile[static_cast<std::size_t>(x)] -
                      std::floor(profile[static_cast<std::size_t>(x)]);
    const double fy = profile[static_cast<std::size_t>(y)] -
                      std::floor(profile[static_cast<std::size_t>(y)]);
    return fx > fy;  // stable sort keeps earlier layers first on ties
  });
  for (long k = 0; k < remainder; ++k) {
    out[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] += 1;
  }
  return out;
}

}  // namespace detail

/// Linearly decreasing schedule: 2r tokens in the first layer, 0 in the
/// last. Removes exactly r*L in total, like the constant schedule, but
/// front-loads the reduction.
inline Schedule decreasing_schedule(int r, int depth) {
  if (r < 0) throw std::invalid_argument("decreasing_schedule: r must be >= 0");
  if (depth < 2) {
    throw std::invalid_argument(
        "decreasing_schedule: depth must be >= 2, the interpolation is "
        "undefined for depth " + std::to_string(depth));
  }
  return Schedule{detail::decreasing_profile(2.0 * r, static_cast<long>(r) * depth,
                                             depth)};
}

/// Uniformly random composition of `total` over the layers (each unit lands
/// in an independently uniform layer). Deterministic per seed.
inline Schedule sample_random_schedule(long total, int depth, std::uint64_t seed) {
  if (total < 0 || depth < 1) {
    throw std::invalid_argument("sample_random_schedule: bad arguments");
  }
  Schedule s{std::vector<int>(static_cast<std::size_t>(depth), 0)};
  Rng rng(seed);
  for (long i = 0; i < total; ++i) {
    s.per_layer[rng.bounded(static_cast<std::uint64_t>(depth))] += 1;
  }
  return s;
}

}  // namespace tome
