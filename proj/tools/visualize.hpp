#pragma once

#include <cstdint>
#include <vector>

#include "tome/config.hpp"
#include "tome/ppm.hpp"
#include "tome/vit.hpp"
#include "tome/weights.hpp"

namespace tome::tools {

struct VisualizeResult {
  PpmImage image;               // same dimensions as the input
  std::vector<int> patch_token; // final token index per patch, row-major grid
  int n_regions = 0;            // distinct tokens that own at least one patch
};

/// Traces a forward pass and renders token provenance: every patch is
/// filled with the mean color of all patches that ended up in the same
/// final token, and each token region gets a 1-pixel border in a
/// pseudo-random color seeded by the token's smallest source id.
VisualizeResult render_merge_map(const ModelConfig& cfg,
                                 const ModelWeights<float>& weights,
                                 const PpmImage& input, std::uint64_t seed);

}  // namespace tome::tools
