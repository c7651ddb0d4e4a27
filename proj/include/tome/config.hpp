#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "tome/errors.hpp"
#include "tome/schedule.hpp"
#include "tome/types.hpp"

namespace tome {

/// All token-merging knobs. Defaults are the best-performing configuration:
/// keys as the similarity feature, cosine metric, head-mean aggregation,
/// size-weighted averaging, alternating partition, proportional attention on.
struct ToMeConfig {
  Schedule schedule;  // length must equal model depth
  SimilarityFeature feature = SimilarityFeature::k;
  Metric metric = Metric::cosine;
  HeadAgg head_agg = HeadAgg::mean;
  CombineMode combine = CombineMode::weighted_avg;
  PartitionStyle partition = PartitionStyle::alternating;
  bool prop_attn = true;
  ReductionKind reduction = ReductionKind::merge;

  friend bool operator==(const ToMeConfig&, const ToMeConfig&) = default;
};

struct ModelConfig {
  int image_size = 224;
  int patch_size = 16;
  int channels_in = 3;
  int width = 384;       // C
  int depth = 12;        // L
  int heads = 6;         // H
  int mlp_ratio = 4;
  int num_classes = 1000;
  ToMeConfig tome;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int n_tokens() const { return n_patches() + 1; }  // + class token
  int patch_dim() const { return patch_size * patch_size * channels_in; }
  int d_head() const { return width / heads; }
  int mlp_hidden() const { return mlp_ratio * width; }

  void validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
      throw ConfigError("image_size must be a positive multiple of patch_size");
    }
    if (channels_in < 1) throw ConfigError("channels_in must be >= 1");
    if (width < 1 || heads < 1 || width % heads != 0) {
      throw ConfigError("width must be a positive multiple of heads");
    }
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
    if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
    if (tome.schedule.depth() != depth) {
      throw ConfigError("schedule length " +
                        std::to_string(tome.schedule.depth()) +
                        " does not match depth " + std::to_string(depth));
    }
    for (int r : tome.schedule.per_layer) {
      if (r < 0) throw ConfigError("schedule entries must be non-negative");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Largest number of merges a single matching round can perform on n tokens
/// with one protected token in set A: every non-protected A token may emit
/// one edge.
inline int layer_merge_capacity(int n_tokens) {
  const int set_a = (n_tokens + 1) / 2;
  return set_a > 0 ? set_a - 1 : 0;
}

/// Analytic flop count for a forward pass under the given schedule.
///
/// Terms, with n the token count entering a block and n' the count after
/// that block's merge (the merge sits between attention and MLP):
///   patch embed   2 * P * patch_dim * C
///   attention     4 * n * C^2  +  2 * n^2 * C
///   MLP           4 * mlp_ratio * n' * C^2
///   head          2 * C * num_classes
/// Lower-order terms (norms, softmax, biases) are omitted. Per-layer merges
/// are capped at the matching capacity, mirroring the runtime clamp.
inline double flop_estimate(const ModelConfig& cfg, const Schedule& schedule) {
  if (schedule.depth() != cfg.depth) {
    throw ConfigError("flop_estimate: schedule length does not match depth");
  }
  const double c = cfg.width;
  double flops = 2.0 * cfg.n_patches() * cfg.patch_dim() * c;
  int n = cfg.n_tokens();
  for (int i = 0; i < cfg.depth; ++i) {
    flops += 4.0 * n * c * c + 2.0 * static_cast<double>(n) * n * c;
    const int r_eff = std::min(schedule.per_layer[static_cast<std::size_t>(i)],
                               layer_merge_capacity(n));
    n -= r_eff;
    flops += 4.0 * cfg.mlp_ratio * n * c * c;
  }
  flops += 2.0 * c * cfg.num_classes;
  return flops;
}

}  // namespace tome
