#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tome/attention.hpp"
#include "tome/config.hpp"
#include "tome/matching.hpp"
#include "tome/merging.hpp"
#include "tome/plan.hpp"
#include "tome/rng.hpp"
#include "tome/types.hpp"
#include "tome/weights.hpp"

namespace tome {

/// Planar pixel image: channels_in planes of image_size x image_size.
template <class Scalar>
struct Image {
  std::vector<MatrixX<Scalar>> planes;

  int channels() const { return static_cast<int>(planes.size()); }
  int size() const { return planes.empty() ? 0 : static_cast<int>(planes.front().rows()); }
};

/// What one block did to the token count.
struct BlockTrace {
  int tokens_in = 0;
  int tokens_out = 0;
  int r_requested = 0;
  int r_effective = 0;
  MergePlan plan;                  // no-op plan on the pruning path
  std::optional<PrunePlan> prune;  // set when reduction = prune_random
};

/// Per-block reduction record plus the final token provenance; enough to
/// reconstruct which input patches ended up in which output token.
struct ForwardTrace {
  std::vector<BlockTrace> blocks;
  std::vector<std::vector<int>> final_sources;

  long total_merged() const {
    long t = 0;
    for (const auto& b : blocks) t += b.r_effective;
    return t;
  }
};

template <class Scalar>
struct ForwardResult {
  VectorX<Scalar> logits;
  ForwardTrace trace;
};

inline constexpr double kLayerNormEpsilon = 1e-6;

/// LayerNorm over the channel dimension; statistics accumulated in double.
template <class Scalar>
MatrixX<Scalar> layer_norm(const MatrixX<Scalar>& x, const VectorX<Scalar>& gamma,
                           const VectorX<Scalar>& beta) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw std::invalid_argument("layer_norm: parameter shape mismatch");
  }
  MatrixX<Scalar> out(x.rows(), x.cols());
  const auto c = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean += static_cast<double>(x(i, j));
    mean /= c;
    double var = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double d = static_cast<double>(x(i, j)) - mean;
      var += d * d;
    }
    var /= c;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double norm = (static_cast<double>(x(i, j)) - mean) * inv_std;
      out(i, j) = static_cast<Scalar>(norm * static_cast<double>(gamma[j]) +
                                      static_cast<double>(beta[j]));
    }
  }
  return out;
}

/// Exact (erf-based) GELU, elementwise in double.
template <class Scalar>
MatrixX<Scalar> gelu(const MatrixX<Scalar>& x) {
  MatrixX<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = static_cast<double>(x(i, j));
      out(i, j) = static_cast<Scalar>(0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)));
    }
  }
  return out;
}

/// Cuts the image into non-overlapping patches, projects each to the model
/// width, prepends the class token and adds position embeddings. Patch p's
/// flattened layout is channel-major: all pixels of channel 0 row by row,
/// then channel 1, ... Every token starts at size 1; patch tokens carry
/// their own patch id as provenance and the class token carries id
/// n_patches.
template <class Scalar>
TokenState<Scalar> patch_embed(const Image<Scalar>& image, const ModelConfig& cfg,
                               const ModelWeights<Scalar>& w) {
  if (image.channels() != cfg.channels_in) {
    throw std::invalid_argument("patch_embed: expected " +
                                std::to_string(cfg.channels_in) + " channels, got " +
                                std::to_string(image.channels()));
  }
  for (const auto& plane : image.planes) {
    if (plane.rows() != cfg.image_size || plane.cols() != cfg.image_size) {
      throw std::invalid_argument("patch_embed: image dimensions do not match config");
    }
  }

  const int grid = cfg.grid();
  const int ps = cfg.patch_size;
  const int n_patches = cfg.n_patches();
  MatrixX<Scalar> patches(n_patches, cfg.patch_dim());
  for (int py = 0; py < grid; ++py) {
    for (int px = 0; px < grid; ++px) {
      const int p = py * grid + px;
      Eigen::Index col = 0;
      for (int ch = 0; ch < cfg.channels_in; ++ch) {
        for (int y = 0; y < ps; ++y) {
          for (int x = 0; x < ps; ++x) {
            patches(p, col++) =
                image.planes[static_cast<std::size_t>(ch)](py * ps + y, px * ps + x);
          }
        }
      }
    }
  }

  TokenState<Scalar> state;
  state.features.resize(n_patches + 1, cfg.width);
  state.features.row(0) = w.cls_token.transpose();
  state.features.bottomRows(n_patches).noalias() = patches * w.patch_embed_w.transpose();
  state.features.bottomRows(n_patches).rowwise() += w.patch_embed_b.transpose();
  state.features += w.pos_embed;

  state.sizes = VectorXi::Ones(n_patches + 1);
  state.sources.resize(static_cast<std::size_t>(n_patches + 1));
  state.sources[0] = {n_patches};  // the class token's own provenance id
  for (int p = 0; p < n_patches; ++p) {
    state.sources[static_cast<std::size_t>(p + 1)] = {p};
  }
  return state;
}

namespace detail {

/// Picks the similarity feature out of the block's intermediates.
template <class Scalar>
SimilarityInput<Scalar> block_similarity(const ToMeConfig& tcfg,
                                         const AttentionInputs<Scalar>& attn_in,
                                         const MatrixX<Scalar>& x_pre,
                                         const MatrixX<Scalar>& x_post) {
  switch (tcfg.feature) {
    case SimilarityFeature::k:
      return prepare_similarity(attn_in.k, tcfg.head_agg, tcfg.metric);
    case SimilarityFeature::q:
      return prepare_similarity(attn_in.q, tcfg.head_agg, tcfg.metric);
    case SimilarityFeature::v:
      return prepare_similarity(attn_in.v, tcfg.head_agg, tcfg.metric);
    case SimilarityFeature::x:
      return prepare_similarity(std::vector<MatrixX<Scalar>>{x_post},
                                tcfg.head_agg, tcfg.metric);
    case SimilarityFeature::x_pre:
      return prepare_similarity(std::vector<MatrixX<Scalar>>{x_pre},
                                tcfg.head_agg, tcfg.metric);
  }
  throw std::invalid_argument("block_similarity: bad feature");
}

}  // namespace detail

/// One transformer block with the token-reduction step between the
/// attention and MLP branches:
///   x += Attn(LN1(x));  x, sizes, sources <- reduce(x) by r;  x += MLP(LN2(x))
/// The reduction sees the full post-residual state. r is clamped against
/// the tokens actually available; the trace records requested and effective
/// counts. r = 0 leaves the state bit-for-bit on the vanilla path.
template <class Scalar>
BlockTrace block_forward(TokenState<Scalar>& state, int r,
                         const typename ModelWeights<Scalar>::Block& w,
                         const ModelConfig& cfg, std::uint64_t layer_seed) {
  const ToMeConfig& tcfg = cfg.tome;
  BlockTrace trace;
  trace.tokens_in = state.n_tokens();
  trace.r_requested = r;

  const MatrixX<Scalar> x_pre = state.features;
  const MatrixX<Scalar> ln1 = layer_norm(state.features, w.norm1_w, w.norm1_b);
  AttentionInputs<Scalar> attn_in =
      qkv_project(ln1, w.qkv_w, w.qkv_b, cfg.heads, state.sizes);
  const auto heads = proportional_attention(attn_in, tcfg.prop_attn);
  state.features += output_project(heads, w.proj_w, w.proj_b);

  if (r > 0 && state.n_tokens() >= 2) {
    if (tcfg.reduction == ReductionKind::merge) {
      const SimilarityInput<Scalar> sim =
          detail::block_similarity(tcfg, attn_in, x_pre, state.features);
      const TokenPartition part = partition_tokens(
          state.n_tokens(), tcfg.partition, sim.protected_ids, layer_seed);
      trace.plan = bipartite_soft_matching(sim, r, part);
      state = apply_merge(state, trace.plan, tcfg.combine);
      trace.r_effective = trace.plan.r_effective;
    } else {
      const int r_eff = std::min(r, state.n_tokens() - 1);
      trace.prune = random_prune(state.n_tokens(), r_eff,
                                 std::vector<int>{0}, layer_seed);
      trace.plan.n_in = state.n_tokens();
      trace.plan.r_requested = r;
      state = apply_prune(state, *trace.prune);
      trace.r_effective = r_eff;
    }
  } else {
    trace.plan.n_in = state.n_tokens();
    trace.plan.r_requested = r;
  }

  const MatrixX<Scalar> ln2 = layer_norm(state.features, w.norm2_w, w.norm2_b);
  MatrixX<Scalar> hidden(ln2.rows(), w.fc1_w.rows());
  hidden.noalias() = ln2 * w.fc1_w.transpose();
  hidden.rowwise() += w.fc1_b.transpose();
  hidden = gelu(hidden);
  MatrixX<Scalar> mlp(hidden.rows(), w.fc2_w.rows());
  mlp.noalias() = hidden * w.fc2_w.transpose();
  mlp.rowwise() += w.fc2_b.transpose();
  state.features += mlp;

  trace.tokens_out = state.n_tokens();
  return trace;
}

/// Full forward pass: patch embedding, depth blocks each reducing by its
/// schedule entry, final norm, classifier on the class token (always at
/// index 0). `seed` only drives the stochastic knobs (random partition,
/// random pruning); the default configuration is seed-independent.
template <class Scalar>
ForwardResult<Scalar> model_forward(const Image<Scalar>& image,
                                    const ModelConfig& cfg,
                                    const ModelWeights<Scalar>& w,
                                    std::uint64_t seed = 0) {
  cfg.validate();
  TokenState<Scalar> state = patch_embed(image, cfg, w);

  ForwardResult<Scalar> result;
  result.trace.blocks.reserve(static_cast<std::size_t>(cfg.depth));
  for (int i = 0; i < cfg.depth; ++i) {
    const int r = cfg.tome.schedule.per_layer[static_cast<std::size_t>(i)];
    result.trace.blocks.push_back(
        block_forward(state, r, w.blocks[static_cast<std::size_t>(i)], cfg,
                      mix_seed(seed, static_cast<std::uint64_t>(i))));
  }

  state.features = layer_norm(state.features, w.norm_w, w.norm_b);
  result.logits.resize(cfg.num_classes);
  result.logits.noalias() = w.head_w * state.features.row(0).transpose();
  result.logits += w.head_b;
  result.trace.final_sources = std::move(state.sources);
  return result;
}

/// Deterministic pseudo-random test image with pixel values in [0, 1).
template <class Scalar>
Image<Scalar> random_image(const ModelConfig& cfg, std::uint64_t seed) {
  Image<Scalar> img;
  Rng rng(seed);
  img.planes.reserve(static_cast<std::size_t>(cfg.channels_in));
  for (int ch = 0; ch < cfg.channels_in; ++ch) {
    MatrixX<Scalar> plane(cfg.image_size, cfg.image_size);
    for (Eigen::Index i = 0; i < plane.rows(); ++i) {
      for (Eigen::Index j = 0; j < plane.cols(); ++j) {
        plane(i, j) = static_cast<Scalar>(rng.uniform());
      }
    }
    img.planes.push_back(std::move(plane));
  }
  return img;
}

}  // namespace tome
