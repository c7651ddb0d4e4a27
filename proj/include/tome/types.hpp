#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tome {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VectorXi = Eigen::VectorXi;

/// Distance/similarity function used to score token pairs.
/// `softmax_sim` is experimental: it scores with a row-softmax over dot
/// products and is not part of the verified configuration space.
enum class Metric { cosine, euclidean, dot, softmax_sim };

/// How per-head key vectors are combined before similarity scoring.
enum class HeadAgg { mean, concat };

/// How the features of matched tokens are combined.
enum class CombineMode { weighted_avg, avg, max, keep_one };

/// How tokens are split into the two matching sets.
enum class PartitionStyle { alternating, sequential, random };

/// Which activation feeds the similarity computation.
enum class SimilarityFeature { k, q, v, x, x_pre };

/// Token-reduction mechanism applied inside each block.
enum class ReductionKind { merge, prune_random };

std::string_view to_string(Metric m);
std::string_view to_string(HeadAgg a);
std::string_view to_string(CombineMode c);
std::string_view to_string(PartitionStyle p);
std::string_view to_string(SimilarityFeature f);
std::string_view to_string(ReductionKind r);

Metric metric_from_string(std::string_view s);
HeadAgg head_agg_from_string(std::string_view s);
CombineMode combine_from_string(std::string_view s);
PartitionStyle partition_from_string(std::string_view s);
SimilarityFeature feature_from_string(std::string_view s);
ReductionKind reduction_from_string(std::string_view s);

// ---------------------------------------------------------------------------

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::cosine: return "cosine";
    case Metric::euclidean: return "euclidean";
    case Metric::dot: return "dot";
    case Metric::softmax_sim: return "softmax_sim";
  }
  return "?";
}

inline std::string_view to_string(HeadAgg a) {
  return a == HeadAgg::mean ? "mean" : "concat";
}

inline std::string_view to_string(CombineMode c) {
  switch (c) {
    case CombineMode::weighted_avg: return "weighted_avg";
    case CombineMode::avg: return "avg";
    case CombineMode::max: return "max";
    case CombineMode::keep_one: return "keep_one";
  }
  return "?";
}

inline std::string_view to_string(PartitionStyle p) {
  switch (p) {
    case PartitionStyle::alternating: return "alternating";
    case PartitionStyle::sequential: return "sequential";
    case PartitionStyle::random: return "random";
  }
  return "?";
}

inline std::string_view to_string(SimilarityFeature f) {
  switch (f) {
    case SimilarityFeature::k: return "k";
    case SimilarityFeature::q: return "q";
    case SimilarityFeature::v: return "v";
    case SimilarityFeature::x: return "x";
    case SimilarityFeature::x_pre: return "x_pre";
  }
  return "?";
}

inline std::string_view to_string(ReductionKind r) {
  return r == ReductionKind::merge ? "merge" : "prune_random";
}

namespace detail {
[[noreturn]] inline void bad_enum(std::string_view what, std::string_view got) {
  throw std::invalid_argument("unknown " + std::string(what) + ": '" +
                              std::string(got) + "'");
}
}  // namespace detail

inline Metric metric_from_string(std::string_view s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "euclidean") return Metric::euclidean;
  if (s == "dot") return Metric::dot;
  if (s == "softmax_sim") return Metric::softmax_sim;
  detail::bad_enum("metric", s);
}

inline HeadAgg head_agg_from_string(std::string_view s) {
  if (s == "mean") return HeadAgg::mean;
  if (s == "concat") return HeadAgg::concat;
  detail::bad_enum("head_agg", s);
}

inline CombineMode combine_from_string(std::string_view s) {
  if (s == "weighted_avg") return CombineMode::weighted_avg;
  if (s == "avg") return CombineMode::avg;
  if (s == "max") return CombineMode::max;
  if (s == "keep_one") return CombineMode::keep_one;
  detail::bad_enum("combine", s);
}

inline PartitionStyle partition_from_string(std::string_view s) {
  if (s == "alternating") return PartitionStyle::alternating;
  if (s == "sequential") return PartitionStyle::sequential;
  if (s == "random") return PartitionStyle::random;
  detail::bad_enum("partition", s);
}

inline SimilarityFeature feature_from_string(std::string_view s) {
  if (s == "k") return SimilarityFeature::k;
  if (s == "q") return SimilarityFeature::q;
  if (s == "v") return SimilarityFeature::v;
  if (s == "x") return SimilarityFeature::x;
  if (s == "x_pre") return SimilarityFeature::x_pre;
  detail::bad_enum("feature", s);
}

inline ReductionKind reduction_from_string(std::string_view s) {
  if (s == "merge") return ReductionKind::merge;
  if (s == "prune_random") return ReductionKind::prune_random;
  detail::bad_enum("reduction", s);
}

}  // namespace tome
