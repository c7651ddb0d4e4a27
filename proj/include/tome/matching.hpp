#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tome/plan.hpp"
#include "tome/rng.hpp"
#include "tome/types.hpp"

namespace tome {

/// Rows below this L2 norm are treated as the zero direction under the
/// cosine metric: they never merge (score -inf in both roles).
inline constexpr double kZeroNormEpsilon = 1e-12;

/// Head-aggregated token vectors ready for similarity scoring, plus the
/// indices that must never be merged or pruned (index 0, the class token,
/// is always among them).
template <class Scalar>
struct SimilarityInput {
  MatrixX<Scalar> vectors;         // one row per token
  std::vector<int> protected_ids;  // ascending
  Metric metric = Metric::cosine;

  int n_tokens() const { return static_cast<int>(vectors.rows()); }
};

/// The two disjoint token sets a matching round draws edges between.
/// Every src comes from set_a; every dst lives in set_b.
struct TokenPartition {
  std::vector<int> set_a;
  std::vector<int> set_b;
};

/// Optional instrumentation: lets tests assert that one call does one
/// score-matrix pass and one ranking pass no matter how large r is.
struct MatchingStats {
  long long score_cells = 0;
  int ranking_passes = 0;
};

/// Even indices to A, odd to B. A gets the extra token when n is odd, so
/// the class token at index 0 always sits in A.
inline TokenPartition partition_alternating(int n_tokens) {
  if (n_tokens < 2) {
    throw std::invalid_argument(
        "partition requires at least 2 tokens, got " +
        std::to_string(n_tokens));
  }
  TokenPartition part;
  part.set_a.reserve(static_cast<std::size_t>((n_tokens + 1) / 2));
  part.set_b.reserve(static_cast<std::size_t>(n_tokens / 2));
  for (int i = 0; i < n_tokens; ++i) {
    (i % 2 == 0 ? part.set_a : part.set_b).push_back(i);
  }
  return part;
}

/// Partition by the configured style. `sequential` fills A with the first
/// half; `random` shuffles, then swaps any protected index that landed in B
/// into A so protection and output ordering behave identically across
/// styles. Set sizes match the alternating split.
inline TokenPartition partition_tokens(int n_tokens, PartitionStyle style,
                                       std::span<const int> protected_ids,
                                       std::uint64_t seed) {
  if (style == PartitionStyle::alternating) return partition_alternating(n_tokens);
  if (n_tokens < 2) {
    throw std::invalid_argument(
        "partition requires at least 2 tokens, got " +
        std::to_string(n_tokens));
  }
  const int n_a = (n_tokens + 1) / 2;
  TokenPartition part;
  if (style == PartitionStyle::sequential) {
    for (int i = 0; i < n_tokens; ++i) {
      (i < n_a ? part.set_a : part.set_b).push_back(i);
    }
    return part;
  }
  // random
  std::vector<int> perm(static_cast<std::size_t>(n_tokens));
  for (int i = 0; i < n_tokens; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  for (int i = n_tokens - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  part.set_a.assign(perm.begin(), perm.begin() + n_a);
  part.set_b.assign(perm.begin() + n_a, perm.end());
  for (int p : protected_ids) {
    auto in_b = std::find(part.set_b.begin(), part.set_b.end(), p);
    if (in_b == part.set_b.end()) continue;
    for (int& a : part.set_a) {
      if (std::find(protected_ids.begin(), protected_ids.end(), a) ==
          protected_ids.end()) {
        std::swap(a, *in_b);
        break;
      }
    }
  }
  std::sort(part.set_a.begin(), part.set_a.end());
  std::sort(part.set_b.begin(), part.set_b.end());
  return part;
}

/// Aggregates per-head key vectors into one row per token and prepares them
/// for the chosen metric. `mean` averages heads elementwise; `concat` lays
/// head vectors side by side. Under cosine the rows are L2-normalized here;
/// rows with norm below kZeroNormEpsilon are kept as zero and excluded from
/// matching later.
template <class Scalar>
SimilarityInput<Scalar> prepare_similarity(
    const std::vector<MatrixX<Scalar>>& keys_per_head, HeadAgg aggregation,
    Metric metric, std::vector<int> protected_ids = {0}) {
  if (keys_per_head.empty()) {
    throw std::invalid_argument("prepare_similarity: no heads");
  }
  const Eigen::Index n = keys_per_head.front().rows();
  const Eigen::Index d = keys_per_head.front().cols();
  for (const auto& head : keys_per_head) {
    if (head.rows() != n || head.cols() != d) {
      throw std::invalid_argument("prepare_similarity: inconsistent head shapes");
    }
    if (!head.allFinite()) {
      throw std::invalid_argument("prepare_similarity: non-finite key entries");
    }
  }
  const auto n_heads = static_cast<Eigen::Index>(keys_per_head.size());

  SimilarityInput<Scalar> out;
  out.metric = metric;
  std::sort(protected_ids.begin(), protected_ids.end());
  out.protected_ids = std::move(protected_ids);
  for (int p : out.protected_ids) {
    if (p < 0 || p >= n) {
      throw std::invalid_argument("prepare_similarity: protected index out of range");
    }
  }

  if (aggregation == HeadAgg::mean) {
    out.vectors = keys_per_head.front();
    for (Eigen::Index h = 1; h < n_heads; ++h) out.vectors += keys_per_head[static_cast<std::size_t>(h)];
    out.vectors /= static_cast<Scalar>(n_heads);
  } else {
    out.vectors.resize(n, n_heads * d);
    for (Eigen::Index h = 0; h < n_heads; ++h) {
      out.vectors.middleCols(h * d, d) = keys_per_head[static_cast<std::size_t>(h)];
    }
  }

  if (metric == Metric::cosine) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = out.vectors.row(i).template cast<double>().norm();
      if (norm >= kZeroNormEpsilon) {
        out.vectors.row(i) /= static_cast<Scalar>(norm);
      }
      // zero rows stay zero; the matcher gives them -inf scores
    }
  }
  return out;
}

namespace detail {

/// Dense score matrix, |A| x |B|, higher = more similar for every metric
/// (euclidean distances are negated). Zero-direction rows under cosine get
/// -inf in both roles, as do protected tokens in either role.
template <class Scalar>
MatrixX<Scalar> score_matrix(const SimilarityInput<Scalar>& sim,
                             const TokenPartition& part) {
  const auto rows = [&](const std::vector<int>& idx) {
    MatrixX<Scalar> m(static_cast<Eigen::Index>(idx.size()), sim.vectors.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = sim.vectors.row(idx[i]);
    }
    return m;
  };
  const MatrixX<Scalar> a = rows(part.set_a);
  const MatrixX<Scalar> b = rows(part.set_b);

  MatrixX<Scalar> scores;
  switch (sim.metric) {
    case Metric::cosine:
    case Metric::dot:
      scores.noalias() = a * b.transpose();
      break;
    case Metric::euclidean: {
      const VectorX<Scalar> a2 = a.rowwise().squaredNorm();
      const VectorX<Scalar> b2 = b.rowwise().squaredNorm();
      scores.noalias() = a * b.transpose();
      scores *= Scalar(-2);
      scores.colwise() += a2;
      scores.rowwise() += b2.transpose();
      scores = -scores.cwiseMax(Scalar(0)).cwiseSqrt();
      break;
    }
    case Metric::softmax_sim: {
      // experimental: row-softmax over dot products
      scores.noalias() = a * b.transpose();
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const Scalar m = scores.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
          const double e = std::exp(static_cast<double>(scores(i, j) - m));
          scores(i, j) = static_cast<Scalar>(e);
          sum += e;
        }
        scores.row(i) /= static_cast<Scalar>(sum);
      }
      break;
    }
  }

  constexpr Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  const auto is_zero_row = [&](int token) {
    return sim.metric == Metric::cosine &&
           sim.vectors.row(token).template cast<double>().norm() <
               kZeroNormEpsilon;
  };
  const auto is_protected = [&](int token) {
    return std::binary_search(sim.protected_ids.begin(),
                              sim.protected_ids.end(), token);
  };
  for (std::size_t i = 0; i < part.set_a.size(); ++i) {
    if (is_protected(part.set_a[i]) || is_zero_row(part.set_a[i])) {
      scores.row(static_cast<Eigen::Index>(i)).setConstant(ninf);
    }
  }
  for (std::size_t j = 0; j < part.set_b.size(); ++j) {
    if (is_protected(part.set_b[j]) || is_zero_row(part.set_b[j])) {
      scores.col(static_cast<Eigen::Index>(j)).setConstant(ninf);
    }
  }
  return scores;
}

template <class Scalar>
void validate_matching_inputs(const SimilarityInput<Scalar>& sim, int r,
                              const TokenPartition& part) {
  if (r < 0) throw std::invalid_argument("matching: r must be non-negative");
  if (sim.n_tokens() < 2) {
    throw std::invalid_argument("matching: need at least 2 tokens");
  }
  // both sets ascending (tie-breaks rely on scan order) and a partition
  std::vector<bool> seen(static_cast<std::size_t>(sim.n_tokens()), false);
  for (const auto* set : {&part.set_a, &part.set_b}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      const int t = (*set)[i];
      if (t < 0 || t >= sim.n_tokens() || seen[static_cast<std::size_t>(t)] ||
          (i > 0 && (*set)[i - 1] >= t)) {
        throw std::invalid_argument("matching: invalid partition");
      }
      seen[static_cast<std::size_t>(t)] = true;
    }
  }
  if (static_cast<int>(part.set_a.size() + part.set_b.size()) !=
      sim.n_tokens()) {
    throw std::invalid_argument("matching: partition does not cover the token set");
  }
}

inline MergePlan finalize_plan(int n_in, int r_requested,
                               std::vector<MergeEdge> edges,
                               const TokenPartition& part) {
  MergePlan plan;
  plan.n_in = n_in;
  plan.r_requested = r_requested;
  plan.r_effective = static_cast<int>(edges.size());
  plan.edges = std::move(edges);
  std::vector<bool> merged(static_cast<std::size_t>(n_in), false);
  for (const MergeEdge& e : plan.edges) merged[static_cast<std::size_t>(e.src)] = true;
  for (int a : part.set_a) {
    if (!merged[static_cast<std::size_t>(a)]) plan.unmerged_a.push_back(a);
  }
  plan.set_b = part.set_b;
  std::sort(plan.unmerged_a.begin(), plan.unmerged_a.end());
  std::sort(plan.set_b.begin(), plan.set_b.end());
  return plan;
}

}  // namespace detail

/// Bipartite soft matching. One candidate edge per non-protected A token to
/// its most similar B token; candidates ranked by score and the best
/// min(r, #candidates) kept. Runtime does not depend on r: one score matrix,
/// one argmax scan, one sort.
///
/// Ties: equal-score edges rank by lower src index; an A token with two
/// equally similar targets takes the lower B index.
template <class Scalar>
MergePlan bipartite_soft_matching(const SimilarityInput<Scalar>& sim, int r,
                                  const TokenPartition& part,
                                  MatchingStats* stats = nullptr) {
  detail::validate_matching_inputs(sim, r, part);
  const MatrixX<Scalar> scores = detail::score_matrix(sim, part);
  if (stats) {
    stats->score_cells += static_cast<long long>(scores.rows()) * scores.cols();
    stats->ranking_passes += 1;
  }

  struct Candidate {
    Scalar score;
    int src;
    int dst;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(part.set_a.size());
  constexpr Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Scalar best = ninf;
    int best_j = -1;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (scores(i, j) > best) {  // strict: first (lowest) B index wins ties
        best = scores(i, j);
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best != ninf) {
      candidates.push_back({best, part.set_a[static_cast<std::size_t>(i)],
                            part.set_b[static_cast<std::size_t>(best_j)]});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) {
              if (x.score != y.score) return x.score > y.score;
              return x.src < y.src;
            });

  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(r),
                                          candidates.size());
  std::vector<MergeEdge> edges;
  edges.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    edges.push_back({candidates[i].src, candidates[i].dst});
  }
  return detail::finalize_plan(sim.n_tokens(), r, std::move(edges), part);
}

template <class Scalar>
MergePlan bipartite_soft_matching(const SimilarityInput<Scalar>& sim, int r,
                                  MatchingStats* stats = nullptr) {
  return bipartite_soft_matching(sim, r, partition_alternating(sim.n_tokens()),
                                 stats);
}

/// Sequential reference matcher: repeatedly take the globally most similar
/// (A, B) pair and merge it, consuming both endpoints, r times or until no
/// pair is left. Slower than bipartite matching by construction; kept as the
/// accuracy-reference baseline. Same tie-break rule, extended with lower dst
/// index when src indices also tie.
template <class Scalar>
MergePlan greedy_matching(const SimilarityInput<Scalar>& sim, int r,
                          const TokenPartition& part,
                          MatchingStats* stats = nullptr) {
  detail::validate_matching_inputs(sim, r, part);
  const MatrixX<Scalar> scores = detail::score_matrix(sim, part);
  if (stats) {
    stats->score_cells += static_cast<long long>(scores.rows()) * scores.cols();
  }

  constexpr Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  std::vector<bool> a_used(part.set_a.size(), false);
  std::vector<bool> b_used(part.set_b.size(), false);
  std::vector<MergeEdge> edges;
  for (int step = 0; step < r; ++step) {
    if (stats) stats->ranking_passes += 1;
    Scalar best = ninf;
    int best_i = -1, best_j = -1;
    // sets are scanned in ascending index order, so keeping only strictly
    // better scores realizes the (lower src, then lower dst) tie-break
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      if (a_used[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        if (b_used[static_cast<std::size_t>(j)]) continue;
        const Scalar s = scores(i, j);
        if (s == ninf) continue;
        if (best_i < 0 || s > best) {
          best = s;
          best_i = static_cast<int>(i);
          best_j = static_cast<int>(j);
        }
      }
    }
    if (best_i < 0) break;  // ran out of pairs
    a_used[static_cast<std::size_t>(best_i)] = true;
    b_used[static_cast<std::size_t>(best_j)] = true;
    edges.push_back({part.set_a[static_cast<std::size_t>(best_i)],
                     part.set_b[static_cast<std::size_t>(best_j)]});
  }
  return detail::finalize_plan(sim.n_tokens(), r, std::move(edges), part);
}

template <class Scalar>
MergePlan greedy_matching(const SimilarityInput<Scalar>& sim, int r,
                          MatchingStats* stats = nullptr) {
  return greedy_matching(sim, r, partition_alternating(sim.n_tokens()), stats);
}

/// Removes r uniformly random non-protected tokens. Deterministic per seed.
inline PrunePlan random_prune(int n_tokens, int r,
                              std::span<const int> protected_ids,
                              std::uint64_t seed) {
  if (r < 0) throw std::invalid_argument("random_prune: r must be non-negative");
  std::vector<bool> is_protected(static_cast<std::size_t>(n_tokens), false);
  for (int p : protected_ids) {
    if (p < 0 || p >= n_tokens) {
      throw std::invalid_argument("random_prune: protected index out of range");
    }
    is_protected[static_cast<std::size_t>(p)] = true;
  }
  std::vector<int> eligible;
  for (int i = 0; i < n_tokens; ++i) {
    if (!is_protected[static_cast<std::size_t>(i)]) eligible.push_back(i);
  }
  if (static_cast<std::size_t>(r) > eligible.size()) {
    throw std::invalid_argument(
        "random_prune: r = " + std::to_string(r) + " exceeds the " +
        std::to_string(eligible.size()) + " prunable tokens");
  }
  // partial Fisher-Yates: the first r entries are the removed set
  Rng rng(seed);
  for (int i = 0; i < r; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   rng.bounded(eligible.size() - static_cast<std::size_t>(i));
    std::swap(eligible[static_cast<std::size_t>(i)], eligible[j]);
  }
  std::vector<bool> removed(static_cast<std::size_t>(n_tokens), false);
  for (int i = 0; i < r; ++i) {
    removed[static_cast<std::size_t>(eligible[static_cast<std::size_t>(i)])] = true;
  }
  PrunePlan plan;
  plan.n_in = n_tokens;
  for (int i = 0; i < n_tokens; ++i) {
    if (!removed[static_cast<std::size_t>(i)]) plan.kept.push_back(i);
  }
  return plan;
}

}  // namespace tome
