#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tome/plan.hpp"
#include "tome/types.hpp"

namespace tome {

/// Per-layer token state: features, how many original patches each token
/// stands for, and which ones. sum(sizes) and the union of sources are
/// invariant across merges; sources always partition the original patch id
/// set (plus the class-token id).
template <class Scalar>
struct TokenState {
  MatrixX<Scalar> features;                // N x C
  VectorXi sizes;                          // N, all >= 1
  std::vector<std::vector<int>> sources;   // N, each ascending

  int n_tokens() const { return static_cast<int>(features.rows()); }
  int width() const { return static_cast<int>(features.cols()); }

  long total_size() const {
    long s = 0;
    for (Eigen::Index i = 0; i < sizes.size(); ++i) s += sizes[i];
    return s;
  }
};

namespace detail {

inline std::vector<int> merge_sorted(const std::vector<int>& a,
                                     const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

template <class Scalar>
void check_state_plan(const TokenState<Scalar>& state, int plan_n_in) {
  if (state.n_tokens() != plan_n_in) {
    throw std::invalid_argument(
        "apply: plan built for " + std::to_string(plan_n_in) +
        " tokens, state has " + std::to_string(state.n_tokens()));
  }
  if (state.sizes.size() != state.features.rows() ||
      static_cast<Eigen::Index>(state.sources.size()) != state.features.rows()) {
    throw std::invalid_argument("apply: inconsistent token state");
  }
}

}  // namespace detail

/// Applies a merge plan to a token state.
///
/// Feature combination per destination group (the dst token plus every src
/// merged into it):
///   weighted_avg  mean weighted by token size
///   avg           unweighted mean
///   max           elementwise maximum
///   keep_one      the dst row, unchanged
/// Sizes always sum and sources always union, whatever the mode.
///
/// Accumulation runs in double, dst term first and then sources by ascending
/// index, so results are reproducible bit for bit. An empty plan returns the
/// input state unchanged.
template <class Scalar>
TokenState<Scalar> apply_merge(const TokenState<Scalar>& state,
                               const MergePlan& plan, CombineMode mode) {
  detail::check_state_plan(state, plan.n_in);
  for (const MergeEdge& e : plan.edges) {
    if (e.src < 0 || e.src >= plan.n_in || e.dst < 0 || e.dst >= plan.n_in) {
      throw std::invalid_argument("apply_merge: edge index out of range");
    }
  }
  if (plan.is_noop()) return state;

  // srcs per destination, ascending
  std::vector<std::vector<int>> srcs_of(static_cast<std::size_t>(plan.n_in));
  for (const MergeEdge& e : plan.edges) {
    srcs_of[static_cast<std::size_t>(e.dst)].push_back(e.src);
  }
  for (auto& v : srcs_of) std::sort(v.begin(), v.end());

  const int n_out = plan.n_out();
  const Eigen::Index c = state.features.cols();
  TokenState<Scalar> out;
  out.features.resize(n_out, c);
  out.sizes.resize(n_out);
  out.sources.resize(static_cast<std::size_t>(n_out));

  Eigen::Index row = 0;
  for (int a : plan.unmerged_a) {
    out.features.row(row) = state.features.row(a);
    out.sizes[row] = state.sizes[a];
    out.sources[static_cast<std::size_t>(row)] =
        state.sources[static_cast<std::size_t>(a)];
    ++row;
  }
  for (int b : plan.set_b) {
    const auto& srcs = srcs_of[static_cast<std::size_t>(b)];
    long size_sum = state.sizes[b];
    auto sources = state.sources[static_cast<std::size_t>(b)];
    for (int s : srcs) {
      size_sum += state.sizes[s];
      sources = detail::merge_sorted(sources, state.sources[static_cast<std::size_t>(s)]);
    }

    if (srcs.empty() || mode == CombineMode::keep_one) {
      out.features.row(row) = state.features.row(b);
    } else {
      using RowVecD = Eigen::Matrix<double, 1, Eigen::Dynamic>;
      switch (mode) {
        case CombineMode::weighted_avg: {
          RowVecD acc = state.features.row(b).template cast<double>() *
                        static_cast<double>(state.sizes[b]);
          for (int s : srcs) {
            acc += state.features.row(s).template cast<double>() *
                   static_cast<double>(state.sizes[s]);
          }
          out.features.row(row) =
              (acc / static_cast<double>(size_sum)).template cast<Scalar>();
          break;
        }
        case CombineMode::avg: {
          RowVecD acc = state.features.row(b).template cast<double>();
          for (int s : srcs) acc += state.features.row(s).template cast<double>();
          out.features.row(row) =
              (acc / static_cast<double>(srcs.size() + 1)).template cast<Scalar>();
          break;
        }
        case CombineMode::max: {
          Eigen::Matrix<Scalar, 1, Eigen::Dynamic> acc = state.features.row(b);
          for (int s : srcs) acc = acc.cwiseMax(state.features.row(s));
          out.features.row(row) = acc;
          break;
        }
        case CombineMode::keep_one:
          break;  // handled above
      }
    }
    out.sizes[row] = static_cast<int>(size_sum);
    out.sources[static_cast<std::size_t>(row)] = std::move(sources);
    ++row;
  }
  return out;
}

/// Keeps only the plan's surviving rows, ascending. Sizes and sources of the
/// dropped tokens are discarded: pruning loses them.
template <class Scalar>
TokenState<Scalar> apply_prune(const TokenState<Scalar>& state,
                               const PrunePlan& plan) {
  detail::check_state_plan(state, plan.n_in);
  TokenState<Scalar> out;
  out.features.resize(static_cast<Eigen::Index>(plan.kept.size()),
                      state.features.cols());
  out.sizes.resize(static_cast<Eigen::Index>(plan.kept.size()));
  out.sources.resize(plan.kept.size());
  Eigen::Index row = 0;
  for (int k : plan.kept) {
    if (k < 0 || k >= state.n_tokens()) {
      throw std::invalid_argument("apply_prune: kept index out of range");
    }
    out.features.row(row) = state.features.row(k);
    out.sizes[row] = state.sizes[k];
    out.sources[static_cast<std::size_t>(row)] =
        state.sources[static_cast<std::size_t>(k)];
    ++row;
  }
  return out;
}

}  // namespace tome
