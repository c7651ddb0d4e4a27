#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tome/types.hpp"

namespace tome {

/// Per-head query/key/value tensors plus the current token sizes. Each head
/// holds an N x d_head matrix.
template <class Scalar>
struct AttentionInputs {
  std::vector<MatrixX<Scalar>> q, k, v;
  VectorXi sizes;

  int n_heads() const { return static_cast<int>(q.size()); }
  int n_tokens() const { return q.empty() ? 0 : static_cast<int>(q.front().rows()); }
  int d_head() const { return q.empty() ? 0 : static_cast<int>(q.front().cols()); }
};

namespace detail {

template <class Scalar>
void validate_attention(const AttentionInputs<Scalar>& in) {
  if (in.q.empty() || in.q.size() != in.k.size() || in.q.size() != in.v.size()) {
    throw std::invalid_argument("attention: inconsistent head counts");
  }
  const Eigen::Index n = in.q.front().rows();
  const Eigen::Index d = in.q.front().cols();
  for (std::size_t h = 0; h < in.q.size(); ++h) {
    if (in.q[h].rows() != n || in.q[h].cols() != d || in.k[h].rows() != n ||
        in.k[h].cols() != d || in.v[h].rows() != n || in.v[h].cols() != d) {
      throw std::invalid_argument("attention: inconsistent head shapes");
    }
  }
  if (in.sizes.size() != n) {
    throw std::invalid_argument("attention: sizes length does not match tokens");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (in.sizes[i] <= 0) {
      throw std::invalid_argument("attention: non-positive token size at index " +
                                  std::to_string(i));
    }
  }
}

/// Numerically stable row softmax in place: per-row max subtraction,
/// exponentials and the normalizing sum accumulated in double.
template <class Scalar>
void softmax_rows(MatrixX<Scalar>& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double e = std::exp(static_cast<double>(logits(i, j)) -
                                static_cast<double>(m));
      sum += e;
      logits(i, j) = static_cast<Scalar>(e);
    }
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      logits(i, j) = static_cast<Scalar>(static_cast<double>(logits(i, j)) / sum);
    }
  }
}

}  // namespace detail

/// Scaled dot-product attention per head. With `use_prop` set, log(size of
/// key j) is added to column j of the logits before the softmax, so a token
/// of size s weighs like s identical unit-size tokens. Keys stay available
/// on the inputs for downstream similarity scoring.
template <class Scalar>
std::vector<MatrixX<Scalar>> proportional_attention(
    const AttentionInputs<Scalar>& in, bool use_prop) {
  detail::validate_attention(in);
  const Eigen::Index n = in.q.front().rows();
  const Scalar inv_sqrt_d =
      static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(in.d_head())));

  VectorX<Scalar> log_sizes;
  if (use_prop) {
    log_sizes.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      log_sizes[j] = static_cast<Scalar>(std::log(static_cast<double>(in.sizes[j])));
    }
  }

  std::vector<MatrixX<Scalar>> out;
  out.reserve(in.q.size());
  for (std::size_t h = 0; h < in.q.size(); ++h) {
    MatrixX<Scalar> logits(n, n);
    logits.noalias() = in.q[h] * in.k[h].transpose();
    logits *= inv_sqrt_d;
    if (use_prop) logits.rowwise() += log_sizes.transpose();
    detail::softmax_rows(logits);
    MatrixX<Scalar> head(n, in.v[h].cols());
    head.noalias() = logits * in.v[h];
    out.push_back(std::move(head));
  }
  return out;
}

/// Linear QKV projection with bias, split into heads by contiguous channel
/// blocks. Column layout of `qkv_weight` output: [Q | K | V], each C wide.
template <class Scalar>
AttentionInputs<Scalar> qkv_project(const MatrixX<Scalar>& tokens,
                                    const MatrixX<Scalar>& qkv_weight,
                                    const VectorX<Scalar>& qkv_bias,
                                    int n_heads, VectorXi sizes) {
  const Eigen::Index n = tokens.rows();
  const Eigen::Index c = tokens.cols();
  if (qkv_weight.rows() != 3 * c || qkv_weight.cols() != c ||
      qkv_bias.size() != 3 * c) {
    throw std::invalid_argument("qkv_project: weight shape mismatch");
  }
  if (n_heads < 1 || c % n_heads != 0) {
    throw std::invalid_argument("qkv_project: width not divisible by heads");
  }
  const Eigen::Index d = c / n_heads;

  MatrixX<Scalar> proj(n, 3 * c);
  proj.noalias() = tokens * qkv_weight.transpose();
  proj.rowwise() += qkv_bias.transpose();

  AttentionInputs<Scalar> out;
  out.sizes = std::move(sizes);
  out.q.reserve(static_cast<std::size_t>(n_heads));
  out.k.reserve(static_cast<std::size_t>(n_heads));
  out.v.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    out.q.push_back(proj.middleCols(h * d, d));
    out.k.push_back(proj.middleCols(c + h * d, d));
    out.v.push_back(proj.middleCols(2 * c + h * d, d));
  }
  return out;
}

/// Concatenates heads back to N x C and applies the output projection.
template <class Scalar>
MatrixX<Scalar> output_project(const std::vector<MatrixX<Scalar>>& heads,
                               const MatrixX<Scalar>& proj_weight,
                               const VectorX<Scalar>& proj_bias) {
  if (heads.empty()) throw std::invalid_argument("output_project: no heads");
  const Eigen::Index n = heads.front().rows();
  const Eigen::Index d = heads.front().cols();
  const Eigen::Index c = d * static_cast<Eigen::Index>(heads.size());
  if (proj_weight.rows() != c || proj_weight.cols() != c || proj_bias.size() != c) {
    throw std::invalid_argument("output_project: weight shape mismatch");
  }
  MatrixX<Scalar> merged(n, c);
  for (std::size_t h = 0; h < heads.size(); ++h) {
    merged.middleCols(static_cast<Eigen::Index>(h) * d, d) = heads[h];
  }
  MatrixX<Scalar> out(n, c);
  out.noalias() = merged * proj_weight.transpose();
  out.rowwise() += proj_bias.transpose();
  return out;
}

}  // namespace tome
