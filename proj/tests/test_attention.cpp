#include <doctest.h>

#include "oracles.hpp"
#include "tome/attention.hpp"
#include "tome/rng.hpp"

using namespace tome;

namespace {

AttentionInputs<double> random_inputs(Rng& rng, int n, int d, int heads,
                                      int max_size) {
  AttentionInputs<double> in;
  in.sizes.resize(n);
  for (int t = 0; t < n; ++t) {
    in.sizes[t] = 1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(max_size)));
  }
  for (int h = 0; h < heads; ++h) {
    MatrixX<double> q(n, d), k(n, d), v(n, d);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < d; ++x) {
        q(y, x) = rng.uniform(-1.0, 1.0);
        k(y, x) = rng.uniform(-1.0, 1.0);
        v(y, x) = rng.uniform(-1.0, 1.0);
      }
    }
    in.q.push_back(std::move(q));
    in.k.push_back(std::move(k));
    in.v.push_back(std::move(v));
  }
  return in;
}

}  // namespace

TEST_CASE("unit sizes make proportional attention exactly standard") {
  Rng rng(2);
  auto in = random_inputs(rng, 6, 4, 2, 1);
  const auto with = proportional_attention(in, true);
  const auto without = proportional_attention(in, false);
  for (std::size_t h = 0; h < with.size(); ++h) {
    CHECK(with[h] == without[h]);
  }
}

TEST_CASE("duplicate-key worked example: sizes [2,1] weigh 2:1") {
  AttentionInputs<double> in;
  MatrixX<double> q(1, 1), k(2, 1), v(2, 1);
  q << 0.0;
  k << 0.0, 0.0;
  v << 1.0, 0.0;
  // a single query row; pad q to the key count with an irrelevant row
  MatrixX<double> q2(2, 1);
  q2 << 0.0, 0.0;
  in.q = {q2};
  in.k = {k};
  in.v = {v};
  in.sizes.resize(2);
  in.sizes << 2, 1;

  const auto out = proportional_attention(in, true);
  CHECK(out[0](0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // oracle: three unit-size tokens K=[0,0,0], V=[1,1,0] under standard attention
  AttentionInputs<double> expanded;
  MatrixX<double> qe(3, 1), ke(3, 1), ve(3, 1);
  qe << 0.0, 0.0, 0.0;
  ke << 0.0, 0.0, 0.0;
  ve << 1.0, 1.0, 0.0;
  expanded.q = {qe};
  expanded.k = {ke};
  expanded.v = {ve};
  expanded.sizes = VectorXi::Ones(3);
  const auto ref = proportional_attention(expanded, false);
  CHECK(ref[0](0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("single token attends to itself whatever its size") {
  for (int size : {1, 4, 100}) {
    AttentionInputs<double> in;
    MatrixX<double> q(1, 2), k(1, 2), v(1, 2);
    q << 0.3, -0.7;
    k << 1.0, 2.0;
    v << 5.0, -1.0;
    in.q = {q};
    in.k = {k};
    in.v = {v};
    in.sizes.resize(1);
    in.sizes << size;
    const auto out = proportional_attention(in, true);
    CHECK(out[0](0, 0) == 5.0);
    CHECK(out[0](0, 1) == -1.0);
  }
}

TEST_CASE("duplicate-key equivalence on random instances") {
  Rng rng(7);
  for (int i = 0; i < 120; ++i) {
    const int n = 1 + static_cast<int>(rng.bounded(8));
    const int d = 1 + static_cast<int>(rng.bounded(6));
    const int heads = 1 + static_cast<int>(rng.bounded(3));
    const auto in = random_inputs(rng, n, d, heads, 4);
    const auto got = proportional_attention(in, true);
    const auto want = oracles::expanded_attention(in);
    for (int h = 0; h < heads; ++h) {
      const double rel =
          (got[static_cast<std::size_t>(h)] - want[static_cast<std::size_t>(h)]).norm() /
          std::max(1e-30, want[static_cast<std::size_t>(h)].norm());
      CHECK(rel <= 1e-6);
    }
  }
}

TEST_CASE("attention rows sum to one") {
  Rng rng(13);
  for (int i = 0; i < 30; ++i) {
    const int n = 2 + static_cast<int>(rng.bounded(7));
    auto in = random_inputs(rng, n, n, 1, 4);
    // identity values make the output the attention matrix itself
    in.v[0] = MatrixX<double>::Identity(n, n);
    const auto rows = proportional_attention(in, true);
    for (Eigen::Index r = 0; r < rows[0].rows(); ++r) {
      CHECK(rows[0].row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("softmax is shift invariant") {
  // multiplying every size by the same factor adds one constant to all
  // logits of every row; the softmax must not move
  Rng rng(19);
  auto in = random_inputs(rng, 5, 3, 1, 3);
  const auto base = proportional_attention(in, true);
  AttentionInputs<double> scaled = in;
  for (Eigen::Index t = 0; t < scaled.sizes.size(); ++t) scaled.sizes[t] *= 7;
  const auto shifted = proportional_attention(scaled, true);
  for (std::size_t h = 0; h < base.size(); ++h) {
    const double diff = (base[h] - shifted[h]).cwiseAbs().maxCoeff();
    CHECK(diff <= 1e-9);
  }
}

TEST_CASE("non-positive size is rejected") {
  Rng rng(23);
  auto in = random_inputs(rng, 4, 2, 1, 2);
  in.sizes[2] = 0;
  CHECK_THROWS_AS(proportional_attention(in, true), std::invalid_argument);
  in.sizes[2] = -3;
  CHECK_THROWS_AS(proportional_attention(in, false), std::invalid_argument);
}

TEST_CASE("qkv projection") {
  SUBCASE("identity weights split the tokens") {
    const int n = 3, c = 4;
    MatrixX<double> tokens(n, c);
    tokens << 1, 2, 3, 4,
              5, 6, 7, 8,
              9, 10, 11, 12;
    MatrixX<double> w = MatrixX<double>::Zero(3 * c, c);
    w.topRows(c).setIdentity();
    w.middleRows(c, c).setIdentity();
    w.bottomRows(c).setIdentity();
    const VectorX<double> b = VectorX<double>::Zero(3 * c);
    const auto in = qkv_project(tokens, w, b, 2, VectorXi::Ones(n));
    REQUIRE(in.n_heads() == 2);
    CHECK(in.q[0] == tokens.leftCols(2));
    CHECK(in.q[1] == tokens.rightCols(2));
    CHECK(in.k[0] == tokens.leftCols(2));
    CHECK(in.v[1] == tokens.rightCols(2));
  }
  SUBCASE("zero value projection zeroes the attention output") {
    Rng rng(3);
    const int n = 4, c = 4;
    MatrixX<double> tokens(n, c);
    for (Eigen::Index i = 0; i < tokens.size(); ++i) {
      tokens(i / c, i % c) = rng.uniform(-1.0, 1.0);
    }
    MatrixX<double> w(3 * c, c);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-1.0, 1.0);
    }
    w.bottomRows(c).setZero();  // V weights
    const VectorX<double> zero_bias = VectorX<double>::Zero(3 * c);
    const auto in = qkv_project(tokens, w, zero_bias, 2, VectorXi::Ones(n));
    const auto out = proportional_attention(in, false);
    for (const auto& head : out) {
      CHECK(head.cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("random instance matches a naive matmul evaluation") {
    Rng rng(5);
    const int n = 2, c = 4, heads = 2;
    MatrixX<double> tokens(n, c), w(3 * c, c);
    VectorX<double> b(3 * c);
    for (Eigen::Index i = 0; i < tokens.rows(); ++i) {
      for (Eigen::Index j = 0; j < tokens.cols(); ++j) tokens(i, j) = rng.uniform(-1, 1);
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-1, 1);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-1, 1);

    const auto in = qkv_project(tokens, w, b, heads, VectorXi::Ones(n));
    const int d = c / heads;
    for (int h = 0; h < heads; ++h) {
      for (int row = 0; row < n; ++row) {
        for (int col = 0; col < d; ++col) {
          double q = b[h * d + col];
          double k = b[c + h * d + col];
          double v = b[2 * c + h * d + col];
          for (int x = 0; x < c; ++x) {
            q += tokens(row, x) * w(h * d + col, x);
            k += tokens(row, x) * w(c + h * d + col, x);
            v += tokens(row, x) * w(2 * c + h * d + col, x);
          }
          CHECK(in.q[static_cast<std::size_t>(h)](row, col) == doctest::Approx(q).epsilon(1e-12));
          CHECK(in.k[static_cast<std::size_t>(h)](row, col) == doctest::Approx(k).epsilon(1e-12));
          CHECK(in.v[static_cast<std::size_t>(h)](row, col) == doctest::Approx(v).epsilon(1e-12));
        }
      }
    }
  }
  SUBCASE("shape mismatch rejected") {
    MatrixX<double> tokens(2, 4);
    tokens.setZero();
    MatrixX<double> w(8, 4);  // should be 12 x 4
    w.setZero();
    const VectorX<double> b = VectorX<double>::Zero(8);
    CHECK_THROWS_AS(qkv_project(tokens, w, b, 2, VectorXi::Ones(2)),
                    std::invalid_argument);
  }
}

TEST_CASE("output projection concatenates heads then projects") {
  Rng rng(9);
  const int n = 3, d = 2;
  MatrixX<double> h0(n, d), h1(n, d);
  for (Eigen::Index i = 0; i < h0.rows(); ++i) {
    for (Eigen::Index j = 0; j < h0.cols(); ++j) {
      h0(i, j) = rng.uniform(-1, 1);
      h1(i, j) = rng.uniform(-1, 1);
    }
  }
  const MatrixX<double> w = MatrixX<double>::Identity(4, 4);
  const VectorX<double> zero = VectorX<double>::Zero(4);
  const auto out = output_project(std::vector<MatrixX<double>>{h0, h1}, w, zero);
  CHECK(out.leftCols(2) == h0);
  CHECK(out.rightCols(2) == h1);
}
