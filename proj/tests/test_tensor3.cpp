#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fnar/tensor3.hpp"
#include "test_util.hpp"

using namespace fnar;
using testutil::kron;
using testutil::max_abs_diff;
using testutil::random_matrix;
using testutil::random_tensor;

namespace {

// ── Independent oracles ─────────────────────────────────────────────────────
// Everything below re-derives the tensor operations from the defining index
// formula, one scalar at a time, with no shared code with the library.

/// Column index of entry (i1,i2,i3) in the mode-q matricization:
/// j = sum over the non-q indices of i_k * J_k, where J_k multiplies the
/// dimensions of the non-q indices preceding k. All 0-based.
Index oracle_col(int mode, Index i1, Index i2, Index i3, Index d1, Index d2,
                 Index d3) {
  const Index idx[3] = {i1, i2, i3};
  const Index dims[3] = {d1, d2, d3};
  Index j = 0;
  Index stride = 1;
  for (int k = 0; k < 3; ++k) {
    if (k == mode - 1) continue;
    j += idx[k] * stride;
    stride *= dims[k];
  }
  return j;
}

Matrix oracle_mat(const Tensor3& x, int mode) {
  const Index d1 = x.dim(1), d2 = x.dim(2), d3 = x.dim(3);
  const Index dims[3] = {d1, d2, d3};
  Matrix m = Matrix::Zero(dims[mode - 1], d1 * d2 * d3 / std::max<Index>(dims[mode - 1], 1));
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j)
      for (Index k = 0; k < d3; ++k) {
        const Index row = (mode == 1) ? i : (mode == 2) ? j : k;
        m(row, oracle_col(mode, i, j, k, d1, d2, d3)) = x(i, j, k);
      }
  return m;
}

/// Mode-q product by explicit summation over the contracted index.
Tensor3 oracle_mode_mul(const Tensor3& x, int mode, const Matrix& a) {
  const Index d1 = x.dim(1), d2 = x.dim(2), d3 = x.dim(3);
  const Index p = a.rows();
  Tensor3 z(mode == 1 ? p : d1, mode == 2 ? p : d2, mode == 3 ? p : d3);
  for (Index i = 0; i < z.dim(1); ++i)
    for (Index j = 0; j < z.dim(2); ++j)
      for (Index k = 0; k < z.dim(3); ++k) {
        double s = 0.0;
        const Index len = x.dim(mode);
        for (Index q = 0; q < len; ++q) {
          const double xv = (mode == 1) ? x(q, j, k)
                          : (mode == 2) ? x(i, q, k)
                                        : x(i, j, q);
          const Index out = (mode == 1) ? i : (mode == 2) ? j : k;
          s += a(out, q) * xv;
        }
        z(i, j, k) = s;
      }
  return z;
}

/// The 3x4x2 worked example: entries 1..24 with the first index fastest.
Tensor3 worked_example() {
  Tensor3 x(3, 4, 2);
  double v = 1.0;
  for (Index k = 0; k < 2; ++k)
    for (Index j = 0; j < 4; ++j)
      for (Index i = 0; i < 3; ++i) x(i, j, k) = v++;
  return x;
}

}  // namespace

TEST_SUITE("tensor3") {

TEST_CASE("worked example: all three matricizations, entry for entry") {
  const Tensor3 x = worked_example();

  Matrix m1(3, 8);
  m1 << 1, 4, 7, 10, 13, 16, 19, 22,
        2, 5, 8, 11, 14, 17, 20, 23,
        3, 6, 9, 12, 15, 18, 21, 24;

  Matrix m2(4, 6);
  m2 << 1, 2, 3, 13, 14, 15,
        4, 5, 6, 16, 17, 18,
        7, 8, 9, 19, 20, 21,
        10, 11, 12, 22, 23, 24;

  Matrix m3(2, 12);
  for (Index j = 0; j < 12; ++j) {
    m3(0, j) = double(j + 1);
    m3(1, j) = double(j + 13);
  }

  CHECK(max_abs_diff(mat(x, 1), m1) == 0.0);
  CHECK(max_abs_diff(mat(x, 2), m2) == 0.0);
  CHECK(max_abs_diff(mat(x, 3), m3) == 0.0);

  // Against the index-formula oracle too, so the fixtures and the formula
  // corroborate each other.
  for (int q = 1; q <= 3; ++q)
    CHECK(max_abs_diff(mat(x, q), oracle_mat(x, q)) == 0.0);
}

TEST_CASE("worked example: Frobenius norm is exactly 70") {
  const Tensor3 x = worked_example();
  CHECK(frobenius_norm(x) == doctest::Approx(70.0).epsilon(1e-15));
  // sqrt(1^2 + ... + 24^2) = sqrt(4900)
  double ss = 0.0;
  for (int v = 1; v <= 24; ++v) ss += double(v) * double(v);
  CHECK(ss == 4900.0);
}

TEST_CASE("matricization round trip restores the tensor exactly") {
  std::mt19937 rng(7101);
  std::uniform_int_distribution<Index> dim(1, 6);
  for (int rep = 0; rep < 50; ++rep) {
    const Index d1 = dim(rng), d2 = dim(rng), d3 = dim(rng);
    const Tensor3 x = random_tensor(rng, d1, d2, d3);
    for (int q = 1; q <= 3; ++q) {
      const Tensor3 back = unmat(mat(x, q), q, d1, d2, d3);
      CHECK(max_abs_diff(back, x) == 0.0);
    }
  }
}

TEST_CASE("mode product matches the brute-force contraction oracle") {
  std::mt19937 rng(7102);
  std::uniform_int_distribution<Index> dim(1, 6);
  for (int rep = 0; rep < 60; ++rep) {
    const Index d1 = dim(rng), d2 = dim(rng), d3 = dim(rng);
    const Tensor3 x = random_tensor(rng, d1, d2, d3);
    for (int q = 1; q <= 3; ++q) {
      const Index dq = x.dim(q);
      const Matrix a = random_matrix(rng, dim(rng), dq);
      const Tensor3 z = mode_mul(x, q, a);
      const Tensor3 want = oracle_mode_mul(x, q, a);
      const double scale = want.size() ? want.data().cwiseAbs().maxCoeff() : 0.0;
      CHECK(max_abs_diff(z, want) <= 1e-12 * (1.0 + scale));
    }
  }
}

TEST_CASE("mode products along different modes commute") {
  std::mt19937 rng(7103);
  std::uniform_int_distribution<Index> dim(2, 5);
  for (int rep = 0; rep < 40; ++rep) {
    const Tensor3 x = random_tensor(rng, dim(rng), dim(rng), dim(rng));
    for (int q = 1; q <= 3; ++q)
      for (int s = q + 1; s <= 3; ++s) {
        const Matrix a = random_matrix(rng, dim(rng), x.dim(q));
        const Matrix b = random_matrix(rng, dim(rng), x.dim(s));
        const Tensor3 left = mode_mul(mode_mul(x, q, a), s, b);
        const Tensor3 right = mode_mul(mode_mul(x, s, b), q, a);
        const double scale = left.data().cwiseAbs().maxCoeff();
        CHECK(max_abs_diff(left, right) <= 1e-12 * (1.0 + scale));
      }
  }
}

TEST_CASE("repeated products along one mode compose: X xq A xq B = X xq (BA)") {
  std::mt19937 rng(7104);
  std::uniform_int_distribution<Index> dim(2, 5);
  for (int rep = 0; rep < 40; ++rep) {
    const Tensor3 x = random_tensor(rng, dim(rng), dim(rng), dim(rng));
    for (int q = 1; q <= 3; ++q) {
      const Matrix a = random_matrix(rng, dim(rng), x.dim(q));
      const Matrix b = random_matrix(rng, dim(rng), a.rows());
      const Tensor3 two_steps = mode_mul(mode_mul(x, q, a), q, b);
      const Tensor3 one_step = mode_mul(x, q, Matrix(b * a));
      const double scale = one_step.data().cwiseAbs().maxCoeff();
      CHECK(max_abs_diff(two_steps, one_step) <= 1e-12 * (1.0 + scale));
    }
  }
}

TEST_CASE("full multilinear transform satisfies the Kronecker identity") {
  // For Z = X x1 A1 x2 A2 x3 A3:
  //   mat_q(Z) = A_q mat_q(X) (kron of the other two, higher mode first)^T.
  std::mt19937 rng(7105);
  std::uniform_int_distribution<Index> dim(2, 4);
  for (int rep = 0; rep < 30; ++rep) {
    const Tensor3 x = random_tensor(rng, dim(rng), dim(rng), dim(rng));
    const Matrix a1 = random_matrix(rng, dim(rng), x.dim(1));
    const Matrix a2 = random_matrix(rng, dim(rng), x.dim(2));
    const Matrix a3 = random_matrix(rng, dim(rng), x.dim(3));
    const Tensor3 z = mode_mul(mode_mul(mode_mul(x, 1, a1), 2, a2), 3, a3);

    const Matrix rhs1 = a1 * oracle_mat(x, 1) * kron(a3, a2).transpose();
    const Matrix rhs2 = a2 * oracle_mat(x, 2) * kron(a3, a1).transpose();
    const Matrix rhs3 = a3 * oracle_mat(x, 3) * kron(a2, a1).transpose();

    for (int q = 1; q <= 3; ++q) {
      const Matrix& rhs = (q == 1) ? rhs1 : (q == 2) ? rhs2 : rhs3;
      const double scale = rhs.cwiseAbs().maxCoeff();
      CHECK(max_abs_diff(mat(z, q), rhs) <= 1e-12 * (1.0 + scale));
    }
  }
}

TEST_CASE("degenerate dimensions of size one survive every op") {
  std::mt19937 rng(7106);
  const std::vector<std::array<Index, 3>> shapes = {
      {1, 1, 1}, {1, 4, 2}, {3, 1, 2}, {3, 4, 1}, {1, 1, 5}};
  for (const auto& s : shapes) {
    const Tensor3 x = random_tensor(rng, s[0], s[1], s[2]);
    for (int q = 1; q <= 3; ++q) {
      CHECK(max_abs_diff(mat(x, q), oracle_mat(x, q)) == 0.0);
      CHECK(max_abs_diff(unmat(mat(x, q), q, s[0], s[1], s[2]), x) == 0.0);
      const Matrix a = random_matrix(rng, 3, x.dim(q));
      const Tensor3 want = oracle_mode_mul(x, q, a);
      CHECK(max_abs_diff(mode_mul(x, q, a), want) <= 1e-12);
    }
    CHECK(frobenius_norm(x) == doctest::Approx(std::sqrt(x.data().squaredNorm())));
  }
}

TEST_CASE("invalid modes and mismatched shapes are rejected") {
  const Tensor3 x = worked_example();
  CHECK_THROWS_AS(mat(x, 0), InvalidInput);
  CHECK_THROWS_AS(mat(x, 4), InvalidInput);
  CHECK_THROWS_AS(mode_mul(x, 2, Matrix::Zero(2, 3)), InvalidInput);  // needs 4 cols
  CHECK_THROWS_AS(unmat(Matrix::Zero(3, 7), 1, 3, 4, 2), InvalidInput);
  CHECK_THROWS_AS(unmat(Matrix::Zero(4, 6), 1, 3, 4, 2), InvalidInput);
  CHECK_THROWS_AS(Tensor3(-1, 2, 2), InvalidInput);
}

}  // TEST_SUITE
