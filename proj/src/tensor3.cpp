#include "fnar/tensor3.hpp"

namespace fnar {

namespace {

void check_compatible(const Matrix& a, Index fiber_len, int mode) {
  if (a.cols() != fiber_len)
    throw InvalidInput("mode_mul: matrix has " + std::to_string(a.cols()) +
                       " columns but mode " + std::to_string(mode) +
                       " has length " + std::to_string(fiber_len));
}

}  // namespace

Matrix mat(const Tensor3& x, int mode) {
  Tensor3::check_mode(mode);
  const Index d1 = x.dim(1), d2 = x.dim(2), d3 = x.dim(3);
  switch (mode) {
    case 1:
      return Eigen::Map<const Matrix>(x.data().data(), d1, d2 * d3);
    case 2: {
      Matrix m(d2, d1 * d3);
      for (Index k = 0; k < d3; ++k)
        m.middleCols(k * d1, d1) = x.slice(k).transpose();
      return m;
    }
    default:
      return Eigen::Map<const Matrix>(x.data().data(), d1 * d2, d3).transpose();
  }
}

Tensor3 unmat(const Matrix& m, int mode, Index d1, Index d2, Index d3) {
  Tensor3::check_mode(mode);
  const std::array<Index, 3> dims{d1, d2, d3};
  const Index rows = dims[mode - 1];
  const Index cols = d1 * d2 * d3 == 0 ? 0 : d1 * d2 * d3 / std::max<Index>(rows, 1);
  if (m.rows() != rows || m.cols() != cols || rows * cols != d1 * d2 * d3)
    throw InvalidInput("unmat: matrix shape inconsistent with target dimensions");

  Tensor3 x(d1, d2, d3);
  switch (mode) {
    case 1:
      Eigen::Map<Matrix>(x.data().data(), d1, d2 * d3) = m;
      break;
    case 2:
      for (Index k = 0; k < d3; ++k)
        x.slice(k) = m.middleCols(k * d1, d1).transpose();
      break;
    default:
      Eigen::Map<Matrix>(x.data().data(), d1 * d2, d3) = m.transpose();
      break;
  }
  return x;
}

Tensor3 mode_mul(const Tensor3& x, int mode, const Matrix& a) {
  Tensor3::check_mode(mode);
  const Index d1 = x.dim(1), d2 = x.dim(2), d3 = x.dim(3);
  const Index p = a.rows();
  check_compatible(a, x.dim(mode), mode);

  switch (mode) {
    case 1: {
      Tensor3 z(p, d2, d3);
      Eigen::Map<Matrix>(z.data().data(), p, d2 * d3) =
          a * Eigen::Map<const Matrix>(x.data().data(), d1, d2 * d3);
      return z;
    }
    case 2: {
      Tensor3 z(d1, p, d3);
      for (Index k = 0; k < d3; ++k) z.slice(k) = x.slice(k) * a.transpose();
      return z;
    }
    default: {
      Tensor3 z(d1, d2, p);
      Eigen::Map<Matrix>(z.data().data(), d1 * d2, p) =
          Eigen::Map<const Matrix>(x.data().data(), d1 * d2, d3) * a.transpose();
      return z;
    }
  }
}

double frobenius_norm(const Tensor3& x) { return x.data().norm(); }

}  // namespace fnar
