#pragma once

#include <array>

#include "fnar/types.hpp"

namespace fnar {

/// Dense order-3 tensor of doubles with value semantics.
///
/// Storage is contiguous with the first index fastest (column-major in the
/// first two indices, slices stacked along the third), so the mode-1
/// matricization is a zero-copy view and the mode-3 one a cheap transposed
/// view. Indices are 0-based; matricization modes are 1-based (1, 2, 3) to
/// match the usual multilinear-algebra convention.
///
/// Treat instances as immutable once shared: the mutable element accessor
/// exists for construction, after which concurrent readers are safe.
class Tensor3 {
 public:
  Tensor3() : dims_{0, 0, 0} {}

  Tensor3(Index d1, Index d2, Index d3) : dims_{d1, d2, d3} {
    if (d1 < 0 || d2 < 0 || d3 < 0)
      throw InvalidInput("Tensor3: dimensions must be non-negative");
    data_ = Vector::Zero(d1 * d2 * d3);
  }

  Index dim(int mode) const {
    check_mode(mode);
    return dims_[mode - 1];
  }

  Index size() const { return data_.size(); }

  double operator()(Index i1, Index i2, Index i3) const {
    return data_[offset(i1, i2, i3)];
  }
  double& operator()(Index i1, Index i2, Index i3) {
    return data_[offset(i1, i2, i3)];
  }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  /// Frontal slice X(:,:,k) as a d1 x d2 matrix view (no copy).
  Eigen::Map<const Matrix> slice(Index i3) const {
    if (i3 < 0 || i3 >= dims_[2]) throw InvalidInput("Tensor3: slice index out of range");
    return Eigen::Map<const Matrix>(data_.data() + i3 * dims_[0] * dims_[1],
                                    dims_[0], dims_[1]);
  }
  Eigen::Map<Matrix> slice(Index i3) {
    if (i3 < 0 || i3 >= dims_[2]) throw InvalidInput("Tensor3: slice index out of range");
    return Eigen::Map<Matrix>(data_.data() + i3 * dims_[0] * dims_[1],
                              dims_[0], dims_[1]);
  }

  bool same_dims(const Tensor3& other) const { return dims_ == other.dims_; }

  Tensor3& operator+=(const Tensor3& other) {
    if (!same_dims(other)) throw InvalidInput("Tensor3: dimension mismatch in +=");
    data_ += other.data_;
    return *this;
  }
  Tensor3& operator-=(const Tensor3& other) {
    if (!same_dims(other)) throw InvalidInput("Tensor3: dimension mismatch in -=");
    data_ -= other.data_;
    return *this;
  }

  static void check_mode(int mode) {
    if (mode < 1 || mode > 3) throw InvalidInput("Tensor3: mode must be 1, 2 or 3");
  }

 private:
  Index offset(Index i1, Index i2, Index i3) const {
    eigen_assert(i1 >= 0 && i1 < dims_[0] && i2 >= 0 && i2 < dims_[1] &&
                 i3 >= 0 && i3 < dims_[2]);
    return i1 + dims_[0] * (i2 + dims_[1] * i3);
  }

  std::array<Index, 3> dims_;
  Vector data_;
};

/// Mode-q matricization: rows indexed by i_q, columns by the remaining
/// indices with the lower-numbered one fastest. mat(X,1) is d1 x (d2*d3),
/// mat(X,2) is d2 x (d1*d3), mat(X,3) is d3 x (d1*d2).
Matrix mat(const Tensor3& x, int mode);

/// Inverse of mat: reshape a matricization back into a tensor with the
/// given dimensions. Throws if the matrix shape is inconsistent with them.
Tensor3 unmat(const Matrix& m, int mode, Index d1, Index d2, Index d3);

/// Mode-q product X x_q A: contracts the mode-q fiber index against the
/// columns of A, so dim q changes from d_q to A.rows().
Tensor3 mode_mul(const Tensor3& x, int mode, const Matrix& a);

double frobenius_norm(const Tensor3& x);

}  // namespace fnar
