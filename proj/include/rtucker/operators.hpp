#pragma once

// Matrix-free views of mode unfoldings. Randomized range finding only needs
// X * M, X^T * M and X * Omega, so unfoldings are never materialized.

#include "rtucker/linalg.hpp"
#include "rtucker/sketch.hpp"
#include "rtucker/tensor_ops.hpp"

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

template <class Op>
concept LinearOperator = requires(const Op& op, const Matrix& m, const SketchStream& s, Index k) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(m) } -> std::same_as<Matrix>;             // X M
  { op.apply_transposed(m) } -> std::same_as<Matrix>;  // X^T M
  { op.sketch(s, k) } -> std::same_as<Matrix>;         // X Omega[:, cursor : cursor + k]
  { op.squared_norm() } -> std::convertible_to<double>;
};

/// Operators that can stream their columns for TSQR-based left SVDs.
template <class Op>
concept SlabOperator = LinearOperator<Op> && requires(const Op& op) {
  op.for_each_slab([](Index, const Matrix&) {});
};

namespace detail {

inline void check_inner(Index expected, Index got, const char* what) {
  if (expected != got)
    throw std::invalid_argument(std::string(what) + ": inner dimension " + std::to_string(got) +
                                " does not match " + std::to_string(expected));
}

/// Residual of projecting the columns of a slab operator onto range(Q).
template <class Op>
double slab_residual2(const Op& op, const Matrix& q) {
  check_inner(op.rows(), q.rows(), "residual_squared_norm");
  double total = 0.0;
  op.for_each_slab([&](Index, const auto& slab) {
    const Matrix r = slab - (slab * q) * q.transpose();
    total += r.squaredNorm();
  });
  return total;
}

}  // namespace detail

/// Borrowed explicit matrix.
class MatrixOperator {
 public:
  explicit MatrixOperator(const Matrix& x) : x_(&x) {}

  Index rows() const { return x_->rows(); }
  Index cols() const { return x_->cols(); }
  Matrix apply(const Matrix& m) const {
    detail::check_inner(cols(), m.rows(), "apply");
    return *x_ * m;
  }
  Matrix apply_transposed(const Matrix& m) const {
    detail::check_inner(rows(), m.rows(), "apply_transposed");
    return x_->transpose() * m;
  }
  Matrix sketch(const SketchStream& s, Index k) const {
    Matrix omega(cols(), k);
    s.fill_rows(0, omega);
    return *x_ * omega;
  }
  double squared_norm() const { return x_->squaredNorm(); }
  double residual_squared_norm(const Matrix& q) const { return detail::slab_residual2(*this, q); }

  template <class F>
  void for_each_slab(F&& f) const {
    const Index chunk = std::max<Index>(256, 16384 / std::max<Index>(1, rows()));
    for (Index c0 = 0; c0 < cols(); c0 += chunk) {
      const Index w = std::min(chunk, cols() - c0);
      f(c0, x_->middleCols(c0, w).transpose());
    }
  }

 private:
  const Matrix* x_;
};

/// Mode unfolding of a dense tensor, read in place.
class DenseUnfolding {
 public:
  DenseUnfolding(const DenseTensor& x, Index mode) : x_(&x), mode_(mode) { x.shape().check_mode(mode); }

  Index rows() const { return x_->shape()[mode_]; }
  Index cols() const { return x_->shape().complement(mode_); }

  Matrix apply(const Matrix& m) const {
    detail::check_inner(cols(), m.rows(), "apply");
    Matrix y = Matrix::Zero(rows(), m.cols());
    for_each_slab([&](Index c0, const auto& slab) {
      y.noalias() += slab.transpose() * m.middleRows(c0, slab.rows());
    });
    return y;
  }

  Matrix apply_transposed(const Matrix& m) const {
    detail::check_inner(rows(), m.rows(), "apply_transposed");
    Matrix y(cols(), m.cols());
    for_each_slab([&](Index c0, const auto& slab) { y.middleRows(c0, slab.rows()).noalias() = slab * m; });
    return y;
  }

  Matrix sketch(const SketchStream& s, Index k) const {
    Matrix y = Matrix::Zero(rows(), k);
    Matrix omega;
    for_each_slab([&](Index c0, const auto& slab) {
      omega.resize(slab.rows(), k);
      s.fill_rows(c0, omega);
      y.noalias() += slab.transpose() * omega;
    });
    return y;
  }

  double squared_norm() const { return rtucker::squared_norm(x_->values()); }
  double residual_squared_norm(const Matrix& q) const { return detail::slab_residual2(*this, q); }

  template <class F>
  void for_each_slab(F&& f) const {
    detail::for_each_slab(*x_, mode_, std::forward<F>(f));
  }

 private:
  const DenseTensor* x_;
  Index mode_;
};

/// Mode unfolding of a sparse tensor; costs scale with nnz.
class SparseUnfolding {
 public:
  SparseUnfolding(const SparseTensor& x, Index mode) : x_(&x), mode_(mode) {
    const Shape& s = x.shape();
    s.check_mode(mode);
    row_.resize(static_cast<std::size_t>(x.nnz()));
    col_.resize(static_cast<std::size_t>(x.nnz()));
    for (Index e = 0; e < x.nnz(); ++e) {
      Index col = 0, stride = 1;
      for (Index k = 0; k < x.order(); ++k) {
        if (k == mode) continue;
        col += x.index(e, k) * stride;
        stride *= s[k];
      }
      row_[static_cast<std::size_t>(e)] = x.index(e, mode);
      col_[static_cast<std::size_t>(e)] = col;
    }
  }

  Index rows() const { return x_->shape()[mode_]; }
  Index cols() const { return x_->shape().complement(mode_); }

  Matrix apply(const Matrix& m) const {
    detail::check_inner(cols(), m.rows(), "apply");
    Matrix y = Matrix::Zero(rows(), m.cols());
    for (Index e = 0; e < x_->nnz(); ++e)
      y.row(row_[static_cast<std::size_t>(e)]) += x_->value(e) * m.row(col_[static_cast<std::size_t>(e)]);
    return y;
  }

  Matrix apply_transposed(const Matrix& m) const {
    detail::check_inner(rows(), m.rows(), "apply_transposed");
    Matrix y = Matrix::Zero(cols(), m.cols());
    for (Index e = 0; e < x_->nnz(); ++e)
      y.row(col_[static_cast<std::size_t>(e)]) += x_->value(e) * m.row(row_[static_cast<std::size_t>(e)]);
    return y;
  }

  /// Omega rows are generated per entry, so only columns of the unfolding that
  /// hold nonzeros are ever drawn.
  Matrix sketch(const SketchStream& s, Index k) const {
    Matrix yt = Matrix::Zero(k, rows());
    Vector omega_row(k);
    std::vector<std::uint64_t> keys(static_cast<std::size_t>(k));
    for (Index t = 0; t < k; ++t) keys[static_cast<std::size_t>(t)] = s.column_key(s.cursor() + t);
    for (Index e = 0; e < x_->nnz(); ++e) {
      const Index c = col_[static_cast<std::size_t>(e)];
      for (Index t = 0; t < k; ++t)
        omega_row(t) = SketchStream::entry_with_key(keys[static_cast<std::size_t>(t)], c);
      yt.col(row_[static_cast<std::size_t>(e)]) += x_->value(e) * omega_row;
    }
    return yt.transpose();
  }

  double squared_norm() const { return rtucker::squared_norm(x_->raw_values()); }

  /// ||X - Q Q^T X||_F^2 formed column by column over the nonzero columns.
  double residual_squared_norm(const Matrix& q) const {
    detail::check_inner(rows(), q.rows(), "residual_squared_norm");
    std::vector<Index> perm(static_cast<std::size_t>(x_->nnz()));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
      return col_[static_cast<std::size_t>(a)] < col_[static_cast<std::size_t>(b)];
    });
    double total = 0.0;
    Vector r(rows()), v(q.cols());
    for (std::size_t a = 0; a < perm.size();) {
      std::size_t b = a;
      const Index c = col_[static_cast<std::size_t>(perm[a])];
      v.setZero();
      while (b < perm.size() && col_[static_cast<std::size_t>(perm[b])] == c) {
        const Index e = perm[b++];
        v += x_->value(e) * q.row(row_[static_cast<std::size_t>(e)]).transpose();
      }
      r.noalias() = -q * v;
      for (std::size_t t = a; t < b; ++t) r(row_[static_cast<std::size_t>(perm[t])]) += x_->value(perm[t]);
      total += r.squaredNorm();
      a = b;
    }
    return total;
  }

 private:
  const SparseTensor* x_;
  Index mode_;
  std::vector<Index> row_;
  std::vector<Index> col_;
};

static_assert(SlabOperator<MatrixOperator>);
static_assert(SlabOperator<DenseUnfolding>);
static_assert(LinearOperator<SparseUnfolding>);

/// Left singular vectors and singular values of a slab-streamable operator,
/// via TSQR of its transpose. Accurate for the small singular values as the
/// Gram matrix is never formed.
template <SlabOperator Op>
SvdResult left_svd(const Op& op) {
  RFactorAccumulator acc(op.rows());
  op.for_each_slab([&](Index, const auto& slab) { acc.add(slab); });
  return left_svd_from_r(acc.finish());
}

}  // namespace rtucker
