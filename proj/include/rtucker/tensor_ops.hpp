#pragma once

// Unfolding, folding, mode products and norms for dense and sparse tensors.
//
// Column order of the mode-j unfolding: the remaining modes are enumerated
// with the lower modes varying fastest, i.e. column
//   c = sum_{k != j} i_k * prod_{m < k, m != j} I_m.
// With this order Y = X x_1 A_1 ... x_d A_d satisfies
//   Y_(j) = A_j X_(j) (A_d kron ... kron A_{j+1} kron A_{j-1} kron ... kron A_1)^T.
// For the first-mode-fastest storage the tensor is a (L, I_j, R) array with
// L = prod_{k<j} I_k and R = prod_{k>j} I_k, and column c = l + L * r.

#include "rtucker/dense_tensor.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/sparse_tensor.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;

namespace detail {

/// Calls f(col_begin, slab) for consecutive column ranges of the mode-`mode`
/// unfolding, where `slab` is the transpose of those columns (rows x I_mode).
template <class F>
void for_each_slab(const DenseTensor& x, Index mode, F&& f) {
  const Shape& s = x.shape();
  const Index m = s[mode], left = s.left(mode), right = s.right(mode);
  if (left == 1) {
    ConstMatrixMap mat(x.data(), m, right);
    const Index chunk = std::max<Index>(256, 16384 / std::max<Index>(1, m));
    for (Index c0 = 0; c0 < right; c0 += chunk) {
      const Index w = std::min(chunk, right - c0);
      f(c0, mat.middleCols(c0, w).transpose());
    }
    return;
  }
  for (Index r = 0; r < right; ++r) f(r * left, ConstMatrixMap(x.data() + r * left * m, left, m));
}

}  // namespace detail

/// Explicit mode-`mode` unfolding: I_mode x prod_{k != mode} I_k.
inline Matrix unfold(const DenseTensor& x, Index mode) {
  x.shape().check_mode(mode);
  Matrix out(x.shape()[mode], x.shape().complement(mode));
  detail::for_each_slab(x, mode, [&](Index c0, const auto& slab) {
    out.middleCols(c0, slab.rows()) = slab.transpose();
  });
  return out;
}

/// Sparse mode unfolding with the same column order as the dense one.
inline SparseMatrix unfold(const SparseTensor& x, Index mode) {
  const Shape& s = x.shape();
  s.check_mode(mode);
  std::vector<Eigen::Triplet<double, Index>> trips;
  trips.reserve(static_cast<std::size_t>(x.nnz()));
  for (Index e = 0; e < x.nnz(); ++e) {
    Index col = 0, stride = 1;
    for (Index k = 0; k < x.order(); ++k) {
      if (k == mode) continue;
      col += x.index(e, k) * stride;
      stride *= s[k];
    }
    trips.emplace_back(x.index(e, mode), col, x.value(e));
  }
  SparseMatrix out(s[mode], s.complement(mode));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// Inverse of unfold.
inline DenseTensor fold(const Matrix& m, Index mode, const Shape& shape) {
  shape.check_mode(mode);
  if (m.rows() != shape[mode] || m.cols() != shape.complement(mode))
    throw std::invalid_argument("fold: matrix is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", shape " + shape.to_string() +
                                " needs " + std::to_string(shape[mode]) + "x" +
                                std::to_string(shape.complement(mode)));
  DenseTensor out(shape);
  const Index n = shape[mode], left = shape.left(mode), right = shape.right(mode);
  if (left == 1) {
    MatrixMap(out.data(), n, right) = m;
  } else {
    for (Index r = 0; r < right; ++r)
      MatrixMap(out.data() + r * left * n, left, n) = m.middleCols(r * left, left).transpose();
  }
  return out;
}

/// Y = X x_mode A, i.e. Y_(mode) = A X_(mode).
inline DenseTensor mode_product(const DenseTensor& x, const Matrix& a, Index mode) {
  const Shape& s = x.shape();
  s.check_mode(mode);
  if (a.cols() != s[mode])
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(a.cols()) +
                                " columns, mode " + std::to_string(mode) + " has size " +
                                std::to_string(s[mode]));
  const Index m = s[mode], p = a.rows(), left = s.left(mode), right = s.right(mode);
  DenseTensor y(s.with_dim(mode, p));
  if (left == 1) {
    MatrixMap(y.data(), p, right).noalias() = a * ConstMatrixMap(x.data(), m, right);
  } else {
    const Matrix at = a.transpose();
    for (Index r = 0; r < right; ++r)
      MatrixMap(y.data() + r * left * p, left, p).noalias() =
          ConstMatrixMap(x.data() + r * left * m, left, m) * at;
  }
  return y;
}

/// Sparse X x_mode A; the result is dense.
inline DenseTensor mode_product(const SparseTensor& x, const Matrix& a, Index mode) {
  const Shape& s = x.shape();
  s.check_mode(mode);
  if (a.cols() != s[mode])
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(a.cols()) +
                                " columns, mode " + std::to_string(mode) + " has size " +
                                std::to_string(s[mode]));
  const Shape out_shape = s.with_dim(mode, a.rows());
  DenseTensor y(out_shape);
  const Index left = s.left(mode);
  const Index p = a.rows();
  for (Index e = 0; e < x.nnz(); ++e) {
    Index base = 0;
    for (Index k = x.order() - 1; k >= 0; --k)
      base = base * out_shape[k] + (k == mode ? 0 : x.index(e, k));
    const double v = x.value(e);
    const double* col = a.data() + x.index(e, mode) * p;
    double* dst = y.data() + base;
    for (Index t = 0; t < p; ++t) dst[t * left] += v * col[t];
  }
  return y;
}

/// Applies `factors[k]` along `modes[k]` in the listed order. Modes must be
/// distinct; mode products along distinct modes commute.
inline DenseTensor multi_mode_product(const DenseTensor& x, std::span<const Matrix> factors,
                                      std::span<const Index> modes) {
  if (factors.size() != modes.size())
    throw std::invalid_argument("multi_mode_product: factor and mode counts differ");
  std::vector<char> seen(static_cast<std::size_t>(x.order()), 0);
  for (Index m : modes) {
    x.shape().check_mode(m);
    if (seen[static_cast<std::size_t>(m)]++) throw std::invalid_argument("multi_mode_product: duplicate mode");
  }
  DenseTensor y = x;
  for (std::size_t k = 0; k < factors.size(); ++k) y = mode_product(y, factors[k], modes[k]);
  return y;
}

inline DenseTensor multi_mode_product(const SparseTensor& x, std::span<const Matrix> factors,
                                      std::span<const Index> modes) {
  if (factors.empty()) return x.to_dense();
  if (factors.size() != modes.size())
    throw std::invalid_argument("multi_mode_product: factor and mode counts differ");
  x.shape().check_mode(modes[0]);
  DenseTensor first = mode_product(x, factors[0], modes[0]);
  // Remaining modes checked (including duplicates of modes[0]) by the dense overload.
  std::vector<Index> rest_modes(modes.begin() + 1, modes.end());
  for (Index m : rest_modes)
    if (m == modes[0]) throw std::invalid_argument("multi_mode_product: duplicate mode");
  return multi_mode_product(first, factors.subspan(1), rest_modes);
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double t : v) s += t * t;
  return s;
}

inline double frobenius_norm(const DenseTensor& x) { return std::sqrt(squared_norm(x.values())); }
inline double frobenius_norm(const SparseTensor& x) { return std::sqrt(squared_norm(x.raw_values())); }

/// Keeps only the listed indices along `mode` (in the given order): X x_mode P^T.
inline DenseTensor select_mode(const DenseTensor& x, Index mode, std::span<const Index> keep) {
  const Shape& s = x.shape();
  s.check_mode(mode);
  const Index m = s[mode], k = static_cast<Index>(keep.size()), left = s.left(mode),
              right = s.right(mode);
  DenseTensor y(s.with_dim(mode, k));
  for (Index r = 0; r < right; ++r)
    for (Index t = 0; t < k; ++t) {
      const Index src = keep[static_cast<std::size_t>(t)];
      if (src < 0 || src >= m) throw std::invalid_argument("select_mode: index out of range");
      std::copy_n(x.data() + (r * m + src) * left, left, y.data() + (r * k + t) * left);
    }
  return y;
}

/// Sparse X x_mode P^T: entries whose mode index is selected are kept (values
/// untouched) and renumbered to their position in `keep`.
inline SparseTensor select_mode(const SparseTensor& x, Index mode, std::span<const Index> keep) {
  const Shape& s = x.shape();
  s.check_mode(mode);
  std::vector<Index> position(static_cast<std::size_t>(s[mode]), -1);
  for (std::size_t t = 0; t < keep.size(); ++t) {
    const Index src = keep[t];
    if (src < 0 || src >= s[mode]) throw std::invalid_argument("select_mode: index out of range");
    position[static_cast<std::size_t>(src)] = static_cast<Index>(t);
  }
  std::vector<Index> idx;
  std::vector<double> vals;
  for (Index e = 0; e < x.nnz(); ++e) {
    const Index pos = position[static_cast<std::size_t>(x.index(e, mode))];
    if (pos < 0) continue;
    auto c = x.coords(e);
    const std::size_t at = idx.size();
    idx.insert(idx.end(), c.begin(), c.end());
    idx[at + static_cast<std::size_t>(mode)] = pos;
    vals.push_back(x.value(e));
  }
  return SparseTensor(s.with_dim(mode, static_cast<Index>(keep.size())), std::move(idx), std::move(vals));
}

}  // namespace rtucker
