#pragma once

// Dense matrix kernels: thin QR, thin/truncated SVD, strong rank-revealing QR
// row selection, oblique factors and spectral-norm estimation.

#include "rtucker/errors.hpp"
#include "rtucker/shape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct QrResult {
  Matrix Q;  // m x n, orthonormal columns
  Matrix R;  // n x n, upper triangular
};

/// U (m x k) diag(S) V^T with k = number of retained triplets.
struct SvdResult {
  Matrix U;
  Vector S;  // nonincreasing, nonnegative
  Matrix V;
};

/// Selected rows of an orthonormal basis. `indices` are 0-based and distinct;
/// `conditioning` is ||(P^T Q)^{-1}||_2.
struct RowSelection {
  std::vector<Index> indices;
  double conditioning = 1.0;
};

inline QrResult thin_qr(const Matrix& y) {
  if (y.rows() < y.cols())
    throw std::invalid_argument("thin_qr requires rows >= cols (got " + std::to_string(y.rows()) +
                                "x" + std::to_string(y.cols()) + ")");
  Eigen::HouseholderQR<Matrix> qr(y);
  QrResult out;
  out.Q = qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
  out.R = qr.matrixQR().topRows(y.cols()).triangularView<Eigen::Upper>();
  return out;
}

/// Orthonormal basis of range(y) as produced by thin_qr, without forming R.
inline Matrix orthonormalize(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

namespace detail {

inline SvdResult jacobi_svd(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

}  // namespace detail

/// Thin SVD with k = min(rows, cols). Tall inputs are reduced by a Householder
/// QR first so that the Jacobi sweeps run on a square triangular factor.
inline SvdResult thin_svd(const Matrix& x) {
  if (x.size() == 0) return {};
  if (x.rows() < x.cols()) {
    SvdResult t = thin_svd(x.transpose());
    return {std::move(t.V), std::move(t.S), std::move(t.U)};
  }
  if (x.rows() > 2 * x.cols()) {
    QrResult qr = thin_qr(x);
    SvdResult small = detail::jacobi_svd(qr.R);
    return {qr.Q * small.U, std::move(small.S), std::move(small.V)};
  }
  return detail::jacobi_svd(x);
}

inline SvdResult truncated_svd(const Matrix& x, Index r) {
  const Index k = std::min(x.rows(), x.cols());
  if (r < 1 || r > k)
    throw std::invalid_argument("truncation rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(k) + "]");
  SvdResult full = thin_svd(x);
  return {full.U.leftCols(r), full.S.head(r), full.V.leftCols(r)};
}

/// Accumulates the R factor of a tall matrix fed in row blocks (TSQR with a
/// single reduction chain). Memory is bounded by the block buffer, so the
/// matrix never has to exist in one piece.
class RFactorAccumulator {
 public:
  explicit RFactorAccumulator(Index cols, Index block_rows = 0)
      : cols_(cols),
        capacity_(cols + std::max<Index>(block_rows > 0 ? block_rows : 8 * cols, 256)),
        buffer_(capacity_, cols) {}

  Index cols() const noexcept { return cols_; }

  /// Append rows; `rows` is any Eigen expression with `cols()` columns.
  template <class Rows>
  void add(const Rows& rows) {
    Index done = 0;
    while (done < rows.rows()) {
      const Index take = std::min(rows.rows() - done, capacity_ - filled_);
      buffer_.middleRows(filled_, take) = rows.middleRows(done, take);
      filled_ += take;
      done += take;
      dirty_ = true;
      if (filled_ == capacity_) reduce();
    }
  }

  /// cols x cols upper-triangular R with A = Q R for the rows added so far.
  Matrix finish() {
    reduce();
    Matrix r = Matrix::Zero(cols_, cols_);
    r.topRows(filled_) = buffer_.topRows(filled_).triangularView<Eigen::Upper>();
    return r;
  }

 private:
  void reduce() {
    if (!dirty_) return;
    Eigen::Ref<Matrix> active = buffer_.topRows(filled_);
    Eigen::HouseholderQR<Eigen::Ref<Matrix>> qr(active);
    const Index k = std::min(filled_, cols_);
    Matrix top = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    buffer_.topRows(k) = top;
    filled_ = k;
    dirty_ = false;
  }

  Index cols_;
  Index capacity_;
  Matrix buffer_;
  Index filled_ = 0;
  bool dirty_ = false;
};

/// Left singular vectors and all singular values of X from the R factor of
/// X^T: X = R^T Q^T, so the left singular pairs of X are those of R^T.
inline SvdResult left_svd_from_r(const Matrix& r_of_transpose) {
  SvdResult s = detail::jacobi_svd(r_of_transpose.transpose());
  return {std::move(s.U), std::move(s.S), Matrix()};
}

/// Growth bound of the sRRQR selection, sqrt(1 + 4 k (n - k)); with eta = 2
/// the selected block satisfies ||(P^T Q)^{-1}||_2 <= this value.
inline double srrqr_growth_bound(Index n, Index k) {
  return std::sqrt(1.0 + 4.0 * static_cast<double>(k) * static_cast<double>(n - k));
}

namespace detail {

/// Businger-Golub column pivoting on the k x n matrix m: returns the first k
/// pivot columns.
inline std::vector<Index> pivoted_qr_columns(const Matrix& m) {
  const Index k = m.rows(), n = m.cols();
  Matrix w = m;
  Vector norms2 = w.colwise().squaredNorm().transpose();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index step = 0; step < k; ++step) {
    Index best = step;
    for (Index j = step + 1; j < n; ++j)
      if (norms2(j) > norms2(best)) best = j;
    if (best != step) {
      w.col(step).swap(w.col(best));
      std::swap(norms2(step), norms2(best));
      std::swap(perm[static_cast<std::size_t>(step)], perm[static_cast<std::size_t>(best)]);
    }
    // Householder reflector on rows step..k-1 of the pivot column.
    const Index len = k - step;
    Vector v = w.col(step).tail(len);
    const double alpha = v.norm();
    if (alpha == 0.0) break;
    v(0) += (v(0) >= 0 ? alpha : -alpha);
    const double vnorm2 = v.squaredNorm();
    auto trailing = w.bottomRightCorner(len, n - step);
    trailing -= (2.0 / vnorm2) * v * (v.transpose() * trailing);
    // Downdate remaining column norms with the eliminated row; recompute when
    // cancellation makes the downdate unreliable.
    for (Index j = step + 1; j < n; ++j) {
      const double lost = w(step, j) * w(step, j);
      norms2(j) -= lost;
      if (norms2(j) <= 1e-12 * lost) norms2(j) = w.col(j).tail(len - 1).squaredNorm();
    }
  }
  perm.resize(static_cast<std::size_t>(k));
  return perm;
}

/// Reciprocal condition estimate of an LU factorization. Eigen's estimate
/// is unreliable once a pivot is exactly zero, so that case maps to 0.
inline double lu_rcond(const Eigen::PartialPivLU<Matrix>& lu) {
  const auto d = lu.matrixLU().diagonal().cwiseAbs();
  if (d.size() == 0) return 1.0;
  if (!(d.minCoeff() > std::numeric_limits<double>::epsilon() * d.maxCoeff())) return 0.0;
  return lu.rcond();
}

}  // namespace detail

/// Strong rank-revealing QR row selection (Gu-Eisenstat) on an orthonormal
/// basis q (n x k): chooses k rows such that every entry of q (P^T q)^{-1}
/// is at most eta in magnitude. Starts from a column-pivoted QR of q^T and performs
/// determinant-increasing swaps until none gains more than a factor eta.
/// With `swap_phase == false` the pivoted-QR selection is returned as is.
inline RowSelection srrqr_select(const Matrix& q, double eta = 2.0, bool swap_phase = true) {
  const Index n = q.rows(), k = q.cols();
  if (n < k)
    throw std::invalid_argument("srrqr_select needs rows >= cols (got " + std::to_string(n) + "x" +
                                std::to_string(k) + ")");
  if (!(eta >= 1.0)) throw std::invalid_argument("srrqr parameter eta must be >= 1");
  if (k == 0) return {};

  const Matrix qt = q.transpose();
  std::vector<Index> selected = detail::pivoted_qr_columns(qt);
  std::vector<char> in_set(static_cast<std::size_t>(n), 0);
  for (Index i : selected) in_set[static_cast<std::size_t>(i)] = 1;

  auto interpolation = [&](Eigen::PartialPivLU<Matrix>& lu) {
    Matrix block(k, k);
    for (Index t = 0; t < k; ++t) block.col(t) = qt.col(selected[static_cast<std::size_t>(t)]);
    lu.compute(block);
    const double rc = detail::lu_rcond(lu);
    if (!(rc > std::numeric_limits<double>::epsilon()))
      throw NumericalError("selected rows are numerically singular (rcond " + std::to_string(rc) +
                           ")");
    return Matrix(lu.solve(qt));  // k x n; identity on selected columns
  };

  Eigen::PartialPivLU<Matrix> lu;
  Matrix w = interpolation(lu);
  if (swap_phase) {
    // Each swap multiplies |det(P^T q)| by more than eta, so the loop is finite;
    // the cap guards against rounding ping-pong.
    const Index max_swaps = 64 * (k + 1) * std::max<Index>(1, static_cast<Index>(std::log2(n + 1.0)));
    for (Index swaps = 0; swaps < max_swaps; ++swaps) {
      Index bi = -1, bj = -1;
      double best = eta;
      for (Index j = 0; j < n; ++j) {
        if (in_set[static_cast<std::size_t>(j)]) continue;
        Index i;
        const double v = w.col(j).cwiseAbs().maxCoeff(&i);
        if (v > best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
      if (bj < 0) break;
      in_set[static_cast<std::size_t>(selected[static_cast<std::size_t>(bi)])] = 0;
      in_set[static_cast<std::size_t>(bj)] = 1;
      selected[static_cast<std::size_t>(bi)] = bj;
      w = interpolation(lu);
    }
  }

  RowSelection out;
  out.indices = std::move(selected);
  // ||(P^T q)^{-1}||_2 equals ||q (P^T q)^{-1}||_2 = ||w^T||_2 since q is orthonormal.
  Eigen::JacobiSVD<Matrix> sv(w);
  out.conditioning = sv.singularValues()(0);
  return out;
}

/// A = q (P^T q)^{-1}; A restricted to the selected rows is the identity.
inline Matrix oblique_factor(const Matrix& q, const RowSelection& sel) {
  const Index k = q.cols();
  if (static_cast<Index>(sel.indices.size()) != k)
    throw std::invalid_argument("selection size must equal the basis column count");
  Matrix block(k, k);
  for (Index t = 0; t < k; ++t) {
    const Index row = sel.indices[static_cast<std::size_t>(t)];
    if (row < 0 || row >= q.rows()) throw std::invalid_argument("selection index out of range");
    block.row(t) = q.row(row);
  }
  Eigen::PartialPivLU<Matrix> lu(block.transpose());
  const double rc = detail::lu_rcond(lu);
  if (!(rc > std::numeric_limits<double>::epsilon()))
    throw NumericalError("selected submatrix is singular (condition estimate " +
                         std::to_string(rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity()) +
                         ")");
  // A^T = block^{-T} q^T
  Matrix a = lu.solve(q.transpose()).transpose();
  // Pin the identity rows exactly; the solve reproduces them only to rounding.
  for (Index t = 0; t < k; ++t) {
    a.row(sel.indices[static_cast<std::size_t>(t)]).setZero();
    a(sel.indices[static_cast<std::size_t>(t)], t) = 1.0;
  }
  return a;
}

struct SpectralNormEstimate {
  double value = 0.0;
  bool converged = false;
  Index iterations = 0;
};

/// Largest singular value by power iteration on X^T X. Converged when the
/// eigen-residual ||X^T X v - lambda v|| <= tol * lambda, which puts sigma_1
/// within relative tol/2. Returns the best estimate with converged = false at
/// the iteration cap.
inline SpectralNormEstimate spectral_norm(const Matrix& x, double tol = 1e-10, Index max_iter = 1000) {
  if (!(tol > 0)) throw std::invalid_argument("spectral_norm tolerance must be positive");
  SpectralNormEstimate est;
  if (x.size() == 0) {
    est.converged = true;
    return est;
  }
  // Fixed, sign-varied start vector so results are reproducible.
  Vector v(x.cols());
  std::uint64_t s = 0x9E3779B97F4A7C15ull;
  for (Index i = 0; i < v.size(); ++i) {
    s ^= s >> 12, s ^= s << 25, s ^= s >> 27;
    v(i) = static_cast<double>((s * 2685821657736338717ull) >> 11) * 0x1.0p-53 + 0.5;
  }
  v.normalize();
  for (Index it = 1; it <= max_iter; ++it) {
    Vector xv = x * v;
    Vector w = x.transpose() * xv;
    const double lambda = v.dot(w);
    est.value = std::sqrt(std::max(0.0, lambda));
    est.iterations = it;
    const double wn = w.norm();
    if (wn == 0.0) {
      est.converged = true;
      return est;
    }
    if ((w - lambda * v).norm() <= tol * lambda) {
      est.converged = true;
      return est;
    }
    v = w / wn;
  }
  return est;
}

/// max |A^T A - I|
inline double orthonormality_defect(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return (a.transpose() * a - Matrix::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff();
}

}  // namespace rtucker
