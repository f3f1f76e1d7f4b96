#pragma once

// Randomized SVD, subspace iteration and the blocked adaptive range finder.

#include "rtucker/linalg.hpp"
#include "rtucker/operators.hpp"
#include "rtucker/sketch.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

/// Orthonormal basis of range((X X^T)^q Y), re-orthonormalized after every
/// half step. q = 0 is the plain range finder.
template <LinearOperator Op>
Matrix subspace_iterate(const Op& op, const Matrix& y, Index q) {
  if (q < 0) throw std::invalid_argument("subspace iteration count must be >= 0");
  Matrix basis = orthonormalize(y);
  for (Index it = 0; it < q; ++it) {
    Matrix z = orthonormalize(op.apply_transposed(basis));
    basis = orthonormalize(op.apply(z));
  }
  return basis;
}

/// Randomized SVD: sketch with r + p Gaussian columns, orthonormalize,
/// project, take the SVD of the small projection and keep r triplets.
/// The stream cursor advances by r + p. With `want_v == false` V is left
/// empty and the projected matrix is reduced by TSQR instead of a full SVD.
template <LinearOperator Op>
SvdResult randsvd(const Op& op, Index r, Index p, SketchStream& s, Index power = 0, bool want_v = true) {
  const Index min_dim = std::min(op.rows(), op.cols());
  if (r < 1) throw std::invalid_argument("randsvd: target rank must be >= 1");
  if (p < 0) throw std::invalid_argument("randsvd: oversampling must be >= 0");
  if (r + p > min_dim)
    throw std::invalid_argument("randsvd: r + p = " + std::to_string(r + p) +
                                " exceeds min dimension " + std::to_string(min_dim));
  const Index ell = r + p;
  Matrix y = op.sketch(s, ell);
  s.advance(ell);
  Matrix q = subspace_iterate(op, y, power);
  Matrix bt = op.apply_transposed(q);  // (Q^T X)^T, cols x ell

  SvdResult out;
  if (want_v) {
    SvdResult small = thin_svd(bt);  // bt = W S Z^T, so Q^T X = Z S W^T
    out.U = q * small.V.leftCols(r);
    out.S = small.S.head(r);
    out.V = small.U.leftCols(r);
  } else {
    RFactorAccumulator acc(ell);
    acc.add(bt);
    SvdResult small = left_svd_from_r(acc.finish());
    out.U = q * small.U.leftCols(r);
    out.S = small.S.head(r);
  }
  return out;
}

/// Result of the adaptive range finder. `residual` is ||X - Q Q^T X||_F as
/// tracked through ||X||^2 - ||Q^T X||^2; `history` records it after every
/// accepted block (first element is ||X||_F).
struct AdaptiveRange {
  Matrix Q;
  double residual = 0.0;
  std::vector<double> history;
};

inline constexpr double kDowndateFloor = 1e-10;

/// Blocked adaptive range finder with an absolute stopping threshold: grows Q
/// b columns at a time until ||X - Q Q^T X||_F <= threshold. Each new block
/// X Omega_b is orthogonalized twice against Q; directions with norm at most
/// 1e-13 ||X||_F are dropped and end the search (range exhausted). Once the
/// downdated residual drops below 1e-5 ||X||_F it is recomputed directly when
/// the operator can do so.
template <LinearOperator Op>
AdaptiveRange adapt_range_finder_abs(const Op& op, double threshold, Index b, SketchStream& s) {
  if (b < 1) throw std::invalid_argument("adaptive range finder: block size must be >= 1");
  if (!(threshold >= 0)) throw std::invalid_argument("adaptive range finder: negative threshold");
  const Index m = op.rows();
  const Index max_cols = std::min(op.rows(), op.cols());
  const double norm2 = op.squared_norm();
  const double norm = std::sqrt(norm2);
  const double drop = 1e-13 * norm;

  AdaptiveRange out;
  out.Q.resize(m, 0);
  double residual2 = norm2;
  out.history.push_back(norm);

  while (std::sqrt(residual2) > threshold && out.Q.cols() < max_cols) {
    const Index kb = std::min(b, max_cols - out.Q.cols());
    Matrix w = op.sketch(s, kb);
    s.advance(kb);
    for (int pass = 0; pass < 2 && out.Q.cols() > 0; ++pass) w -= out.Q * (out.Q.transpose() * w);

    Eigen::ColPivHouseholderQR<Matrix> qr(w);
    const auto& r = qr.matrixQR();
    Index keep = 0;
    while (keep < std::min(kb, m) && std::abs(r(keep, keep)) > drop) ++keep;
    if (keep == 0) break;
    Matrix block = qr.householderQ() * Matrix::Identity(m, keep);
    if (out.Q.cols() > 0) {
      // One more projection keeps the block orthogonal to Q at working precision.
      block -= out.Q * (out.Q.transpose() * block);
      block = orthonormalize(block);
    }
    const double captured = op.apply_transposed(block).squaredNorm();
    residual2 = std::max(0.0, residual2 - captured);

    Matrix grown(m, out.Q.cols() + keep);
    grown << out.Q, block;
    out.Q = std::move(grown);
    // Downdating ||X||^2 loses all digits near sqrt(machine eps) * ||X||.
    if constexpr (requires { op.residual_squared_norm(out.Q); })
      if (residual2 <= kDowndateFloor * norm2) residual2 = op.residual_squared_norm(out.Q);
    out.history.push_back(std::sqrt(residual2));
    if (keep < kb) break;
  }
  out.residual = std::sqrt(residual2);
  return out;
}

/// Relative-tolerance form: ||X - Q Q^T X||_F <= eps ||X||_F.
template <LinearOperator Op>
AdaptiveRange adapt_range_finder(const Op& op, double eps, Index b, SketchStream& s) {
  if (!(eps > 0 && eps < 1))
    throw std::invalid_argument("adaptive range finder: tolerance must lie in (0, 1), got " +
                                std::to_string(eps));
  return adapt_range_finder_abs(op, eps * std::sqrt(op.squared_norm()), b, s);
}

}  // namespace rtucker
