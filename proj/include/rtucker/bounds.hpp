#pragma once

// Tail quantities Delta_j, the expected-error bounds of the randomized and
// structure-preserving algorithms, and the processing-order heuristic.

#include "rtucker/dense_tensor.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/operators.hpp"
#include "rtucker/sparse_tensor.hpp"
#include "rtucker/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

/// All singular values of the mode unfolding, nonincreasing.
inline Vector mode_singular_values(const DenseTensor& x, Index mode) {
  return left_svd(DenseUnfolding(x, mode)).S;
}

inline Vector mode_singular_values(const SparseTensor& x, Index mode) {
  const SparseMatrix u = unfold(x, mode);
  RFactorAccumulator acc(u.rows());
  const Index chunk = std::max<Index>(256, 16384 / std::max<Index>(1, u.rows()));
  for (Index c0 = 0; c0 < u.cols(); c0 += chunk) {
    const Index w = std::min(chunk, u.cols() - c0);
    acc.add(Matrix(Matrix(u.middleCols(c0, w)).transpose()));
  }
  return left_svd_from_r(acc.finish()).S;
}

/// sqrt(sum_{i > r} sigma_i^2) from a nonincreasing singular value list.
inline double tail_norm(const Vector& sigma, Index r) {
  if (r >= sigma.size()) return 0.0;
  return sigma.tail(sigma.size() - r).norm();
}

/// Delta_j(x): root sum of squares of the mode-j singular values past rank r.
template <class Tensor>
double delta_tail(const Tensor& x, Index mode, Index r) {
  x.shape().check_mode(mode);
  if (r < 1 || r > x.shape()[mode])
    throw std::invalid_argument("delta_tail: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(x.shape()[mode]) + "]");
  return tail_norm(mode_singular_values(x, mode), r);
}

template <class Tensor>
std::vector<double> delta_tails(const Tensor& x, std::span<const Index> ranks) {
  if (static_cast<Index>(ranks.size()) != x.order())
    throw std::invalid_argument("delta_tails: one rank per mode required");
  std::vector<double> out;
  for (Index j = 0; j < x.order(); ++j) out.push_back(delta_tail(x, j, ranks[static_cast<std::size_t>(j)]));
  return out;
}

/// sqrt(sum_j (1 + r_j / (p - 1)) Delta_j^2): expected-error bound shared by
/// the randomized HOSVD and the randomized sequentially truncated HOSVD (the
/// latter for every processing order).
inline double bound_expected_error(std::span<const double> deltas, std::span<const Index> ranks, Index p) {
  if (p <= 1) throw std::invalid_argument("expected-error bound needs oversampling p >= 2");
  if (deltas.size() != ranks.size()) throw std::invalid_argument("bound: deltas and ranks differ in length");
  double s = 0.0;
  for (std::size_t j = 0; j < deltas.size(); ++j)
    s += (1.0 + static_cast<double>(ranks[j]) / static_cast<double>(p - 1)) * deltas[j] * deltas[j];
  return std::sqrt(s);
}

/// g(I, l) = sqrt(1 + 4 l (I - l)).
inline double g_factor(Index mode_size, Index ell) { return srrqr_growth_bound(mode_size, ell); }

/// f_p(r) = sqrt(1 + r / (p - 1)).
inline double f_factor(Index r, Index p) {
  if (p <= 1) throw std::invalid_argument("f_p(r) needs p >= 2");
  return std::sqrt(1.0 + static_cast<double>(r) / static_cast<double>(p - 1));
}

/// Structure-preserving bound sum_j (prod_{k<=j} g(I_k, l_k)) f_p(r_j) Delta_j
/// with l_j = r_j + p, accumulated along `order` (identity order when empty).
inline double bound_sp(const Shape& shape, std::span<const Index> ranks, Index p,
                       std::span<const double> deltas, std::span<const Index> order = {}) {
  if (p <= 1) throw std::invalid_argument("structure-preserving bound needs oversampling p >= 2");
  const auto d = static_cast<std::size_t>(shape.order());
  if (ranks.size() != d || deltas.size() != d)
    throw std::invalid_argument("bound_sp: one rank and one delta per mode required");
  std::vector<Index> rho(order.begin(), order.end());
  if (rho.empty()) {
    rho.resize(d);
    std::iota(rho.begin(), rho.end(), Index{0});
  }
  double total = 0.0, growth = 1.0;
  for (Index j : rho) {
    const auto uj = static_cast<std::size_t>(j);
    const Index ell = ranks[uj] + p;
    if (ell >= shape[j])
      throw std::invalid_argument("bound_sp: r + p must be smaller than the mode size");
    growth *= g_factor(shape[j], ell);
    total += growth * f_factor(ranks[uj], p) * deltas[uj];
  }
  return total;
}

enum class OrderKind { randomized, deterministic };

/// Randomized algorithms process the largest modes first, the deterministic
/// sequential algorithm the smallest first; ties keep ascending mode index.
inline std::vector<Index> auto_order(const Shape& shape, OrderKind kind = OrderKind::randomized) {
  std::vector<Index> rho(static_cast<std::size_t>(shape.order()));
  std::iota(rho.begin(), rho.end(), Index{0});
  std::stable_sort(rho.begin(), rho.end(), [&](Index a, Index b) {
    return kind == OrderKind::randomized ? shape[a] > shape[b] : shape[a] < shape[b];
  });
  return rho;
}

}  // namespace rtucker
