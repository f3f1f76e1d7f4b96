#pragma once

// Tucker decomposition algorithms: HOSVD, STHOSVD, their randomized and
// adaptive counterparts, and the structure-preserving variants whose cores
// consist of entries of the input tensor.

#include "rtucker/bounds.hpp"
#include "rtucker/dense_tensor.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/operators.hpp"
#include "rtucker/randomized.hpp"
#include "rtucker/sparse_tensor.hpp"
#include "rtucker/tensor_ops.hpp"
#include "rtucker/tucker_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace rtucker {

template <class T>
concept TensorType = std::same_as<T, DenseTensor> || std::same_as<T, SparseTensor>;

struct TuckerConfig {
  std::vector<Index> ranks;            // one per mode; unused by the adaptive methods
  Index oversampling = 5;
  std::vector<Index> order;            // 0-based permutation; empty selects auto_order
  double tolerance = 0.0;              // adaptive methods
  std::vector<double> mode_tolerances; // optional split of `tolerance`, sum of squares = tolerance^2
  Index block = 1;                     // adaptive block size
  bool trim = true;                    // adaptive: keep the smallest leading subspace meeting eps_j
  std::uint64_t seed = 0;
  Index power = 0;                     // subspace iterations in every range finder
  double eta = 2.0;                    // sRRQR swap threshold
  bool swap_phase = true;              // false: plain column-pivoted QR selection
};

/// Extra observations of a structure-preserving run.
struct SpTrace {
  std::vector<Index> core_nnz;          // nonzeros of the core after each step
  std::vector<double> conditioning;     // ||(P_j^T Q_j)^{-1}||_2 per mode
};

namespace detail {

inline DenseUnfolding unfolding(const DenseTensor& x, Index j) { return DenseUnfolding(x, j); }
inline SparseUnfolding unfolding(const SparseTensor& x, Index j) { return SparseUnfolding(x, j); }

inline void check_ranks(const Shape& s, const std::vector<Index>& ranks) {
  if (static_cast<Index>(ranks.size()) != s.order())
    throw std::invalid_argument("expected " + std::to_string(s.order()) + " ranks, got " +
                                std::to_string(ranks.size()));
  for (Index j = 0; j < s.order(); ++j) {
    const Index r = ranks[static_cast<std::size_t>(j)];
    if (r < 1 || r > s[j])
      throw std::invalid_argument("rank " + std::to_string(r) + " for mode " + std::to_string(j) +
                                  " outside [1, " + std::to_string(s[j]) + "]");
  }
}

inline std::vector<Index> resolve_order(const Shape& s, const std::vector<Index>& order, OrderKind kind) {
  if (order.empty()) return auto_order(s, kind);
  if (static_cast<Index>(order.size()) != s.order())
    throw std::invalid_argument("processing order must list every mode exactly once");
  std::vector<Index> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (Index j = 0; j < s.order(); ++j)
    if (sorted[static_cast<std::size_t>(j)] != j)
      throw std::invalid_argument("processing order must be a permutation of the modes");
  return order;
}

inline std::vector<Index> identity_order(Index d) {
  std::vector<Index> rho(static_cast<std::size_t>(d));
  std::iota(rho.begin(), rho.end(), Index{0});
  return rho;
}

template <TensorType T>
DenseTensor as_dense(const T& x) {
  if constexpr (std::is_same_v<T, SparseTensor>)
    return x.to_dense();
  else
    return x;
}

/// x x_j A_j^T over every mode, cheapest shrinkage first.
template <TensorType T>
DenseTensor project_core(const T& x, const std::vector<Matrix>& factors) {
  std::vector<Index> rho = identity_order(x.order());
  std::stable_sort(rho.begin(), rho.end(), [&](Index a, Index b) {
    const auto& fa = factors[static_cast<std::size_t>(a)];
    const auto& fb = factors[static_cast<std::size_t>(b)];
    return static_cast<double>(fa.cols()) / static_cast<double>(fa.rows()) <
           static_cast<double>(fb.cols()) / static_cast<double>(fb.rows());
  });
  DenseTensor g = mode_product(x, factors[static_cast<std::size_t>(rho[0])].transpose(), rho[0]);
  for (std::size_t k = 1; k < rho.size(); ++k)
    g = mode_product(g, factors[static_cast<std::size_t>(rho[k])].transpose(), rho[k]);
  return g;
}

/// Sequential truncation: for each mode in `order`, factor_for(current, j)
/// returns A_j and the current core becomes current x_j A_j^T.
template <TensorType T, class FactorFn>
TuckerTensor sequential_sweep(const T& x, const std::vector<Index>& order, FactorFn&& factor_for) {
  std::vector<Matrix> factors(static_cast<std::size_t>(x.order()));
  std::optional<DenseTensor> g;
  for (Index j : order) {
    Matrix a = g ? factor_for(*g, j) : factor_for(x, j);
    DenseTensor next = g ? mode_product(*g, a.transpose(), j) : mode_product(x, a.transpose(), j);
    g = std::move(next);
    factors[static_cast<std::size_t>(j)] = std::move(a);
  }
  return TuckerTensor{Core(std::move(*g)), std::move(factors), {}};
}

/// Sketch size and truncation rank after clamping r + p to the unfolding size.
struct ClampedRank {
  Index ell;
  Index rank;
};

inline ClampedRank clamp_rank(Index r, Index p, Index rows, Index cols) {
  const Index ell = std::min({r + p, rows, cols});
  return {ell, std::min(r, ell)};
}

inline void check_oversampling(Index p) {
  if (p < 0) throw std::invalid_argument("oversampling must be >= 0");
}

inline SketchStream mode_stream(const TuckerConfig& cfg, Index mode) {
  return SketchStream(cfg.seed, static_cast<std::uint64_t>(mode));
}

template <LinearOperator Op>
Matrix randomized_factor(const Op& op, Index r, const TuckerConfig& cfg, Index mode) {
  const ClampedRank c = clamp_rank(r, cfg.oversampling, op.rows(), op.cols());
  SketchStream s = mode_stream(cfg, mode);
  return randsvd(op, c.rank, c.ell - c.rank, s, cfg.power, false).U;
}

inline std::vector<double> split_tolerance(const TuckerConfig& cfg, Index d) {
  if (!cfg.mode_tolerances.empty()) {
    if (static_cast<Index>(cfg.mode_tolerances.size()) != d)
      throw std::invalid_argument("per-mode tolerances must list every mode");
    double s = 0.0;
    for (double e : cfg.mode_tolerances) {
      if (!(e >= 0)) throw std::invalid_argument("per-mode tolerances must be nonnegative");
      s += e * e;
    }
    const double eps = cfg.tolerance > 0 ? cfg.tolerance : std::sqrt(s);
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("tolerance must lie in (0, 1)");
    if (std::abs(s - eps * eps) > 1e-12 * eps * eps)
      throw std::invalid_argument("per-mode tolerances must satisfy sum eps_j^2 = eps^2");
    return cfg.mode_tolerances;
  }
  if (!(cfg.tolerance > 0 && cfg.tolerance < 1))
    throw std::invalid_argument("tolerance must lie in (0, 1), got " + std::to_string(cfg.tolerance));
  return std::vector<double>(static_cast<std::size_t>(d), cfg.tolerance / std::sqrt(static_cast<double>(d)));
}

/// Adaptive factor for one mode; eps_j = 0 leaves the mode uncompressed.
template <LinearOperator Op>
Matrix adaptive_factor(const Op& op, double threshold, bool compress, const TuckerConfig& cfg, Index mode) {
  if (!compress) return Matrix::Identity(op.rows(), op.rows());
  SketchStream s = mode_stream(cfg, mode);
  AdaptiveRange r = adapt_range_finder_abs(op, threshold, cfg.block, s);
  if (r.Q.cols() == 0) {  // zero tensor: keep a rank-1 placeholder
    Matrix q = Matrix::Zero(op.rows(), 1);
    q(0, 0) = 1.0;
    return q;
  }
  if (!cfg.trim || r.Q.cols() == 1) return std::move(r.Q);
  // ||X - Q U_k U_k^T Q^T X||^2 = residual^2 + sum_{i>k} sigma_i(Q^T X)^2.
  const Matrix bt = op.apply_transposed(r.Q);
  RFactorAccumulator acc(bt.cols());
  const Index chunk = std::max<Index>(256, 16384 / bt.cols());
  for (Index r0 = 0; r0 < bt.rows(); r0 += chunk) acc.add(bt.middleRows(r0, std::min(chunk, bt.rows() - r0)));
  const SvdResult b = left_svd_from_r(acc.finish());
  const double budget = threshold * threshold - r.residual * r.residual;
  Index k = b.S.size();
  double tail = 0.0;
  while (k > 1 && tail + b.S(k - 1) * b.S(k - 1) <= budget) {
    tail += b.S(k - 1) * b.S(k - 1);
    --k;
  }
  return r.Q * b.U.leftCols(k);
}

inline void check_sp_ranks(const Shape& s, const std::vector<Index>& ranks, Index p) {
  check_ranks(s, ranks);
  check_oversampling(p);
  for (Index j = 0; j < s.order(); ++j) {
    const Index ell = ranks[static_cast<std::size_t>(j)] + p;
    if (ell >= std::min(s[j], s.complement(j)))
      throw std::invalid_argument("structure-preserving methods need r_j + p < min(I_j, prod_{i!=j} I_i); mode " +
                                  std::to_string(j) + " has r + p = " + std::to_string(ell));
  }
}

struct SpModeResult {
  Matrix factor;
  RowSelection selection;
};

template <LinearOperator Op>
SpModeResult sp_mode(const Op& op, Index ell, const TuckerConfig& cfg, Index mode) {
  SketchStream s = mode_stream(cfg, mode);
  Matrix y = op.sketch(s, ell);
  Matrix q = subspace_iterate(op, y, cfg.power);
  RowSelection sel = srrqr_select(q, cfg.eta, cfg.swap_phase);
  Matrix a = oblique_factor(q, sel);
  return {std::move(a), std::move(sel)};
}

inline TuckerMeta base_meta(const char* method, const TuckerConfig& cfg) {
  TuckerMeta m;
  m.method = method;
  m.ranks = cfg.ranks;
  m.oversampling = cfg.oversampling;
  m.power = cfg.power;
  m.seed = cfg.seed;
  return m;
}

}  // namespace detail

/// Truncated HOSVD: A_j holds the leading r_j left singular vectors of X_(j).
template <TensorType T>
TuckerTensor hosvd(const T& x, const TuckerConfig& cfg) {
  detail::check_ranks(x.shape(), cfg.ranks);
  const DenseTensor* xd = nullptr;
  std::optional<DenseTensor> owned;
  if constexpr (std::is_same_v<T, SparseTensor>) {
    owned = x.to_dense();
    xd = &*owned;
  } else {
    xd = &x;
  }
  std::vector<Matrix> factors;
  for (Index j = 0; j < x.order(); ++j)
    factors.push_back(left_svd(DenseUnfolding(*xd, j)).U.leftCols(cfg.ranks[static_cast<std::size_t>(j)]));
  TuckerTensor t{Core(detail::project_core(*xd, factors)), std::move(factors), detail::base_meta("hosvd", cfg)};
  t.meta.oversampling = 0;
  t.meta.order = detail::identity_order(x.order());
  return t;
}

/// Sequentially truncated HOSVD; the core shrinks after every mode.
/// Default order: increasing mode size.
template <TensorType T>
TuckerTensor sthosvd(const T& x, const TuckerConfig& cfg) {
  detail::check_ranks(x.shape(), cfg.ranks);
  const auto order = detail::resolve_order(x.shape(), cfg.order, OrderKind::deterministic);
  auto factor_for = [&](const DenseTensor& g, Index j) -> Matrix {
    return left_svd(DenseUnfolding(g, j)).U.leftCols(cfg.ranks[static_cast<std::size_t>(j)]);
  };
  TuckerTensor t = [&] {
    if constexpr (std::is_same_v<T, SparseTensor>)
      return detail::sequential_sweep(x.to_dense(), order, factor_for);
    else
      return detail::sequential_sweep(x, order, factor_for);
  }();
  t.meta = detail::base_meta("sthosvd", cfg);
  t.meta.oversampling = 0;
  t.meta.order = order;
  return t;
}

/// Randomized HOSVD: each factor from a randomized SVD of X_(j) with r_j + p
/// Gaussian sketch columns (stream id j), clamped to the unfolding size.
template <TensorType T>
TuckerTensor r_hosvd(const T& x, const TuckerConfig& cfg) {
  detail::check_ranks(x.shape(), cfg.ranks);
  detail::check_oversampling(cfg.oversampling);
  std::vector<Matrix> factors;
  for (Index j = 0; j < x.order(); ++j)
    factors.push_back(detail::randomized_factor(detail::unfolding(x, j), cfg.ranks[static_cast<std::size_t>(j)], cfg, j));
  TuckerTensor t{Core(detail::project_core(x, factors)), std::move(factors), detail::base_meta("r-hosvd", cfg)};
  t.meta.order = detail::identity_order(x.order());
  return t;
}

/// Randomized STHOSVD. Default order: decreasing mode size.
template <TensorType T>
TuckerTensor r_sthosvd(const T& x, const TuckerConfig& cfg) {
  detail::check_ranks(x.shape(), cfg.ranks);
  detail::check_oversampling(cfg.oversampling);
  const auto order = detail::resolve_order(x.shape(), cfg.order, OrderKind::randomized);
  TuckerTensor t = detail::sequential_sweep(x, order, [&](const auto& g, Index j) -> Matrix {
    return detail::randomized_factor(detail::unfolding(g, j), cfg.ranks[static_cast<std::size_t>(j)], cfg, j);
  });
  t.meta = detail::base_meta("r-sthosvd", cfg);
  t.meta.order = order;
  return t;
}

/// Adaptive randomized HOSVD: every mode gets its own range-finder tolerance
/// eps_j (default eps / sqrt(d)) relative to ||x||_F.
template <TensorType T>
TuckerTensor adaptive_r_hosvd(const T& x, const TuckerConfig& cfg) {
  const auto eps = detail::split_tolerance(cfg, x.order());
  const double nx = frobenius_norm(x);
  std::vector<Matrix> factors;
  for (Index j = 0; j < x.order(); ++j) {
    const double e = eps[static_cast<std::size_t>(j)];
    factors.push_back(detail::adaptive_factor(detail::unfolding(x, j), e * nx, e > 0, cfg, j));
  }
  TuckerTensor t{Core(detail::project_core(x, factors)), std::move(factors),
                 detail::base_meta("adaptive-r-hosvd", cfg)};
  t.meta.ranks.clear();
  t.meta.oversampling = 0;
  t.meta.power = 0;
  t.meta.tolerance = cfg.tolerance > 0 ? cfg.tolerance : std::sqrt(std::inner_product(eps.begin(), eps.end(), eps.begin(), 0.0));
  t.meta.mode_tolerances = eps;
  t.meta.block = cfg.block;
  t.meta.trim = cfg.trim;
  t.meta.order = detail::identity_order(x.order());
  return t;
}

/// Adaptive randomized STHOSVD. Every step stops once the current core's
/// residual drops below eps_j ||x||_F, measured against the input norm.
template <TensorType T>
TuckerTensor adaptive_r_sthosvd(const T& x, const TuckerConfig& cfg) {
  const auto eps = detail::split_tolerance(cfg, x.order());
  const auto order = detail::resolve_order(x.shape(), cfg.order, OrderKind::randomized);
  const double nx = frobenius_norm(x);
  TuckerTensor t = detail::sequential_sweep(x, order, [&](const auto& g, Index j) -> Matrix {
    const double e = eps[static_cast<std::size_t>(j)];
    return detail::adaptive_factor(detail::unfolding(g, j), e * nx, e > 0, cfg, j);
  });
  t.meta = detail::base_meta("adaptive-r-sthosvd", cfg);
  t.meta.ranks.clear();
  t.meta.oversampling = 0;
  t.meta.power = 0;
  t.meta.tolerance = cfg.tolerance > 0 ? cfg.tolerance : std::sqrt(std::inner_product(eps.begin(), eps.end(), eps.begin(), 0.0));
  t.meta.mode_tolerances = eps;
  t.meta.block = cfg.block;
  t.meta.trim = cfg.trim;
  t.meta.order = order;
  return t;
}

/// Structure-preserving STHOSVD. For each mode in order: sketch the current
/// core's unfolding with l_j = r_j + p columns, pick l_j rows by sRRQR on the
/// orthonormal basis, set A_j = Q (P^T Q)^{-1} and keep only the selected
/// slices of the core. The core stays sparse for sparse input; its entries
/// are entries of x. Default order: decreasing mode size.
template <TensorType T>
TuckerTensor sp_sthosvd(const T& x, const TuckerConfig& cfg, SpTrace* trace = nullptr) {
  detail::check_sp_ranks(x.shape(), cfg.ranks, cfg.oversampling);
  const auto order = detail::resolve_order(x.shape(), cfg.order, OrderKind::randomized);
  const auto d = static_cast<std::size_t>(x.order());
  std::vector<Matrix> factors(d);
  std::vector<std::vector<Index>> selections(d);
  std::optional<T> g;
  if (trace) *trace = SpTrace{{}, std::vector<double>(d, 0.0)};
  for (Index j : order) {
    const T& cur = g ? *g : x;
    const Index ell = cfg.ranks[static_cast<std::size_t>(j)] + cfg.oversampling;
    detail::SpModeResult m = detail::sp_mode(detail::unfolding(cur, j), ell, cfg, j);
    T next = select_mode(cur, j, m.selection.indices);
    g = std::move(next);
    if (trace) {
      if constexpr (std::is_same_v<T, SparseTensor>)
        trace->core_nnz.push_back(g->nnz());
      else
        trace->core_nnz.push_back(g->numel());
      trace->conditioning[static_cast<std::size_t>(j)] = m.selection.conditioning;
    }
    factors[static_cast<std::size_t>(j)] = std::move(m.factor);
    selections[static_cast<std::size_t>(j)] = std::move(m.selection.indices);
  }
  TuckerTensor t{Core(std::move(*g)), std::move(factors), detail::base_meta("sp-sthosvd", cfg)};
  t.meta.order = order;
  t.meta.selections = std::move(selections);
  return t;
}

/// Structure-preserving HOSVD: every mode selects from the unfolding of x
/// itself; the core is x restricted to the product of the selections.
template <TensorType T>
TuckerTensor sp_hosvd(const T& x, const TuckerConfig& cfg, SpTrace* trace = nullptr) {
  detail::check_sp_ranks(x.shape(), cfg.ranks, cfg.oversampling);
  const auto d = static_cast<std::size_t>(x.order());
  std::vector<Matrix> factors(d);
  std::vector<std::vector<Index>> selections(d);
  if (trace) *trace = SpTrace{{}, std::vector<double>(d, 0.0)};
  for (Index j = 0; j < x.order(); ++j) {
    const Index ell = cfg.ranks[static_cast<std::size_t>(j)] + cfg.oversampling;
    detail::SpModeResult m = detail::sp_mode(detail::unfolding(x, j), ell, cfg, j);
    if (trace) trace->conditioning[static_cast<std::size_t>(j)] = m.selection.conditioning;
    factors[static_cast<std::size_t>(j)] = std::move(m.factor);
    selections[static_cast<std::size_t>(j)] = std::move(m.selection.indices);
  }
  T g = select_mode(x, 0, selections[0]);
  for (Index j = 1; j < x.order(); ++j) g = select_mode(g, j, selections[static_cast<std::size_t>(j)]);
  if (trace) {
    if constexpr (std::is_same_v<T, SparseTensor>)
      trace->core_nnz.push_back(g.nnz());
    else
      trace->core_nnz.push_back(g.numel());
  }
  TuckerTensor t{Core(std::move(g)), std::move(factors), detail::base_meta("sp-hosvd", cfg)};
  t.meta.order = detail::identity_order(x.order());
  t.meta.selections = std::move(selections);
  return t;
}

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"hosvd",   "sthosvd",          "r-hosvd",
                                              "r-sthosvd", "adaptive-r-hosvd", "adaptive-r-sthosvd",
                                              "sp-hosvd", "sp-sthosvd"};
  return names;
}

/// Dispatch by method name (see method_names()).
template <TensorType T>
TuckerTensor decompose(const std::string& method, const T& x, const TuckerConfig& cfg) {
  if (method == "hosvd") return hosvd(x, cfg);
  if (method == "sthosvd") return sthosvd(x, cfg);
  if (method == "r-hosvd") return r_hosvd(x, cfg);
  if (method == "r-sthosvd") return r_sthosvd(x, cfg);
  if (method == "adaptive-r-hosvd") return adaptive_r_hosvd(x, cfg);
  if (method == "adaptive-r-sthosvd") return adaptive_r_sthosvd(x, cfg);
  if (method == "sp-hosvd") return sp_hosvd(x, cfg);
  if (method == "sp-sthosvd") return sp_sthosvd(x, cfg);
  throw std::invalid_argument("unknown method '" + method + "'");
}

}  // namespace rtucker
