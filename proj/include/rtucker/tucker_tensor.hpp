#pragma once

#include "rtucker/dense_tensor.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/sparse_tensor.hpp"
#include "rtucker/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rtucker {

using Core = std::variant<DenseTensor, SparseTensor>;

/// How a decomposition was produced. Modes and selection indices are 0-based.
struct TuckerMeta {
  std::string method;
  std::vector<Index> ranks;           // requested target ranks (empty for adaptive runs)
  Index oversampling = 0;
  Index power = 0;                    // subspace iterations
  std::uint64_t seed = 0;
  std::vector<Index> order;           // processing order actually used
  double tolerance = 0.0;             // adaptive runs only
  std::vector<double> mode_tolerances;
  Index block = 0;
  bool trim = false;                  // adaptive runs: ranges trimmed to the leading subspace
  std::vector<std::vector<Index>> selections;  // structure-preserving runs only

  friend bool operator==(const TuckerMeta&, const TuckerMeta&) = default;
};

/// [G; A_1, ..., A_d] representing G x_1 A_1 ... x_d A_d.
struct TuckerTensor {
  Core core;
  std::vector<Matrix> factors;
  TuckerMeta meta;

  const Shape& core_shape() const {
    return std::visit([](const auto& c) -> const Shape& { return c.shape(); }, core);
  }
  bool sparse_core() const noexcept { return std::holds_alternative<SparseTensor>(core); }

  /// Shape of the represented tensor, (rows of A_1, ..., rows of A_d).
  Shape shape() const {
    std::vector<Index> dims;
    for (const auto& a : factors) dims.push_back(a.rows());
    return Shape(std::move(dims));
  }

  void validate() const {
    const Shape& cs = core_shape();
    if (static_cast<Index>(factors.size()) != cs.order())
      throw std::invalid_argument("tucker: factor count " + std::to_string(factors.size()) +
                                  " does not match core order " + std::to_string(cs.order()));
    for (Index j = 0; j < cs.order(); ++j) {
      const Matrix& a = factors[static_cast<std::size_t>(j)];
      if (a.cols() != cs[j] || a.rows() < 1)
        throw std::invalid_argument("tucker: factor " + std::to_string(j) + " is " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " but core dim is " + std::to_string(cs[j]));
    }
  }

  friend bool operator==(const TuckerTensor& a, const TuckerTensor& b) {
    if (!(a.core == b.core) || !(a.meta == b.meta) || a.factors.size() != b.factors.size()) return false;
    for (std::size_t j = 0; j < a.factors.size(); ++j)
      if (a.factors[j].rows() != b.factors[j].rows() || a.factors[j].cols() != b.factors[j].cols() ||
          a.factors[j] != b.factors[j])
        return false;
    return true;
  }
};

namespace detail {

/// G x_1 A_1 ... x_{d-1} A_{d-1}; the last mode is left for slab streaming.
inline DenseTensor partial_reconstruction(const TuckerTensor& t) {
  t.validate();
  const Index d = t.core_shape().order();
  DenseTensor p = std::visit(
      [&](const auto& c) -> DenseTensor {
        if (d == 1) {
          if constexpr (std::is_same_v<std::decay_t<decltype(c)>, SparseTensor>)
            return c.to_dense();
          else
            return c;
        }
        return mode_product(c, t.factors[0], 0);
      },
      t.core);
  for (Index j = 1; j + 1 < d; ++j) p = mode_product(p, t.factors[static_cast<std::size_t>(j)], j);
  return p;
}

}  // namespace detail

inline DenseTensor reconstruct(const TuckerTensor& t) {
  const Index d = t.core_shape().order();
  DenseTensor p = detail::partial_reconstruction(t);
  return mode_product(p, t.factors[static_cast<std::size_t>(d - 1)], d - 1);
}

/// Default ceiling on prod I_j for error evaluation by streamed reconstruction.
inline constexpr Index kDenseReconstructionCap = Index{1} << 27;

namespace detail {

/// Calls f(lin_begin, chunk) where chunk (L x w, L = prod_{j<d} I_j) holds the
/// reconstruction for last-mode indices [lin_begin / L, lin_begin / L + w).
template <class F>
void for_each_reconstruction_chunk(const TuckerTensor& t, F&& f) {
  const Index d = t.core_shape().order();
  const DenseTensor p = partial_reconstruction(t);
  const Matrix& last = t.factors[static_cast<std::size_t>(d - 1)];
  const Index rank = last.cols(), n = last.rows();
  const Index left = p.numel() / rank;
  ConstMatrixMap pm(p.data(), left, rank);
  const Index w = std::max<Index>(1, (Index{1} << 22) / std::max<Index>(1, left));
  Matrix chunk;
  for (Index i0 = 0; i0 < n; i0 += w) {
    const Index cw = std::min(w, n - i0);
    chunk.noalias() = pm * last.middleRows(i0, cw).transpose();
    f(i0 * left, chunk);
  }
}

}  // namespace detail

/// ||x - reconstruct(t)||_F / ||x||_F, streamed over slabs of the last mode so
/// the full reconstruction is never held in memory.
inline double relative_error(const DenseTensor& x, const TuckerTensor& t) {
  if (!(t.shape() == x.shape())) throw std::invalid_argument("relative_error: shape mismatch");
  const double nx = frobenius_norm(x);
  if (!(nx > 0)) throw std::invalid_argument("relative_error: reference tensor has zero norm");
  double err2 = 0.0;
  detail::for_each_reconstruction_chunk(t, [&](Index lin0, const Matrix& chunk) {
    ConstMatrixMap xs(x.data() + lin0, chunk.rows(), chunk.cols());
    err2 += (xs - chunk).squaredNorm();
  });
  return std::sqrt(err2) / nx;
}

/// Sparse reference. Up to `cap` elements the reconstruction is streamed in
/// slabs and compared entry by entry; beyond it the error follows from
/// ||x||^2 - 2 <x x_j A_j^T, G> + <G x_j A_j^T A_j, G>, which never touches
/// the full index space (less accurate for very small errors).
inline double relative_error(const SparseTensor& x, const TuckerTensor& t,
                             Index cap = kDenseReconstructionCap) {
  if (!(t.shape() == x.shape())) throw std::invalid_argument("relative_error: shape mismatch");
  const double nx2 = squared_norm(x.raw_values());
  if (!(nx2 > 0)) throw std::invalid_argument("relative_error: reference tensor has zero norm");
  if (x.shape().numel() <= cap) {
    std::vector<std::pair<Index, double>> entries(static_cast<std::size_t>(x.nnz()));
    for (Index e = 0; e < x.nnz(); ++e) entries[static_cast<std::size_t>(e)] = {x.linear(e), x.value(e)};
    std::sort(entries.begin(), entries.end());
    std::size_t next = 0;
    double err2 = 0.0;
    detail::for_each_reconstruction_chunk(t, [&](Index lin0, const Matrix& chunk) {
      err2 += chunk.squaredNorm();
      const Index lin1 = lin0 + chunk.size();
      const double* c = chunk.data();
      for (; next < entries.size() && entries[next].first < lin1; ++next) {
        const double xh = c[entries[next].first - lin0];
        const double diff = entries[next].second - xh;
        err2 += diff * diff - xh * xh;
      }
    });
    return std::sqrt(std::max(0.0, err2) / nx2);
  }
  const Index d = x.order();
  DenseTensor core = std::visit(
      [](const auto& c) -> DenseTensor {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, SparseTensor>)
          return c.to_dense();
        else
          return c;
      },
      t.core);
  DenseTensor proj = mode_product(x, t.factors[0].transpose(), 0);
  for (Index j = 1; j < d; ++j) proj = mode_product(proj, t.factors[static_cast<std::size_t>(j)].transpose(), j);
  DenseTensor gram_core = core;
  for (Index j = 0; j < d; ++j) {
    const Matrix& a = t.factors[static_cast<std::size_t>(j)];
    gram_core = mode_product(gram_core, a.transpose() * a, j);
  }
  const auto dot = [](const DenseTensor& a, const DenseTensor& b) {
    return Eigen::Map<const Vector>(a.data(), a.numel()).dot(Eigen::Map<const Vector>(b.data(), b.numel()));
  };
  const double err2 = nx2 - 2.0 * dot(proj, core) + dot(gram_core, core);
  return std::sqrt(std::max(0.0, err2) / nx2);
}

/// Relative error of an orthogonal projection x x_j (A_j A_j^T) from norms
/// alone: valid when every factor has orthonormal columns and the core is
/// x x_j A_j^T.
inline double relative_error_orthonormal(double norm_x, double norm_core) {
  if (!(norm_x > 0)) throw std::invalid_argument("relative_error: reference tensor has zero norm");
  return std::sqrt(std::max(0.0, norm_x * norm_x - norm_core * norm_core)) / norm_x;
}

inline double core_norm(const TuckerTensor& t) {
  return std::visit([](const auto& c) { return frobenius_norm(c); }, t.core);
}

}  // namespace rtucker
