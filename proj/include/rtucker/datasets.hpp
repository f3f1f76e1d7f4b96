#pragma once

// Test tensors and the transforms used to shrink sparse datasets.

#include "rtucker/dense_tensor.hpp"
#include "rtucker/shape.hpp"
#include "rtucker/sparse_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

/// x(i_1, ..., i_d) = 1 / (i_1 + ... + i_d) with 1-based indices.
inline DenseTensor gen_hilbert(const Shape& shape) {
  DenseTensor x(shape);
  const Index d = shape.order();
  const Index n0 = shape[0];
  std::vector<Index> idx(static_cast<std::size_t>(d), 0);
  double* out = x.data();
  // Sweep mode 0 innermost; offset holds the 1-based index sum of modes 1..d-1.
  for (Index lin = 0; lin < shape.numel(); lin += n0) {
    Index offset = d;  // every 1-based index contributes an extra 1
    for (Index k = 1; k < d; ++k) offset += idx[static_cast<std::size_t>(k)];
    for (Index i = 0; i < n0; ++i) out[lin + i] = 1.0 / static_cast<double>(offset + i);
    for (Index k = 1; k < d; ++k) {
      if (++idx[static_cast<std::size_t>(k)] < shape[k]) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
  return x;
}

inline DenseTensor gen_hilbert(Index d, Index n) {
  if (d < 1 || n < 1) throw std::invalid_argument("hilbert tensor needs d >= 1 and I >= 1");
  return gen_hilbert(Shape(std::vector<Index>(static_cast<std::size_t>(d), n)));
}

namespace detail {

struct SparseVector {
  std::vector<Index> pos;
  std::vector<double> val;
};

inline SparseVector random_sparse_vector(Index n, Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SparseVector v;
  // Floyd's algorithm: k distinct positions, each subset equally likely.
  std::vector<Index> chosen;
  for (Index j = n - k; j < n; ++j) {
    const Index t = std::uniform_int_distribution<Index>(0, j)(rng);
    chosen.push_back(std::find(chosen.begin(), chosen.end(), t) == chosen.end() ? t : j);
  }
  std::sort(chosen.begin(), chosen.end());
  v.pos = std::move(chosen);
  for (std::size_t t = 0; t < v.pos.size(); ++t) v.val.push_back(unif(rng));
  return v;
}

}  // namespace detail

/// sum_{i<=10} (gamma / i^2) x_i o y_i o z_i + sum_{i=11..n} (1 / i^2) x_i o y_i o z_i
/// on an n x n x n grid. Every vector has ceil(0.05 n) nonzeros at distinct
/// uniformly drawn positions with uniform(0, 1) values.
inline SparseTensor gen_synthetic_sparse(Index n, double gamma, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synthetic sparse tensor needs n >= 1");
  if (!(gamma > 0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be positive");
  const Index k = static_cast<Index>(std::ceil(0.05 * static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  std::vector<Index> idx;
  std::vector<double> vals;
  idx.reserve(static_cast<std::size_t>(3 * n * k * k * k));
  vals.reserve(static_cast<std::size_t>(n * k * k * k));
  for (Index i = 1; i <= n; ++i) {
    const double coef = (i <= 10 ? gamma : 1.0) / static_cast<double>(i * i);
    const auto x = detail::random_sparse_vector(n, k, rng);
    const auto y = detail::random_sparse_vector(n, k, rng);
    const auto z = detail::random_sparse_vector(n, k, rng);
    for (std::size_t c = 0; c < z.pos.size(); ++c)
      for (std::size_t b = 0; b < y.pos.size(); ++b)
        for (std::size_t a = 0; a < x.pos.size(); ++a) {
          idx.insert(idx.end(), {x.pos[a], y.pos[b], z.pos[c]});
          vals.push_back(coef * x.val[a] * y.val[b] * z.val[c]);
        }
  }
  return SparseTensor(Shape{n, n, n}, std::move(idx), std::move(vals));
}

/// About `nnz` uniformly placed entries (duplicates merged) with values in
/// (0, 1]; stands in for datasets that are only known by shape.
inline SparseTensor gen_random_sparse(const Shape& shape, Index nnz, std::uint64_t seed) {
  if (nnz < 0) throw std::invalid_argument("nnz must be >= 0");
  std::mt19937_64 rng(seed);
  std::vector<Index> idx;
  std::vector<double> vals;
  idx.reserve(static_cast<std::size_t>(nnz * shape.order()));
  for (Index e = 0; e < nnz; ++e) {
    for (Index k = 0; k < shape.order(); ++k)
      idx.push_back(std::uniform_int_distribution<Index>(0, shape[k] - 1)(rng));
    vals.push_back(1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  }
  return SparseTensor(shape, std::move(idx), std::move(vals));
}

/// Keeps entries whose 1-based index satisfies (i_k - 1) mod s_k = 0 in every
/// mode and renumbers them to (i_k - 1) / s_k + 1; new sizes ceil(I_k / s_k).
inline SparseTensor subsample(const SparseTensor& x, const std::vector<Index>& strides) {
  const Shape& s = x.shape();
  if (static_cast<Index>(strides.size()) != s.order())
    throw std::invalid_argument("subsample: one stride per mode required");
  std::vector<Index> dims;
  for (Index k = 0; k < s.order(); ++k) {
    const Index st = strides[static_cast<std::size_t>(k)];
    if (st < 1) throw std::invalid_argument("subsample: strides must be >= 1");
    dims.push_back((s[k] + st - 1) / st);
  }
  std::vector<Index> idx;
  std::vector<double> vals;
  for (Index e = 0; e < x.nnz(); ++e) {
    bool keep = true;
    for (Index k = 0; k < s.order() && keep; ++k) keep = x.index(e, k) % strides[static_cast<std::size_t>(k)] == 0;
    if (!keep) continue;
    for (Index k = 0; k < s.order(); ++k) idx.push_back(x.index(e, k) / strides[static_cast<std::size_t>(k)]);
    vals.push_back(x.value(e));
  }
  return SparseTensor(Shape(std::move(dims)), std::move(idx), std::move(vals));
}

/// Sums over `mode`, removing it.
inline SparseTensor condense_mode(const SparseTensor& x, Index mode) {
  const Shape& s = x.shape();
  if (s.order() < 2) throw std::invalid_argument("condense_mode: tensor must have at least two modes");
  s.check_mode(mode);
  std::vector<Index> dims;
  for (Index k = 0; k < s.order(); ++k)
    if (k != mode) dims.push_back(s[k]);
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(x.nnz() * (s.order() - 1)));
  for (Index e = 0; e < x.nnz(); ++e)
    for (Index k = 0; k < s.order(); ++k)
      if (k != mode) idx.push_back(x.index(e, k));
  std::vector<double> vals(x.raw_values().begin(), x.raw_values().end());
  return SparseTensor(Shape(std::move(dims)), std::move(idx), std::move(vals));
}

}  // namespace rtucker
