#pragma once

#include "rtucker/dense_tensor.hpp"
#include "rtucker/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtucker {

/// Coordinate-format sparse tensor. Entries are kept sorted lexicographically
/// by (i_1, ..., i_d), duplicate-free and with no explicit zeros. Indices are
/// 0-based in memory; the .tns reader/writer converts to and from 1-based.
class SparseTensor {
 public:
  SparseTensor() = default;
  explicit SparseTensor(Shape shape) : shape_(std::move(shape)) {}

  /// `indices` holds nnz tuples back to back (entry-major). Duplicate tuples
  /// are merged by summation; entries that sum to zero are dropped.
  SparseTensor(Shape shape, std::vector<Index> indices, std::vector<double> values)
      : shape_(std::move(shape)) {
    const auto d = static_cast<std::size_t>(shape_.order());
    if (indices.size() != values.size() * d)
      throw std::invalid_argument("index count does not match value count times order");
    const std::size_t n = values.size();
    for (std::size_t e = 0; e < n; ++e) {
      if (!std::isfinite(values[e])) throw std::invalid_argument("sparse values must be finite");
      for (std::size_t k = 0; k < d; ++k) {
        const Index i = indices[e * d + k];
        if (i < 0 || i >= shape_[static_cast<Index>(k)])
          throw std::out_of_range("sparse index out of bounds");
      }
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(indices.begin() + a * d, indices.begin() + (a + 1) * d,
                                          indices.begin() + b * d, indices.begin() + (b + 1) * d);
    };
    if (!std::is_sorted(perm.begin(), perm.end(), less)) std::stable_sort(perm.begin(), perm.end(), less);

    indices_.reserve(indices.size());
    values_.reserve(n);
    for (std::size_t t = 0; t < n;) {
      const std::size_t e = perm[t];
      double sum = values[e];
      std::size_t u = t + 1;
      while (u < n && std::equal(indices.begin() + perm[u] * d, indices.begin() + (perm[u] + 1) * d,
                                 indices.begin() + e * d)) {
        sum += values[perm[u]];
        ++u;
      }
      if (sum != 0.0) {
        indices_.insert(indices_.end(), indices.begin() + e * d, indices.begin() + (e + 1) * d);
        values_.push_back(sum);
      }
      t = u;
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  Index order() const noexcept { return shape_.order(); }
  Index nnz() const noexcept { return static_cast<Index>(values_.size()); }

  std::span<const Index> coords(Index e) const {
    const auto d = static_cast<std::size_t>(order());
    return {indices_.data() + static_cast<std::size_t>(e) * d, d};
  }
  Index index(Index e, Index mode) const {
    return indices_[static_cast<std::size_t>(e * order() + mode)];
  }
  double value(Index e) const { return values_[static_cast<std::size_t>(e)]; }

  std::span<const Index> raw_indices() const noexcept { return indices_; }
  std::span<const double> raw_values() const noexcept { return values_; }

  /// Value at a multi-index (0 when absent). Binary search over the sorted list.
  double at(std::span<const Index> idx) const {
    const auto d = static_cast<std::size_t>(order());
    Index lo = 0, hi = nnz();
    while (lo < hi) {
      const Index mid = (lo + hi) / 2;
      auto c = coords(mid);
      if (std::lexicographical_compare(c.begin(), c.end(), idx.begin(), idx.begin() + d))
        lo = mid + 1;
      else
        hi = mid;
    }
    if (lo < nnz() && std::equal(idx.begin(), idx.begin() + d, coords(lo).begin())) return value(lo);
    return 0.0;
  }

  DenseTensor to_dense() const {
    DenseTensor out(shape_);
    for (Index e = 0; e < nnz(); ++e) out[linear(e)] = value(e);
    return out;
  }

  /// First-mode-fastest linear index of entry `e`.
  Index linear(Index e) const {
    auto c = coords(e);
    Index lin = 0;
    for (Index k = order() - 1; k >= 0; --k) lin = lin * shape_[k] + c[static_cast<std::size_t>(k)];
    return lin;
  }

  static SparseTensor from_dense(const DenseTensor& x) {
    std::vector<Index> idx;
    std::vector<double> vals;
    for (Index lin = 0; lin < x.numel(); ++lin) {
      if (x[lin] == 0.0) continue;
      auto multi = unravel(x.shape(), lin);
      idx.insert(idx.end(), multi.begin(), multi.end());
      vals.push_back(x[lin]);
    }
    return SparseTensor(x.shape(), std::move(idx), std::move(vals));
  }

  friend bool operator==(const SparseTensor& a, const SparseTensor& b) {
    return a.shape_ == b.shape_ && a.indices_ == b.indices_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<Index> indices_;
  std::vector<double> values_;
};

}  // namespace rtucker
