#pragma once

#include "rtucker/shape.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtucker {

/// Dense d-mode array stored first-mode-fastest: entry (i_1, ..., i_d) lives at
/// i_1 + I_1 * (i_2 + I_2 * (...)). The mode-0 unfolding is therefore a plain
/// column-major reshape.
class DenseTensor {
 public:
  DenseTensor() = default;

  /// Zero-filled tensor.
  explicit DenseTensor(Shape shape)
      : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_.numel()), 0.0) {}

  DenseTensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (static_cast<Index>(values_.size()) != shape_.numel())
      throw std::invalid_argument("value count does not match shape");
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("tensor values must be finite");
  }

  const Shape& shape() const noexcept { return shape_; }
  Index order() const noexcept { return shape_.order(); }
  Index numel() const noexcept { return static_cast<Index>(values_.size()); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  Index linear_index(std::span<const Index> idx) const {
    if (static_cast<Index>(idx.size()) != order())
      throw std::invalid_argument("index arity does not match tensor order");
    Index lin = 0;
    for (Index k = order() - 1; k >= 0; --k) {
      const Index i = idx[static_cast<std::size_t>(k)];
      if (i < 0 || i >= shape_[k]) throw std::out_of_range("tensor index out of bounds");
      lin = lin * shape_[k] + i;
    }
    return lin;
  }

  double operator()(std::span<const Index> idx) const { return values_[linear_index(idx)]; }
  double& operator()(std::span<const Index> idx) { return values_[linear_index(idx)]; }
  double operator()(std::initializer_list<Index> idx) const {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }
  double& operator()(std::initializer_list<Index> idx) {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }

  double operator[](Index lin) const { return values_[static_cast<std::size_t>(lin)]; }
  double& operator[](Index lin) { return values_[static_cast<std::size_t>(lin)]; }

  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Multi-index of a linear position, first mode fastest.
inline std::vector<Index> unravel(const Shape& shape, Index lin) {
  std::vector<Index> idx(static_cast<std::size_t>(shape.order()));
  for (Index k = 0; k < shape.order(); ++k) {
    idx[static_cast<std::size_t>(k)] = lin % shape[k];
    lin /= shape[k];
  }
  return idx;
}

}  // namespace rtucker
