#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtucker {

using Index = Eigen::Index;

/// Mode sizes (I_1, ..., I_d) of a tensor. Modes are 0-based in the C++ API.
class Shape {
 public:
  Shape() = default;

  explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) { validate(); }
  Shape(std::initializer_list<Index> dims) : dims_(dims) { validate(); }

  Index order() const noexcept { return static_cast<Index>(dims_.size()); }
  Index operator[](Index mode) const { return dims_[static_cast<std::size_t>(mode)]; }
  const std::vector<Index>& dims() const noexcept { return dims_; }

  /// Total number of elements, prod I_j.
  Index numel() const noexcept { return numel_; }

  /// Product of the dims strictly before `mode`.
  Index left(Index mode) const {
    check_mode(mode);
    Index p = 1;
    for (Index k = 0; k < mode; ++k) p *= (*this)[k];
    return p;
  }

  /// Product of the dims strictly after `mode`.
  Index right(Index mode) const {
    check_mode(mode);
    Index p = 1;
    for (Index k = mode + 1; k < order(); ++k) p *= (*this)[k];
    return p;
  }

  /// prod_{k != mode} I_k, the column count of the mode unfolding.
  Index complement(Index mode) const { return left(mode) * right(mode); }

  Shape with_dim(Index mode, Index n) const {
    check_mode(mode);
    auto d = dims_;
    d[static_cast<std::size_t>(mode)] = n;
    return Shape(std::move(d));
  }

  void check_mode(Index mode) const {
    if (mode < 0 || mode >= order())
      throw std::invalid_argument("mode " + std::to_string(mode) + " out of range for order-" +
                                  std::to_string(order()) + " tensor");
  }

  std::string to_string(char sep = 'x') const {
    std::string s;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
      if (k) s += sep;
      s += std::to_string(dims_[k]);
    }
    return s;
  }

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  void validate() {
    if (dims_.empty()) throw std::invalid_argument("shape must have at least one mode");
    Index n = 1;
    for (Index d : dims_) {
      if (d < 1) throw std::invalid_argument("shape dims must be positive");
      if (__builtin_mul_overflow(n, d, &n))
        throw std::invalid_argument("shape element count overflows the index type");
    }
    numel_ = n;
  }

  std::vector<Index> dims_;
  Index numel_ = 0;
};

}  // namespace rtucker
