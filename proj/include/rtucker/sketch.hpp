#pragma once

#include "rtucker/linalg.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace rtucker {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Seeded source of a conceptually infinite Gaussian matrix Omega with one
/// column per cursor position. Entry (i, c) is a pure function of
/// (seed, stream_id, i, c): any row range of any column window can be
/// generated independently, so Omega never has to be stored and block
/// partitioning does not change the values.
class SketchStream {
 public:
  SketchStream(std::uint64_t seed, std::uint64_t stream_id, Index cursor = 0)
      : seed_(seed), stream_(stream_id), cursor_(cursor) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }
  Index cursor() const noexcept { return cursor_; }
  void advance(Index cols) noexcept { cursor_ += cols; }

  /// Omega(i, cursor + j) for rows [row_begin, row_begin + out.rows()) and
  /// j in [0, out.cols()). Does not move the cursor.
  template <class Out>
  void fill_rows(Index row_begin, Out&& out) const {
    for (Index j = 0; j < out.cols(); ++j) fill_column(cursor_ + j, row_begin, out.col(j));
  }

  /// Single entry; used for row-at-a-time access from sparse operators.
  double entry(Index row, Index col) const noexcept { return entry_with_key(column_key(col), row); }

  /// Per-column hash keys; with entry_with_key this generates scattered rows
  /// without rehashing the column for every entry.
  std::uint64_t column_key(Index col) const noexcept {
    return detail::splitmix64(detail::splitmix64(seed_ ^ 0xD1B54A32D192ED03ull) ^
                              detail::splitmix64(stream_ * 0x2545F4914F6CDD1Dull + 1) ^
                              static_cast<std::uint64_t>(col) * 0x9E6C63D0676A9A99ull);
  }

  static double entry_with_key(std::uint64_t key, Index row) noexcept {
    EntryEngine eng{key + static_cast<std::uint64_t>(row) * 0xD6E8FEB86659FD93ull};
    return boost::random::normal_distribution<double>()(eng);
  }

 private:
  // Fresh splitmix64 sequence per entry feeding a ziggurat sampler; rejections
  // draw further values from the same entry's sequence.
  struct EntryEngine {
    using result_type = std::uint64_t;
    std::uint64_t state;
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept { return detail::splitmix64(state += 0x9E3779B97F4A7C15ull); }
  };

  template <class Col>
  void fill_column(Index col, Index row_begin, Col&& dst) const {
    const std::uint64_t key = column_key(col);
    for (Index i = 0; i < dst.size(); ++i) dst(i) = entry_with_key(key, row_begin + i);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  Index cursor_;
};

/// rows x cols block of i.i.d. standard normals at the stream's cursor; the
/// cursor then advances by cols.
inline Matrix gaussian_block(SketchStream& s, Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gaussian_block needs rows, cols >= 1");
  Matrix out(rows, cols);
  s.fill_rows(0, out);
  s.advance(cols);
  return out;
}

}  // namespace rtucker
