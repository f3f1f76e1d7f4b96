#pragma once

// Coordinate text format (.tns): one entry per line, d 1-based integer
// indices followed by a real value, whitespace separated. Lines starting
// with '#' and blank lines are ignored.

#include "rtucker/errors.hpp"
#include "rtucker/shape.hpp"
#include "rtucker/sparse_tensor.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace rtucker {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

}  // namespace detail

/// Reads entries until end of stream. Without `shape` the size of each mode
/// is its largest index; with it, indices beyond the shape are errors.
inline SparseTensor parse_tns(std::istream& in, const std::optional<Shape>& shape = std::nullopt,
                              const std::string& source = {}) {
  auto fail = [&](const std::string& what, long line) { return ParseError(what, line, source); };
  std::vector<Index> idx;
  std::vector<double> vals;
  std::vector<Index> max_index;
  std::size_t d = shape ? static_cast<std::size_t>(shape->order()) : 0;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (d == 0) {
      if (tok.size() < 2) throw fail("expected at least one index and a value", lineno);
      d = tok.size() - 1;
    }
    if (tok.size() != d + 1)
      throw fail("expected " + std::to_string(d + 1) + " fields, found " + std::to_string(tok.size()),
                       lineno);
    if (max_index.empty()) max_index.assign(d, 0);
    for (std::size_t k = 0; k < d; ++k) {
      long long v = 0;
      const auto r = std::from_chars(tok[k].data(), tok[k].data() + tok[k].size(), v);
      if (r.ec != std::errc() || r.ptr != tok[k].data() + tok[k].size())
        throw fail("malformed index '" + std::string(tok[k]) + "'", lineno);
      if (v < 1) throw fail("indices are 1-based, found " + std::to_string(v), lineno);
      if (shape && v > (*shape)[static_cast<Index>(k)])
        throw fail("index " + std::to_string(v) + " exceeds mode size " +
                             std::to_string((*shape)[static_cast<Index>(k)]),
                         lineno);
      idx.push_back(static_cast<Index>(v - 1));
      max_index[k] = std::max<Index>(max_index[k], static_cast<Index>(v));
    }
    double value = 0.0;
    const auto& vt = tok[d];
    const auto r = std::from_chars(vt.data(), vt.data() + vt.size(), value);
    if (r.ec != std::errc() || r.ptr != vt.data() + vt.size() || !std::isfinite(value))
      throw fail("malformed value '" + std::string(vt) + "'", lineno);
    vals.push_back(value);
  }
  if (shape) return SparseTensor(*shape, std::move(idx), std::move(vals));
  if (vals.empty()) throw fail("no entries", lineno);
  return SparseTensor(Shape(std::move(max_index)), std::move(idx), std::move(vals));
}

inline SparseTensor read_tns(const std::string& path, const std::optional<Shape>& shape = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_tns(in, shape, path);
}

/// Values are written in shortest round-trip form, so reading back is exact.
inline void write_tns(const SparseTensor& x, std::ostream& out) {
  char buf[64];
  std::string line;
  for (Index e = 0; e < x.nnz(); ++e) {
    line.clear();
    for (Index k = 0; k < x.order(); ++k) {
      line += std::to_string(x.index(e, k) + 1);
      line += ' ';
    }
    const auto r = std::to_chars(buf, buf + sizeof buf, x.value(e));
    line.append(buf, r.ptr);
    line += '\n';
    out << line;
  }
}

inline void write_tns(const SparseTensor& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_tns(x, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace rtucker
