#pragma once

// On-disk Tucker archives. A directory holds
//   manifest.json       method, shapes, configuration (modes 1-based)
//   factor_<j>.bin      one per mode, j = 1..d
//   core.bin | core.tns dense or sparse core
//   selection_<j>.txt   structure-preserving runs: selected 1-based indices
// Binary files are "RTKTNSR1", uint64 d, uint64 dims[d], then little-endian
// doubles in first-mode-fastest order. Factors are stored as 2-mode tensors.

#include "rtucker/dense_tensor.hpp"
#include "rtucker/errors.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/sparse_tensor.hpp"
#include "rtucker/tns_io.hpp"
#include "rtucker/tucker_tensor.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace rtucker {

inline constexpr char kBinaryMagic[8] = {'R', 'T', 'K', 'T', 'N', 'S', 'R', '1'};
inline constexpr int kArchiveVersion = 1;

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
  return r;
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return to_le(v);
}

}  // namespace detail

inline void write_binary(const std::string& path, const Shape& shape, const double* data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kBinaryMagic, sizeof kBinaryMagic);
  detail::write_u64(out, static_cast<std::uint64_t>(shape.order()));
  for (Index n : shape.dims()) detail::write_u64(out, static_cast<std::uint64_t>(n));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(shape.numel() * 8));
  } else {
    for (Index i = 0; i < shape.numel(); ++i) detail::write_u64(out, std::bit_cast<std::uint64_t>(data[i]));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline DenseTensor read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing file " + path);
  char magic[sizeof kBinaryMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof magic) != 0) throw IoError("corrupt header in " + path);
  const std::uint64_t d = detail::read_u64(in);
  if (!in || d == 0 || d > 64) throw IoError("corrupt header in " + path);
  std::vector<Index> dims;
  for (std::uint64_t k = 0; k < d; ++k) {
    const std::uint64_t n = detail::read_u64(in);
    if (!in || n == 0 || n > (std::uint64_t{1} << 40)) throw IoError("corrupt header in " + path);
    dims.push_back(static_cast<Index>(n));
  }
  Shape shape;
  try {
    shape = Shape(std::move(dims));
  } catch (const std::exception&) {
    throw IoError("corrupt header in " + path);
  }
  std::vector<double> values(static_cast<std::size_t>(shape.numel()));
  for (auto& v : values) {
    std::uint64_t bits = detail::read_u64(in);
    v = std::bit_cast<double>(bits);
  }
  if (!in) throw IoError("truncated data in " + path);
  in.peek();
  if (!in.eof()) throw IoError("trailing bytes in " + path);
  try {
    return DenseTensor(std::move(shape), std::move(values));
  } catch (const std::exception& e) {
    throw IoError(std::string("invalid values in ") + path + ": " + e.what());
  }
}

/// Fields stored next to the decomposition that are not part of it.
struct ArchiveExtras {
  std::optional<double> rel_error;
  std::string input;  // how the source tensor was specified
};

namespace detail {

inline std::vector<long long> plus_one(const std::vector<Index>& v) {
  std::vector<long long> out;
  for (Index i : v) out.push_back(static_cast<long long>(i) + 1);
  return out;
}

}  // namespace detail

inline void save_tucker(const TuckerTensor& t, const std::string& dir, const ArchiveExtras& extras = {}) {
  t.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  const fs::path root(dir);
  const Index d = t.core_shape().order();

  nlohmann::ordered_json m;
  m["format"] = "rtucker-archive";
  m["version"] = kArchiveVersion;
  m["method"] = t.meta.method;
  m["shape"] = t.shape().dims();
  m["core_shape"] = t.core_shape().dims();
  m["core_format"] = t.sparse_core() ? "tns" : "bin";
  m["ranks"] = t.meta.ranks;
  m["oversampling"] = t.meta.oversampling;
  m["power"] = t.meta.power;
  m["seed"] = t.meta.seed;
  m["order"] = detail::plus_one(t.meta.order);
  m["tolerance"] = t.meta.tolerance;
  m["mode_tolerances"] = t.meta.mode_tolerances;
  m["block"] = t.meta.block;
  m["trim"] = t.meta.trim;
  m["has_selections"] = !t.meta.selections.empty();
  if (extras.rel_error) m["rel_error"] = *extras.rel_error;
  if (!extras.input.empty()) m["input"] = extras.input;

  for (Index j = 0; j < d; ++j) {
    const Matrix& a = t.factors[static_cast<std::size_t>(j)];
    write_binary((root / ("factor_" + std::to_string(j + 1) + ".bin")).string(), Shape{a.rows(), a.cols()},
                 a.data());
  }
  if (const auto* sc = std::get_if<SparseTensor>(&t.core)) {
    write_tns(*sc, (root / "core.tns").string());
  } else {
    const auto& dc = std::get<DenseTensor>(t.core);
    write_binary((root / "core.bin").string(), dc.shape(), dc.data());
  }
  for (std::size_t j = 0; j < t.meta.selections.size(); ++j) {
    const std::string path = (root / ("selection_" + std::to_string(j + 1) + ".txt")).string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (Index i : t.meta.selections[j]) out << i + 1 << '\n';
    if (!out) throw IoError("write failed: " + path);
  }
  const std::string mpath = (root / "manifest.json").string();
  std::ofstream out(mpath);
  if (!out) throw IoError("cannot open " + mpath + " for writing");
  out << m.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + mpath);
}

namespace detail {

inline nlohmann::json read_manifest(const std::string& dir) {
  const std::string path = (std::filesystem::path(dir) / "manifest.json").string();
  std::ifstream in(path);
  if (!in) throw IoError("missing file " + path);
  try {
    nlohmann::json m = nlohmann::json::parse(in);
    if (m.value("format", "") != "rtucker-archive") throw IoError("not an rtucker archive: " + path);
    if (m.value("version", 0) != kArchiveVersion) throw IoError("unsupported archive version in " + path);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt manifest " + path + ": " + e.what());
  }
}

inline std::vector<Index> read_selection(const std::string& path, Index limit) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file " + path);
  std::vector<Index> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    long long v = 0;
    const auto r = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), v);
    if (tok.size() != 1 || r.ec != std::errc() || r.ptr != tok[0].data() + tok[0].size() || v < 1 || v > limit)
      throw IoError("corrupt selection file " + path + " at line " + std::to_string(lineno));
    out.push_back(static_cast<Index>(v - 1));
  }
  return out;
}

}  // namespace detail

inline ArchiveExtras load_archive_extras(const std::string& dir) {
  const nlohmann::json m = detail::read_manifest(dir);
  ArchiveExtras x;
  if (m.contains("rel_error")) x.rel_error = m["rel_error"].get<double>();
  x.input = m.value("input", "");
  return x;
}

inline TuckerTensor load_tucker(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const nlohmann::json m = detail::read_manifest(dir);
  const std::string mpath = (root / "manifest.json").string();
  TuckerTensor t;
  Shape shape, core_shape;
  std::string core_format;
  try {
    shape = Shape(m.at("shape").get<std::vector<Index>>());
    core_shape = Shape(m.at("core_shape").get<std::vector<Index>>());
    core_format = m.at("core_format").get<std::string>();
    t.meta.method = m.at("method").get<std::string>();
    t.meta.ranks = m.at("ranks").get<std::vector<Index>>();
    t.meta.oversampling = m.at("oversampling").get<Index>();
    t.meta.power = m.at("power").get<Index>();
    t.meta.seed = m.at("seed").get<std::uint64_t>();
    for (long long j : m.at("order").get<std::vector<long long>>()) t.meta.order.push_back(static_cast<Index>(j - 1));
    t.meta.tolerance = m.at("tolerance").get<double>();
    t.meta.mode_tolerances = m.at("mode_tolerances").get<std::vector<double>>();
    t.meta.block = m.at("block").get<Index>();
    t.meta.trim = m.value("trim", false);
  } catch (const std::exception& e) {
    throw IoError("corrupt manifest " + mpath + ": " + e.what());
  }
  if (shape.order() != core_shape.order()) throw IoError("corrupt manifest " + mpath + ": order mismatch");
  const Index d = shape.order();

  for (Index j = 0; j < d; ++j) {
    const std::string path = (root / ("factor_" + std::to_string(j + 1) + ".bin")).string();
    DenseTensor f = read_binary(path);
    if (f.order() != 2 || f.shape()[0] != shape[j] || f.shape()[1] != core_shape[j])
      throw IoError("factor dimensions in " + path + " do not match the manifest");
    t.factors.push_back(ConstMatrixMap(f.data(), f.shape()[0], f.shape()[1]));
  }
  if (core_format == "tns") {
    const std::string path = (root / "core.tns").string();
    std::ifstream probe(path);
    if (!probe) throw IoError("missing file " + path);
    try {
      t.core = read_tns(path, core_shape);
    } catch (const ParseError& e) {
      throw IoError(std::string("corrupt core file: ") + e.what());
    }
  } else if (core_format == "bin") {
    const std::string path = (root / "core.bin").string();
    DenseTensor c = read_binary(path);
    if (!(c.shape() == core_shape)) throw IoError("core dimensions in " + path + " do not match the manifest");
    t.core = std::move(c);
  } else {
    throw IoError("corrupt manifest " + mpath + ": unknown core format '" + core_format + "'");
  }
  if (m.value("has_selections", false)) {
    for (Index j = 0; j < d; ++j) {
      const std::string path = (root / ("selection_" + std::to_string(j + 1) + ".txt")).string();
      auto sel = detail::read_selection(path, shape[j]);
      if (static_cast<Index>(sel.size()) != core_shape[j])
        throw IoError("selection length in " + path + " does not match the core");
      t.meta.selections.push_back(std::move(sel));
    }
  }
  return t;
}

}  // namespace rtucker
