#pragma once

// Command implementations behind the rtucker executable. run_cli() is the
// whole program; main() only forwards argv so tests can drive it in-process.

#include "rtucker/rtucker.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace rtucker::cli {

using Input = std::variant<DenseTensor, SparseTensor>;

inline constexpr const char* kCsvHeader =
    "method,d,shape,ranks,p,q,seed,order,rel_error,bound,seconds,nnz_in,nnz_core";

/// Bad flags or infeasible parameters; exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunRecord {
  std::string method;
  Shape shape;
  std::vector<Index> ranks;  // core dimensions
  Index p = 0;
  Index q = 0;
  std::uint64_t seed = 0;
  std::vector<Index> order;  // 0-based
  double rel_error = 0.0;
  std::optional<double> bound;
  double seconds = 0.0;
  Index nnz_in = 0;
  Index nnz_core = 0;
};

inline std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string join(const std::vector<Index>& v, char sep, Index offset = 0) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i] + offset);
  }
  return s;
}

inline std::string csv_row(const RunRecord& r) {
  std::ostringstream o;
  o << r.method << ',' << r.shape.order() << ',' << r.shape.to_string() << ',' << join(r.ranks, 'x') << ','
    << r.p << ',' << r.q << ',' << r.seed << ',' << join(r.order, '-', 1) << ',' << fmt_double(r.rel_error)
    << ',' << (r.bound ? fmt_double(*r.bound) : "") << ',' << fmt_double(r.seconds) << ',' << r.nnz_in << ','
    << r.nnz_core;
  return o.str();
}

/// Writes rows to `path` (header added when the file is new or empty) or,
/// with an empty path, to `out`.
class CsvSink {
 public:
  CsvSink(const std::string& path, std::ostream& out) : out_(&out) {
    if (path.empty()) {
      *out_ << kCsvHeader << '\n';
      return;
    }
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    file_.open(path, std::ios::app);
    if (!file_) throw IoError("cannot open " + path + " for writing");
    out_ = &file_;
    if (fresh) *out_ << kCsvHeader << '\n';
  }
  void write(const RunRecord& r) {
    *out_ << csv_row(r) << '\n';
    out_->flush();
  }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  T v{};
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (s.empty() || r.ec != std::errc() || r.ptr != end) throw UsageError("invalid " + what + " '" + s + "'");
  return v;
}

inline std::vector<Index> parse_index_list(const std::string& s, const std::string& what) {
  std::vector<Index> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_number<Index>(tok, what));
  if (out.empty()) throw UsageError("empty " + what);
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_number<double>(tok, what));
  if (out.empty()) throw UsageError("empty " + what);
  return out;
}

/// "auto" or a 1-based permutation "i1,...,id"; returns 0-based (empty = auto).
inline std::vector<Index> parse_order(const std::string& s) {
  if (s.empty() || s == "auto") return {};
  std::vector<Index> o = parse_index_list(s, "order");
  for (auto& i : o) --i;
  return o;
}

/// path.tns | hilbert:d,I | sparse:n,gamma[,seed]
inline Input load_input(const std::string& spec) {
  if (spec.rfind("hilbert:", 0) == 0) {
    const auto f = split(spec.substr(8), ',');
    if (f.size() != 2) throw UsageError("expected hilbert:d,I");
    const Index d = parse_number<Index>(f[0], "mode count"), n = parse_number<Index>(f[1], "mode size");
    if (d < 1 || n < 1) throw UsageError("hilbert sizes must be >= 1");
    return gen_hilbert(d, n);
  }
  if (spec.rfind("sparse:", 0) == 0) {
    const auto f = split(spec.substr(7), ',');
    if (f.size() != 2 && f.size() != 3) throw UsageError("expected sparse:n,gamma[,seed]");
    const Index n = parse_number<Index>(f[0], "n");
    const double gamma = parse_number<double>(f[1], "gamma");
    const std::uint64_t seed = f.size() == 3 ? parse_number<std::uint64_t>(f[2], "seed") : 0;
    if (n < 1 || !(gamma > 0)) throw UsageError("sparse generator needs n >= 1 and gamma > 0");
    return gen_synthetic_sparse(n, gamma, seed);
  }
  return read_tns(spec);
}

inline const Shape& input_shape(const Input& x) {
  return std::visit([](const auto& v) -> const Shape& { return v.shape(); }, x);
}

inline Index input_nnz(const Input& x) {
  if (const auto* s = std::get_if<SparseTensor>(&x)) return s->nnz();
  return std::get<DenseTensor>(x).numel();
}

inline double input_norm(const Input& x) {
  return std::visit([](const auto& v) { return frobenius_norm(v); }, x);
}

inline bool is_sp(const std::string& method) { return method.rfind("sp-", 0) == 0; }
inline bool is_adaptive(const std::string& method) { return method.rfind("adaptive-", 0) == 0; }

inline Index core_nnz(const TuckerTensor& t) {
  if (const auto* s = std::get_if<SparseTensor>(&t.core)) return s->nnz();
  return std::get<DenseTensor>(t.core).numel();
}

inline double rel_error_of(const Input& x, const TuckerTensor& t) {
  return std::visit([&](const auto& v) { return relative_error(v, t); }, x);
}

/// Tail bounds need every unfolding's full spectrum; skipped above this size.
inline constexpr Index kBoundCap = Index{1} << 24;

/// Relative error bound matching the method, in units of ||x||_F.
inline std::optional<double> relative_bound(const std::string& method, const Input& x, const TuckerConfig& cfg,
                                            const std::vector<Index>& order) {
  if (is_adaptive(method)) return cfg.tolerance > 0 ? std::optional<double>(cfg.tolerance) : std::nullopt;
  const Shape& s = input_shape(x);
  const bool deterministic = method == "hosvd" || method == "sthosvd";
  if (!deterministic && cfg.oversampling < 2) return std::nullopt;
  if (s.numel() > kBoundCap) return std::nullopt;
  const auto deltas = std::visit([&](const auto& v) { return delta_tails(v, cfg.ranks); }, x);
  const double nx = input_norm(x);
  if (deterministic) {
    double s2 = 0.0;
    for (double dl : deltas) s2 += dl * dl;
    return std::sqrt(s2) / nx;
  }
  if (is_sp(method)) {
    const auto rho = method == "sp-hosvd" ? std::vector<Index>{} : order;
    return bound_sp(s, cfg.ranks, cfg.oversampling, deltas, rho) / nx;
  }
  return bound_expected_error(deltas, cfg.ranks, cfg.oversampling) / nx;
}

struct RunResult {
  TuckerTensor tucker;
  RunRecord record;
};

inline RunResult run_method(const std::string& method, const Input& x, const TuckerConfig& cfg,
                            bool with_bound = true) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  TuckerTensor t = std::visit([&](const auto& v) { return decompose(method, v, cfg); }, x);
  const auto t1 = clock::now();
  RunRecord r;
  r.method = method;
  r.shape = input_shape(x);
  r.ranks = t.core_shape().dims();
  r.p = t.meta.oversampling;
  r.q = t.meta.power;
  r.seed = cfg.seed;
  r.order = t.meta.order;
  r.seconds = std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9);
  r.rel_error = rel_error_of(x, t);
  if (with_bound) r.bound = relative_bound(method, x, cfg, t.meta.order);
  r.nnz_in = input_nnz(x);
  r.nnz_core = core_nnz(t);
  return {std::move(t), std::move(r)};
}

/// Structural and numerical checks of an archive against its source tensor.
/// Returns the names of the failed checks.
inline std::vector<std::string> verify_archive(const TuckerTensor& t, const Input& x,
                                               std::optional<double> stored_error, std::ostream& log) {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& name, const std::string& detail) {
    log << (ok ? "ok   " : "FAIL ") << name << (detail.empty() ? "" : ": " + detail) << '\n';
    if (!ok) failed.push_back(name);
  };
  try {
    t.validate();
  } catch (const std::exception& e) {
    check(false, "shape", e.what());
    return failed;
  }
  if (!(t.shape() == input_shape(x))) {
    check(false, "shape", "archive " + t.shape().to_string() + " vs input " + input_shape(x).to_string());
    return failed;
  }
  check(true, "shape", t.shape().to_string());

  const double err = rel_error_of(x, t);
  if (stored_error) {
    const double diff = std::abs(err - *stored_error);
    check(diff <= 1e-10, "rel_error", "recomputed " + fmt_double(err) + ", stored " + fmt_double(*stored_error));
  } else {
    check(true, "rel_error", "recomputed " + fmt_double(err));
  }

  const Index d = t.core_shape().order();
  if (t.meta.selections.empty()) {
    for (Index j = 0; j < d; ++j) {
      const double defect = orthonormality_defect(t.factors[static_cast<std::size_t>(j)]);
      check(defect <= 1e-10, "orthonormal factor " + std::to_string(j + 1), "defect " + fmt_double(defect));
    }
    return failed;
  }

  if (static_cast<Index>(t.meta.selections.size()) != d) {
    check(false, "selections", "expected one selection per mode");
    return failed;
  }
  for (Index j = 0; j < d; ++j) {
    const auto& sel = t.meta.selections[static_cast<std::size_t>(j)];
    const Matrix& a = t.factors[static_cast<std::size_t>(j)];
    bool identity = static_cast<Index>(sel.size()) == a.cols();
    for (std::size_t c = 0; identity && c < sel.size(); ++c)
      for (Index k = 0; k < a.cols(); ++k)
        if (a(sel[c], k) != (k == static_cast<Index>(c) ? 1.0 : 0.0)) identity = false;
    check(identity, "identity rows " + std::to_string(j + 1), "");
    const double norm = spectral_norm(a).value;
    const double g = g_factor(a.rows(), a.cols());
    check(norm >= 1.0 - 1e-12 && norm <= g * (1.0 + 1e-12), "factor norm " + std::to_string(j + 1),
          fmt_double(norm) + " in [1, " + fmt_double(g) + "]");
  }

  // Core entries must be the input's entries at the selected coordinates.
  std::vector<Index> src(static_cast<std::size_t>(d));
  auto origin = [&](std::span<const Index> c) {
    for (Index k = 0; k < d; ++k)
      src[static_cast<std::size_t>(k)] = t.meta.selections[static_cast<std::size_t>(k)][static_cast<std::size_t>(c[k])];
    return std::span<const Index>(src);
  };
  auto source_value = [&](std::span<const Index> c) {
    const auto o = origin(c);
    if (const auto* s = std::get_if<SparseTensor>(&x)) return s->at(o);
    return std::get<DenseTensor>(x)(o);
  };
  Index mismatches = 0;
  if (const auto* sc = std::get_if<SparseTensor>(&t.core)) {
    for (Index e = 0; e < sc->nnz(); ++e)
      if (source_value(sc->coords(e)) != sc->value(e)) ++mismatches;
    // Nothing of x inside the selected block may be missing from the core.
    Index inside = 0;
    if (const auto* sx = std::get_if<SparseTensor>(&x)) {
      std::vector<std::vector<char>> picked(static_cast<std::size_t>(d));
      for (Index k = 0; k < d; ++k) {
        picked[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(sx->shape()[k]), 0);
        for (Index i : t.meta.selections[static_cast<std::size_t>(k)]) picked[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = 1;
      }
      for (Index e = 0; e < sx->nnz(); ++e) {
        bool in = true;
        for (Index k = 0; k < d && in; ++k) in = picked[static_cast<std::size_t>(k)][static_cast<std::size_t>(sx->index(e, k))];
        inside += in;
      }
      mismatches += std::abs(inside - sc->nnz());
    }
  } else {
    const auto& dc = std::get<DenseTensor>(t.core);
    for (Index lin = 0; lin < dc.numel(); ++lin) {
      const auto c = unravel(dc.shape(), lin);
      if (source_value(c) != dc[lin]) ++mismatches;
    }
  }
  check(mismatches == 0, "core entries", std::to_string(mismatches) + " mismatches");
  return failed;
}

struct Options {
  std::string input;
  std::string method = "r-sthosvd";
  std::string rank;
  double tolerance = 0.0;
  Index block = 1;
  bool no_trim = false;
  Index oversample = 5;
  Index power = 0;
  std::string order = "auto";
  std::uint64_t seed = 0;
  Index trials = 0;
  std::string out;
  std::string csv;
  std::string archive;
  std::string sizes = "25,50,100";
  std::string tolerances = "1e-3,1e-4,1e-5,1e-6,1e-7";
  std::string methods;
};

inline TuckerConfig make_config(const Options& o, const std::vector<Index>& ranks) {
  TuckerConfig c;
  c.ranks = ranks;
  c.oversampling = o.oversample;
  c.order = parse_order(o.order);
  c.tolerance = o.tolerance;
  c.block = o.block;
  c.trim = !o.no_trim;
  c.seed = o.seed;
  c.power = o.power;
  return c;
}

inline std::vector<std::string> method_list(const std::string& s, const std::vector<std::string>& fallback) {
  if (s.empty()) return fallback;
  auto m = split(s, ',');
  for (const auto& name : m)
    if (std::find(method_names().begin(), method_names().end(), name) == method_names().end())
      throw UsageError("unknown method '" + name + "'");
  return m;
}

inline int cmd_compress(const Options& o, std::ostream& out, std::ostream& log) {
  if (o.input.empty() || o.out.empty()) throw UsageError("compress needs --input and --out");
  method_list(o.method, {});
  const Input x = load_input(o.input);
  std::vector<Index> ranks;
  if (!is_adaptive(o.method)) {
    if (o.rank.empty()) throw UsageError("--rank is required for " + o.method);
    ranks = parse_index_list(o.rank, "rank");
    if (ranks.size() == 1) ranks.assign(static_cast<std::size_t>(input_shape(x).order()), ranks[0]);
  } else if (!(o.tolerance > 0)) {
    throw UsageError("--tolerance is required for " + o.method);
  }
  const TuckerConfig cfg = make_config(o, ranks);
  RunResult r = run_method(o.method, x, cfg);
  save_tucker(r.tucker, o.out, ArchiveExtras{r.record.rel_error, o.input});
  CsvSink sink(o.csv, out);
  sink.write(r.record);
  log << o.method << ": core " << r.tucker.core_shape().to_string() << ", relative error "
      << fmt_double(r.record.rel_error) << ", archive " << o.out << '\n';
  return 0;
}

inline int cmd_verify(const Options& o, std::ostream& log) {
  if (o.archive.empty() || o.input.empty()) throw UsageError("verify needs --archive and --input");
  const TuckerTensor t = load_tucker(o.archive);
  const ArchiveExtras extras = load_archive_extras(o.archive);
  const Input x = load_input(o.input);
  const auto failed = verify_archive(t, x, extras.rel_error, log);
  if (failed.empty()) {
    log << "verify: all checks passed\n";
    return 0;
  }
  log << "verify: " << failed.size() << " check(s) failed:";
  for (const auto& f : failed) log << ' ' << f << ';';
  log << '\n';
  return 1;
}

inline std::vector<Index> uniform_ranks(Index r, Index d) { return std::vector<Index>(static_cast<std::size_t>(d), r); }

inline int cmd_bench_hilbert(const Options& o, std::ostream& out) {
  const Input x = load_input(o.input.empty() ? "hilbert:5,25" : o.input);
  if (!std::holds_alternative<DenseTensor>(x)) throw UsageError("bench-hilbert expects a dense input");
  const Index d = input_shape(x).order();
  const auto sweep = parse_index_list(o.rank.empty() ? "1,2,3,4,5,6,7,8,9,10" : o.rank, "rank");
  const auto methods = method_list(o.methods, {"hosvd", "sthosvd", "r-hosvd", "r-sthosvd"});
  const Index trials = o.trials > 0 ? o.trials : 3;
  CsvSink sink(o.csv, out);
  for (Index r : sweep) {
    for (Index k = 0; k < d; ++k)
      if (r < 1 || r > input_shape(x)[k]) throw UsageError("rank " + std::to_string(r) + " does not fit the tensor");
    for (const auto& m : methods)
      for (Index trial = 0; trial < trials; ++trial) {
        Options ot = o;
        ot.seed = o.seed + static_cast<std::uint64_t>(trial);
        // The bound depends only on (x, r, p); compute it once per rank.
        sink.write(run_method(m, x, make_config(ot, uniform_ranks(r, d)), trial == 0).record);
      }
  }
  return 0;
}

inline int cmd_bench_adaptive(const Options& o, std::ostream& out) {
  const auto sizes = parse_index_list(o.sizes, "sizes");
  const auto tols = parse_double_list(o.tolerances, "tolerances");
  const auto methods = method_list(o.methods, {"adaptive-r-sthosvd"});
  CsvSink sink(o.csv, out);
  for (Index n : sizes) {
    const Input x = gen_hilbert(3, n);
    for (double eps : tols)
      for (const auto& m : methods) {
        if (!is_adaptive(m)) throw UsageError("bench-adaptive runs adaptive methods only");
        Options ot = o;
        ot.tolerance = eps;
        if (o.order == "auto") ot.order = "1,2,3";
        sink.write(run_method(m, x, make_config(ot, {})).record);
      }
  }
  return 0;
}

inline int cmd_bench_sparse(const Options& o, std::ostream& out) {
  const Input x = load_input(o.input.empty() ? "sparse:200,200" : o.input);
  const Index d = input_shape(x).order();
  const auto sweep = parse_index_list(o.rank.empty() ? "10,20,30" : o.rank, "rank");
  const auto methods = method_list(o.methods, {"sthosvd", "r-sthosvd", "sp-sthosvd"});
  const Index trials = o.trials > 0 ? o.trials : 5;
  CsvSink sink(o.csv, out);
  for (Index r : sweep)
    for (const auto& m : methods)
      for (Index trial = 0; trial < trials; ++trial) {
        if (trial > 0 && (m == "hosvd" || m == "sthosvd")) break;
        Options ot = o;
        ot.seed = o.seed + static_cast<std::uint64_t>(trial);
        // Compare at equal core size: SP cores have r + p slices per mode.
        const Index rank = is_sp(m) ? r : r + o.oversample;
        sink.write(run_method(m, x, make_config(ot, uniform_ranks(rank, d)), false).record);
      }
  return 0;
}

/// Full command line; returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Randomized and structure-preserving Tucker decompositions"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--input", o.input, "path.tns | hilbert:d,I | sparse:n,gamma[,seed]");
    c->add_option("--oversample", o.oversample, "oversampling p")->check(CLI::NonNegativeNumber);
    c->add_option("--power", o.power, "subspace iterations q")->check(CLI::NonNegativeNumber);
    c->add_option("--order", o.order, "auto | i1,...,id (1-based)");
    c->add_option("--seed", o.seed, "random seed");
    c->add_option("--block", o.block, "adaptive block size")->check(CLI::PositiveNumber);
    c->add_flag("--no-trim", o.no_trim, "adaptive: keep the full range-finder basis");
    c->add_option("--csv", o.csv, "append CSV rows here instead of stdout");
  };

  auto* compress = app.add_subcommand("compress", "compress one tensor and write an archive");
  add_common(compress);
  compress->add_option("--method", o.method, "decomposition method");
  compress->add_option("--rank", o.rank, "r1,...,rd (or one value for all modes)");
  compress->add_option("--tolerance", o.tolerance, "relative tolerance for adaptive methods");
  compress->add_option("--out", o.out, "archive directory");

  auto* bh = app.add_subcommand("bench-hilbert", "fixed-rank sweep on a Hilbert tensor");
  add_common(bh);
  bh->add_option("--rank", o.rank, "rank sweep r1,r2,... (same rank in every mode)");
  bh->add_option("--method", o.methods, "comma-separated methods");
  bh->add_option("--trials", o.trials, "runs per (method, rank)")->check(CLI::PositiveNumber);

  auto* ba = app.add_subcommand("bench-adaptive", "adaptive ranks on 3-mode Hilbert tensors");
  add_common(ba);
  ba->add_option("--sizes", o.sizes, "mode sizes I");
  ba->add_option("--tolerance", o.tolerances, "tolerance sweep");
  ba->add_option("--method", o.methods, "adaptive methods");

  auto* bs = app.add_subcommand("bench-sparse", "sequential methods on a sparse tensor");
  add_common(bs);
  bs->add_option("--rank", o.rank, "rank sweep r1,r2,...");
  bs->add_option("--method", o.methods, "comma-separated methods");
  bs->add_option("--trials", o.trials, "seeds per (method, rank)")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "check an archive against its source tensor");
  verify->add_option("--archive", o.archive, "archive directory")->required();
  verify->add_option("--input", o.input, "source tensor")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (compress->parsed()) return cmd_compress(o, out, err);
    if (bh->parsed()) return cmd_bench_hilbert(o, out);
    if (ba->parsed()) return cmd_bench_adaptive(o, out);
    if (bs->parsed()) return cmd_bench_sparse(o, out);
    if (verify->parsed()) return cmd_verify(o, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace rtucker::cli
