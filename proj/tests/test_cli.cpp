#include "cli.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace rtucker;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rtucker");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(cli::split(line, ','));
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() / ("rtucker_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const std::vector<std::string> kHeader = cli::split(cli::kCsvHeader, ',');

}  // namespace

TEST_F(CliTest, CompressThenVerifyDense) {
  const Result c = run({"compress", "--input", "hilbert:3,12", "--method", "r-sthosvd", "--rank", "4,4,4",
                        "--oversample", "5", "--seed", "42", "--order", "auto", "--out", path("run1")});
  ASSERT_EQ(c.code, 0) << c.err;
  const auto rows = csv_rows(c.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], kHeader);
  const auto& r = rows[1];
  ASSERT_EQ(r.size(), kHeader.size());
  EXPECT_EQ(r[0], "r-sthosvd");
  EXPECT_EQ(r[1], "3");
  EXPECT_EQ(r[3], "4x4x4");
  EXPECT_EQ(r[4], "5");
  EXPECT_EQ(r[6], "42");
  EXPECT_EQ(r[7], "1-2-3");
  EXPECT_EQ(r[11], "1728");
  EXPECT_EQ(r[12], "64");
  EXPECT_GT(std::stod(r[10]), 0.0);

  // The row reproduces offline: error from a fresh run, bound from delta_tail.
  const DenseTensor x = gen_hilbert(3, 12);
  TuckerConfig cfg;
  cfg.ranks = {4, 4, 4};
  cfg.seed = 42;
  EXPECT_EQ(std::stod(r[8]), relative_error(x, r_sthosvd(x, cfg)));
  const std::vector<Index> ranks{4, 4, 4};
  const double bound = bound_expected_error(delta_tails(x, std::span<const Index>(ranks)), ranks, 5) / frobenius_norm(x);
  EXPECT_NEAR(std::stod(r[9]), bound, 1e-12 * bound);

  const Result v = run({"verify", "--archive", path("run1"), "--input", "hilbert:3,12"});
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.err.find("all checks passed"), std::string::npos);
}

TEST_F(CliTest, SparseStructurePreservingArchive) {
  std::mt19937_64 rng(1);
  const SparseTensor x = oracle::random_sparse(Shape{14, 12, 13}, 0.15, rng);
  write_tns(x, path("x.tns"));
  const Result c = run({"compress", "--input", path("x.tns"), "--method", "sp-sthosvd", "--rank", "3",
                        "--oversample", "2", "--out", path("sp"), "--csv", path("runs.csv")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_TRUE(c.out.empty());
  EXPECT_TRUE(fs::exists(path("sp/core.tns")));
  const TuckerTensor t = load_tucker(path("sp"));
  EXPECT_LE(std::get<SparseTensor>(t.core).nnz(), 5 * 5 * 5);
  EXPECT_EQ(run({"verify", "--archive", path("sp"), "--input", path("x.tns")}).code, 0);

  // A second run appends a row without repeating the header.
  ASSERT_EQ(run({"compress", "--input", path("x.tns"), "--method", "sp-hosvd", "--rank", "3", "--oversample",
                 "2", "--out", path("sph"), "--csv", path("runs.csv")})
                .code,
            0);
  std::ifstream in(path("runs.csv"));
  std::stringstream buf;
  buf << in.rdbuf();
  const auto rows = csv_rows(buf.str());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], kHeader);
  EXPECT_EQ(rows[1][0], "sp-sthosvd");
  EXPECT_EQ(rows[2][0], "sp-hosvd");
  EXPECT_EQ(rows[1][11], std::to_string(x.nnz()));
}

TEST_F(CliTest, TamperedCoreFailsVerify) {
  std::mt19937_64 rng(2);
  const SparseTensor x = oracle::random_sparse(Shape{12, 12, 12}, 0.2, rng);
  write_tns(x, path("x.tns"));
  ASSERT_EQ(run({"compress", "--input", path("x.tns"), "--method", "sp-sthosvd", "--rank", "3,3,3",
                 "--oversample", "2", "--out", path("sp")})
                .code,
            0);
  TuckerTensor t = load_tucker(path("sp"));
  auto& core = std::get<SparseTensor>(t.core);
  ASSERT_GT(core.nnz(), 0);
  std::vector<Index> idx(core.raw_indices().begin(), core.raw_indices().end());
  std::vector<double> vals(core.raw_values().begin(), core.raw_values().end());
  vals[0] *= 1.0 + 1e-6;
  core = SparseTensor(core.shape(), idx, vals);
  const ArchiveExtras ex = load_archive_extras(path("sp"));
  save_tucker(t, path("sp"), ex);
  const Result v = run({"verify", "--archive", path("sp"), "--input", path("x.tns")});
  EXPECT_EQ(v.code, 1);
  EXPECT_NE(v.err.find("FAIL core entries"), std::string::npos) << v.err;

  // Dense archive with a rotated factor fails the orthonormality check.
  ASSERT_EQ(run({"compress", "--input", "hilbert:3,8", "--method", "hosvd", "--rank", "3", "--out", path("h")}).code, 0);
  TuckerTensor h = load_tucker(path("h"));
  h.factors[1] *= 1.01;
  save_tucker(h, path("h"), load_archive_extras(path("h")));
  const Result vh = run({"verify", "--archive", path("h"), "--input", "hilbert:3,8"});
  EXPECT_EQ(vh.code, 1);
  EXPECT_NE(vh.err.find("FAIL orthonormal factor 2"), std::string::npos) << vh.err;
  EXPECT_NE(vh.err.find("FAIL rel_error"), std::string::npos) << vh.err;

  const Result wrong = run({"verify", "--archive", path("h"), "--input", "hilbert:3,9"});
  EXPECT_EQ(wrong.code, 1);
  EXPECT_NE(wrong.err.find("FAIL shape"), std::string::npos);
}

TEST_F(CliTest, AdaptiveMeetsTolerance) {
  const Result c = run({"compress", "--input", "hilbert:3,20", "--method", "adaptive-r-sthosvd", "--tolerance",
                        "1e-3", "--out", path("ad")});
  ASSERT_EQ(c.code, 0) << c.err;
  const auto rows = csv_rows(c.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LE(std::stod(rows[1][8]), 1e-3);
  EXPECT_EQ(rows[1][9], "0.001");
  EXPECT_EQ(run({"verify", "--archive", path("ad"), "--input", "hilbert:3,20"}).code, 0);
  const TuckerTensor t = load_tucker(path("ad"));
  EXPECT_EQ(t.meta.tolerance, 1e-3);
  EXPECT_TRUE(t.meta.trim);
  const Result raw = run({"compress", "--input", "hilbert:3,20", "--method", "adaptive-r-hosvd", "--tolerance",
                          "1e-3", "--block", "4", "--no-trim", "--out", path("raw")});
  ASSERT_EQ(raw.code, 0) << raw.err;
  const TuckerTensor u = load_tucker(path("raw"));
  EXPECT_FALSE(u.meta.trim);
  EXPECT_LE(std::stod(csv_rows(raw.out)[1][8]), 1e-3);
  const Result tr = run({"compress", "--input", "hilbert:3,20", "--method", "adaptive-r-hosvd", "--tolerance",
                         "1e-3", "--block", "4", "--out", path("tr")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  const TuckerTensor v = load_tucker(path("tr"));
  for (Index j = 0; j < 3; ++j) EXPECT_GE(u.core_shape()[j], v.core_shape()[j]);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"compress", "--bogus"}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--out", path("o")}).code, 2);  // no rank
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--rank", "2", "--method", "tucker-als", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--rank", "9", "--method", "hosvd", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--rank", "2,x,2", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3", "--rank", "2", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--rank", "2", "--order", "1,1,2", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--method", "adaptive-r-hosvd", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--rank", "2", "--oversample", "-1", "--out", path("o")}).code, 2);
  EXPECT_EQ(run({"compress", "--input", "hilbert:3,6", "--rank", "4", "--oversample", "2", "--method", "sp-sthosvd",
                 "--out", path("o")})
                .code,
            2);
  EXPECT_EQ(run({"bench-hilbert", "--input", "hilbert:3,4", "--rank", "5"}).code, 2);
  EXPECT_EQ(run({"verify", "--archive", path("nothing")}).code, 2);
  const Result help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("compress"), std::string::npos);
}

TEST_F(CliTest, RuntimeFailuresExitOne) {
  EXPECT_EQ(run({"compress", "--input", path("missing.tns"), "--rank", "2", "--out", path("o")}).code, 1);
  std::ofstream(path("bad.tns")) << "1 1 1 1.0\n1 2 oops\n";
  const Result bad = run({"compress", "--input", path("bad.tns"), "--rank", "1", "--out", path("o")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos);
  const Result missing = run({"verify", "--archive", path("nothing"), "--input", "hilbert:3,4"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("manifest.json"), std::string::npos);
}

TEST_F(CliTest, BenchHilbertRows) {
  const Result b = run({"bench-hilbert", "--input", "hilbert:4,8", "--rank", "2,3", "--trials", "2", "--oversample", "3"});
  ASSERT_EQ(b.code, 0) << b.err;
  const auto rows = csv_rows(b.out);
  ASSERT_EQ(rows.size(), 1u + 2 * 4 * 2);
  const DenseTensor x = gen_hilbert(4, 8);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    EXPECT_EQ(r.size(), kHeader.size());
    const bool first_trial = (i - 1) % 2 == 0;
    EXPECT_EQ(r[9].empty(), !first_trial) << i;
    if (!first_trial) continue;
    const Index rank = std::stol(cli::split(r[3], 'x')[0]);
    const std::vector<Index> ranks(4, rank);
    const auto dl = delta_tails(x, std::span<const Index>(ranks));
    double expected = 0.0;
    if (r[0] == "hosvd" || r[0] == "sthosvd") {
      for (double v : dl) expected += v * v;
      expected = std::sqrt(expected);
    } else {
      expected = bound_expected_error(dl, ranks, 3);
    }
    expected /= frobenius_norm(x);
    EXPECT_NEAR(std::stod(r[9]), expected, 1e-12 * expected) << r[0];
    EXPECT_LE(std::stod(r[8]), (r[0] == "hosvd" || r[0] == "sthosvd" ? 1.0 : 1.5) * expected + 1e-15) << r[0];
  }
}

TEST_F(CliTest, BenchAdaptiveAndSparseRows) {
  const Result a = run({"bench-adaptive", "--sizes", "12,16", "--tolerance", "1e-2,1e-4"});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto ar = csv_rows(a.out);
  ASSERT_EQ(ar.size(), 5u);
  for (std::size_t i = 1; i < ar.size(); ++i) {
    EXPECT_EQ(ar[i][0], "adaptive-r-sthosvd");
    EXPECT_EQ(ar[i][7], "1-2-3");
    EXPECT_LE(std::stod(ar[i][8]), std::stod(ar[i][9]));
  }
  EXPECT_EQ(run({"bench-adaptive", "--sizes", "8", "--method", "hosvd"}).code, 2);

  const Result s = run({"bench-sparse", "--input", "sparse:40,10,3", "--rank", "3,5", "--oversample", "2", "--trials", "2"});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto sr = csv_rows(s.out);
  // sthosvd runs once per rank; the randomized methods once per trial.
  ASSERT_EQ(sr.size(), 1u + 2 * (1 + 2 + 2));
  for (std::size_t i = 1; i < sr.size(); ++i) {
    // Every method reports the matched output rank r + p.
    const Index ell = std::stol(cli::split(sr[i][3], 'x')[0]);
    EXPECT_TRUE(ell == 5 || ell == 7) << sr[i][0];
    EXPECT_EQ(sr[i][11], sr[1][11]);
  }
}
