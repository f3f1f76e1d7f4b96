#include "oracles.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>

using namespace rtucker;

namespace {

DenseTensor one_to_eight() {
  return DenseTensor(Shape{2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
}

double rel_diff(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

double rel_diff(const DenseTensor& a, const DenseTensor& b) {
  return oracle::frob_diff(a, b) / std::max(1e-300, oracle::frob(b));
}

}  // namespace

TEST(Shape, RejectsEmptyAndZeroDims) {
  EXPECT_THROW(Shape(std::vector<Index>{}), std::invalid_argument);
  EXPECT_THROW((Shape{3, 0, 2}), std::invalid_argument);
  EXPECT_THROW((Shape{Index{1} << 40, Index{1} << 40}), std::invalid_argument);
  const Shape s{3, 4, 5};
  EXPECT_EQ(s.numel(), 60);
  EXPECT_EQ(s.left(1), 3);
  EXPECT_EQ(s.right(1), 5);
  EXPECT_EQ(s.complement(2), 12);
  EXPECT_THROW(s.check_mode(3), std::invalid_argument);
  EXPECT_EQ(s.to_string(), "3x4x5");
}

TEST(DenseTensor, FirstModeFastest) {
  const DenseTensor x = one_to_eight();
  EXPECT_EQ(x({1, 0, 0}), 2);
  EXPECT_EQ(x({0, 1, 0}), 3);
  EXPECT_EQ(x({0, 0, 1}), 5);
  EXPECT_THROW(DenseTensor(Shape{2, 2}, {1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(DenseTensor(Shape{1}, {NAN}), std::invalid_argument);
}

TEST(SparseTensor, SortsMergesAndDropsZeros) {
  // (1,0) twice, (0,1) with value cancelling to zero.
  SparseTensor x(Shape{2, 2}, {1, 0, 0, 1, 1, 0, 0, 1}, {2.0, 3.0, 4.0, -3.0});
  ASSERT_EQ(x.nnz(), 1);
  EXPECT_EQ(x.index(0, 0), 1);
  EXPECT_EQ(x.index(0, 1), 0);
  EXPECT_EQ(x.value(0), 6.0);
  const std::array<Index, 2> at{1, 0};
  EXPECT_EQ(x.at(at), 6.0);
  EXPECT_THROW(SparseTensor(Shape{2, 2}, {2, 0}, {1.0}), std::out_of_range);
}

TEST(SparseTensor, LexicographicOrderWithFirstModeMostSignificant) {
  SparseTensor x(Shape{3, 3}, {2, 0, 0, 2, 0, 1, 1, 1}, {1, 2, 3, 4});
  std::vector<std::pair<Index, Index>> got;
  for (Index e = 0; e < x.nnz(); ++e) got.emplace_back(x.index(e, 0), x.index(e, 1));
  EXPECT_EQ(got, (std::vector<std::pair<Index, Index>>{{0, 1}, {0, 2}, {1, 1}, {2, 0}}));
}

TEST(Unfold, MatchesIndexMapExamples) {
  const DenseTensor x = one_to_eight();
  Matrix m1(2, 4), m3(2, 4);
  m1 << 1, 3, 5, 7, 2, 4, 6, 8;
  m3 << 1, 2, 3, 4, 5, 6, 7, 8;
  EXPECT_EQ(unfold(x, 0), m1);
  EXPECT_EQ(unfold(x, 2), m3);
  EXPECT_EQ(unfold(x, 0), oracle::unfold(x, 0));
  EXPECT_EQ(unfold(x, 2), oracle::unfold(x, 2));
  EXPECT_THROW(unfold(x, 3), std::invalid_argument);
  EXPECT_THROW(unfold(x, -1), std::invalid_argument);
}

TEST(Unfold, RandomTensorsAgreeWithOracleAndRoundtrip) {
  std::mt19937_64 rng(11);
  for (const Shape& s : {Shape{3, 4, 5}, Shape{2, 3, 2, 4}, Shape{7}, Shape{1, 5, 1}}) {
    const DenseTensor x = oracle::random_tensor(s, rng);
    for (Index j = 0; j < s.order(); ++j) {
      const Matrix u = unfold(x, j);
      EXPECT_EQ(u, oracle::unfold(x, j));
      EXPECT_EQ(fold(u, j, s), x);
      EXPECT_EQ(unfold(fold(u, j, s), j), u);
      EXPECT_NEAR(u.norm(), frobenius_norm(x), 1e-12 * u.norm());
    }
  }
}

TEST(Fold, ExamplesAndErrors) {
  Matrix m1(2, 4);
  m1 << 1, 3, 5, 7, 2, 4, 6, 8;
  EXPECT_EQ(fold(m1, 0, Shape{2, 2, 2}), one_to_eight());
  Matrix five(1, 1);
  five << 5;
  EXPECT_EQ(fold(five, 0, Shape{1, 1})[0], 5.0);
  EXPECT_THROW(fold(m1, 0, Shape{2, 2, 3}), std::invalid_argument);
}

TEST(ModeProduct, HandExampleAndIdentity) {
  Matrix ones(1, 2);
  ones << 1, 1;
  const DenseTensor y = mode_product(one_to_eight(), ones, 2);
  EXPECT_EQ(y, DenseTensor(Shape{2, 2, 1}, {6, 8, 10, 12}));
  std::mt19937_64 rng(3);
  const DenseTensor x = oracle::random_tensor(Shape{3, 3, 3}, rng);
  for (Index j = 0; j < 3; ++j) EXPECT_EQ(mode_product(x, Matrix::Identity(3, 3), j), x);
  EXPECT_THROW(mode_product(x, Matrix::Identity(2, 2), 0), std::invalid_argument);
}

TEST(ModeProduct, AgreesWithSummationOracle) {
  std::mt19937_64 rng(5);
  const Shape s{4, 3, 5, 2};
  const DenseTensor x = oracle::random_tensor(s, rng);
  for (Index j = 0; j < s.order(); ++j) {
    const Matrix a = oracle::random_matrix(3, s[j], rng);
    EXPECT_LE(rel_diff(mode_product(x, a, j), oracle::mode_product(x, a, j)), 1e-13);
  }
}

TEST(ModeProduct, SparseMatchesDensified) {
  std::mt19937_64 rng(7);
  const SparseTensor x = oracle::random_sparse(Shape{10, 10, 10}, 0.05, rng);
  const DenseTensor xd = x.to_dense();
  for (Index j = 0; j < 3; ++j) {
    const Matrix a = oracle::random_matrix(4, 10, rng);
    EXPECT_LE(rel_diff(mode_product(x, a, j), mode_product(xd, a, j)), 1e-13);
  }
}

TEST(MultiModeProduct, OrderIndependentAndEmpty) {
  std::mt19937_64 rng(9);
  const DenseTensor x = oracle::random_tensor(Shape{4, 5, 6}, rng);
  const std::vector<Matrix> ab{oracle::random_matrix(2, 4, rng), oracle::random_matrix(3, 5, rng)};
  const std::vector<Matrix> ba{ab[1], ab[0]};
  const std::vector<Index> m01{0, 1}, m10{1, 0};
  EXPECT_LE(rel_diff(multi_mode_product(x, ab, m01), multi_mode_product(x, ba, m10)), 1e-12);
  EXPECT_EQ(multi_mode_product(x, std::span<const Matrix>{}, std::span<const Index>{}), x);
  const std::vector<Index> dup{0, 0};
  EXPECT_THROW(multi_mode_product(x, ab, dup), std::invalid_argument);
}

TEST(MultiModeProduct, KroneckerIdentity) {
  std::mt19937_64 rng(13);
  const Shape s{3, 3, 3};
  const DenseTensor x = oracle::random_tensor(s, rng);
  const std::vector<Matrix> a{oracle::random_matrix(2, 3, rng), oracle::random_matrix(3, 3, rng),
                              oracle::random_matrix(4, 3, rng)};
  const std::vector<Index> modes{0, 1, 2};
  const DenseTensor y = multi_mode_product(x, a, modes);
  for (Index j = 0; j < 3; ++j) {
    // A_d kron ... kron A_1 with A_j left out.
    Matrix k = Matrix::Identity(1, 1);
    for (Index m = 2; m >= 0; --m)
      if (m != j) k = oracle::kron(k, a[static_cast<std::size_t>(m)]);
    const Matrix expected = a[static_cast<std::size_t>(j)] * oracle::unfold(x, j) * k.transpose();
    EXPECT_LE(rel_diff(unfold(y, j), expected), 1e-12) << "mode " << j;
  }
}

TEST(Norm, Examples) {
  EXPECT_EQ(frobenius_norm(DenseTensor(Shape{2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(frobenius_norm(one_to_eight()), std::sqrt(204.0));
  EXPECT_DOUBLE_EQ(frobenius_norm(SparseTensor::from_dense(one_to_eight())), std::sqrt(204.0));
}

TEST(Projection, OrthonormalTransposeNeverIncreasesNorm) {
  std::mt19937_64 rng(17);
  const DenseTensor x = oracle::random_tensor(Shape{6, 5, 4}, rng);
  for (Index j = 0; j < 3; ++j) {
    const Matrix q = oracle::random_orthonormal(x.shape()[j], 2, rng);
    EXPECT_LE(frobenius_norm(mode_product(x, q.transpose(), j)), frobenius_norm(x) * (1 + 1e-15));
  }
}

TEST(Projection, TelescopingEqualityAndSumBound) {
  std::mt19937_64 rng(19);
  const Shape s{6, 7, 5};
  for (int trial = 0; trial < 10; ++trial) {
    const DenseTensor x = oracle::random_tensor(s, rng);
    std::vector<Matrix> proj;
    for (Index j = 0; j < 3; ++j) {
      const Matrix q = oracle::random_orthonormal(s[j], 2 + j, rng);
      proj.push_back(q * q.transpose());
    }
    DenseTensor full = x;
    for (Index j = 0; j < 3; ++j) full = mode_product(full, proj[static_cast<std::size_t>(j)], j);
    const double lhs = std::pow(oracle::frob_diff(x, full), 2);

    double telescoped = 0.0, separate = 0.0;
    DenseTensor prefix = x;
    for (Index j = 0; j < 3; ++j) {
      const Matrix comp = Matrix::Identity(s[j], s[j]) - proj[static_cast<std::size_t>(j)];
      telescoped += std::pow(frobenius_norm(mode_product(prefix, comp, j)), 2);
      separate += std::pow(frobenius_norm(mode_product(x, comp, j)), 2);
      prefix = mode_product(prefix, proj[static_cast<std::size_t>(j)], j);
    }
    EXPECT_NEAR(lhs, telescoped, 1e-10 * lhs);
    EXPECT_LE(lhs, separate * (1 + 1e-12));
  }
}

TEST(SparseDense, AllOperationsAgree) {
  std::mt19937_64 rng(23);
  const SparseTensor x = oracle::random_sparse(Shape{8, 6, 7}, 0.2, rng);
  const DenseTensor xd = x.to_dense();
  EXPECT_EQ(SparseTensor::from_dense(xd), x);
  EXPECT_NEAR(frobenius_norm(x), frobenius_norm(xd), 1e-12 * frobenius_norm(xd));
  for (Index j = 0; j < 3; ++j) {
    EXPECT_EQ(Matrix(unfold(x, j)), unfold(xd, j));
    const std::vector<Index> keep{3, 0, 5};
    EXPECT_EQ(select_mode(x, j, keep).to_dense(), select_mode(xd, j, keep));
  }
  const std::vector<Matrix> f{oracle::random_matrix(3, 8, rng), oracle::random_matrix(2, 6, rng),
                              oracle::random_matrix(4, 7, rng)};
  const std::vector<Index> modes{2, 0, 1};
  const std::vector<Matrix> fo{f[2], f[0], f[1]};
  EXPECT_LE(rel_diff(multi_mode_product(x, fo, modes), multi_mode_product(xd, fo, modes)), 1e-12);
}

TEST(SelectMode, KeepsSlicesInGivenOrder) {
  const DenseTensor x = one_to_eight();
  const std::vector<Index> keep{1};
  EXPECT_EQ(select_mode(x, 0, keep), DenseTensor(Shape{1, 2, 2}, {2, 4, 6, 8}));
  const std::vector<Index> swap{1, 0};
  EXPECT_EQ(select_mode(x, 2, swap), DenseTensor(Shape{2, 2, 2}, {5, 6, 7, 8, 1, 2, 3, 4}));
  const std::vector<Index> bad{2};
  EXPECT_THROW(select_mode(x, 0, bad), std::invalid_argument);
}

TEST(Reconstruct, IdentityFactorsAndSingleEntry) {
  std::mt19937_64 rng(29);
  const DenseTensor x = oracle::random_tensor(Shape{3, 4, 2}, rng);
  TuckerTensor t{x, {Matrix::Identity(3, 3), Matrix::Identity(4, 4), Matrix::Identity(2, 2)}, {}};
  EXPECT_EQ(reconstruct(t), x);

  TuckerTensor one{DenseTensor(Shape{1, 1, 1}, {2.0}),
                   {Matrix::Identity(3, 1), Matrix::Identity(4, 1), Matrix::Identity(2, 1)}, {}};
  const DenseTensor r = reconstruct(one);
  EXPECT_EQ(r({0, 0, 0}), 2.0);
  EXPECT_EQ(frobenius_norm(r), 2.0);

  TuckerTensor bad{x, {Matrix::Identity(3, 3), Matrix::Identity(3, 3), Matrix::Identity(2, 2)}, {}};
  EXPECT_THROW(reconstruct(bad), std::invalid_argument);
}

TEST(RelativeError, SuperdiagonalHosvd) {
  const DenseTensor x = oracle::superdiagonal({3, 2, 1});
  TuckerConfig cfg;
  cfg.ranks = {2, 2, 2};
  const TuckerTensor t = hosvd(x, cfg);
  EXPECT_NEAR(relative_error(x, t), 1.0 / std::sqrt(14.0), 1e-12);
  EXPECT_NEAR(oracle::relative_error(x, t), 1.0 / std::sqrt(14.0), 1e-12);
  EXPECT_NEAR(relative_error_orthonormal(frobenius_norm(x), core_norm(t)), 1.0 / std::sqrt(14.0), 1e-10);
}

TEST(RelativeError, PathsAgreeAndZeroNormRejected) {
  std::mt19937_64 rng(31);
  const DenseTensor x = oracle::random_tensor(Shape{6, 5, 7}, rng);
  TuckerConfig cfg;
  cfg.ranks = {3, 2, 4};
  const TuckerTensor t = sthosvd(x, cfg);
  const double streamed = relative_error(x, t);
  EXPECT_NEAR(streamed, oracle::relative_error(x, t), 1e-12);
  EXPECT_NEAR(streamed, relative_error_orthonormal(frobenius_norm(x), core_norm(t)), 1e-10);

  const SparseTensor xs = SparseTensor::from_dense(x);
  EXPECT_NEAR(relative_error(xs, t), streamed, 1e-12);
  EXPECT_NEAR(relative_error(xs, t, /*cap=*/0), streamed, 1e-8);

  TuckerTensor exact{x, {Matrix::Identity(6, 6), Matrix::Identity(5, 5), Matrix::Identity(7, 7)}, {}};
  EXPECT_LE(relative_error(x, exact), 1e-12);
  EXPECT_THROW(relative_error(DenseTensor(Shape{6, 5, 7}), t), std::invalid_argument);
}
