#include "ssda/rng.hpp"
#include "ssda/scm.hpp"
#include "ssda/subspace.hpp"

#include <gtest/gtest.h>

using namespace ssda;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix span_of(std::initializer_list<int> axes, int d) {
  Matrix m = Matrix::Zero(d, static_cast<Index>(axes.size()));
  int k = 0;
  for (int a : axes) m(a, k++) = 1.0;
  return m;
}

void expect_orthonormal(const Matrix& u) {
  EXPECT_LT((u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff(), 1e-10);
}

}  // namespace

TEST(TopAbsEigvecs, DiagonalPicksLargestMagnitude) {
  Matrix a = Vector{{5.0, -3.0, 1.0}}.asDiagonal();
  const auto b = top_abs_eigvecs(a, 2);
  EXPECT_LT(subspace_distance(b.cols, span_of({0, 1}, 3)), 1e-12);
  EXPECT_NEAR(b.values(0), 5.0, 1e-12);
  EXPECT_NEAR(b.values(1), 3.0, 1e-12);
  EXPECT_NEAR(b.gap, 2.0, 1e-12);
  EXPECT_EQ(b.origin, OrthoBasis::Origin::EigTopAbs);
}

TEST(TopAbsEigvecs, SignConventionFirstNonzeroPositive) {
  Matrix a = Matrix::Zero(3, 3);
  a(1, 1) = -4.0;
  a(2, 2) = 1.0;
  const auto b = top_abs_eigvecs(a, 2);
  for (Index j = 0; j < 2; ++j) {
    Index i = 0;
    while (std::abs(b.cols(i, j)) <= 1e-12) ++i;
    EXPECT_GT(b.cols(i, j), 0.0);
  }
}

TEST(TopAbsEigvecs, CaShiftSpansPerturbation) {
  const auto env = make_ca_environments(8, 3, 1, 5);
  const Matrix diff = population_moments(env.target).sigma_x - population_moments(env.sources[0]).sigma_x;
  const auto b = top_abs_eigvecs(diff, 3);
  const auto& c = *env.target.confounder;
  const Matrix direct = mixing_matrix(env.target) * (env.target.weights * c.w_y.transpose() + c.w);
  const Matrix q = direct.householderQr().householderQ() * Matrix::Identity(8, 3);
  EXPECT_LT(subspace_distance(b.cols, q), 1e-8);
  const Matrix resid = direct - b.cols * (b.cols.transpose() * direct);
  EXPECT_LT(resid.norm(), 1e-8 * direct.norm());
}

TEST(TopAbsEigvecs, ZeroMatrixReportsZeroGap) {
  const auto b = top_abs_eigvecs(Matrix::Zero(4, 4), 1);
  EXPECT_NEAR(b.cols.col(0).norm(), 1.0, 1e-12);
  EXPECT_EQ(b.gap, 0.0);
}

TEST(TopAbsEigvecs, RejectsRankAboveDim) { EXPECT_THROW(top_abs_eigvecs(Matrix::Identity(3, 3), 4), Error); }

TEST(TopAbsEigvecs, SymmetrizesInput) {
  Matrix a(2, 2);
  a << 2.0, 1.0, -1.0, 1.0;  // symmetric part diag(2, 1)
  const auto b = top_abs_eigvecs(a, 1);
  EXPECT_LT(subspace_distance(b.cols, span_of({0}, 2)), 1e-12);
}

TEST(Complement, OfFirstAxis) {
  OrthoBasis v;
  v.cols = span_of({0}, 3);
  const auto q = orthonormal_complement(v);
  EXPECT_EQ(q.rank(), 2);
  EXPECT_LT(subspace_distance(q.cols, span_of({1, 2}, 3)), 1e-12);
}

TEST(Complement, OfFullSpaceIsEmpty) {
  OrthoBasis v;
  v.cols = Matrix::Identity(4, 4);
  EXPECT_EQ(orthonormal_complement(v).rank(), 0);
}

TEST(Complement, RandomBasisIdentities) {
  OrthoBasis v;
  v.cols = random_matrix(5, 2, 3).householderQr().householderQ() * Matrix::Identity(5, 2);
  const auto q = orthonormal_complement(v);
  ASSERT_EQ(q.rank(), 3);
  EXPECT_LT((q.cols.transpose() * v.cols).cwiseAbs().maxCoeff(), 1e-12);
  expect_orthonormal(q.cols);
  EXPECT_LT((v.projector() + q.projector() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TopLeftSingvecs, PicksDominantDirection) {
  Matrix p(3, 2);
  p << 2, 0, 0, 1, 0, 0;
  const auto b = top_left_singvecs(p, 1);
  EXPECT_LT(subspace_distance(b.cols, span_of({0}, 3)), 1e-12);
  EXPECT_NEAR(b.gap, 1.0, 1e-12);
}

TEST(TopLeftSingvecs, AwDifferencesSpan) {
  const auto env = make_aw_environments(10, 2, 4, 8);
  Matrix p(10, 3);
  for (int m = 1; m < 4; ++m)
    p.col(m - 1) = mixing_matrix(env.sources[m]) * (env.sources[m].weights - env.sources[m - 1].weights);
  const auto b = top_left_singvecs(p, 2);
  const auto direct = orthonormalize(p.leftCols(2));
  EXPECT_LT(subspace_distance(b.cols, direct.cols), 1e-8);
}

TEST(TopLeftSingvecs, RankBeyondDataGivesZeroGap) {
  Matrix p = Matrix::Zero(4, 3);
  p.col(0) = Vector::Ones(4);
  p.col(1) = 2.0 * Vector::Ones(4);
  const auto b = top_left_singvecs(p, 2);
  EXPECT_EQ(b.rank(), 2);
  EXPECT_LT(std::abs(b.gap), 1e-12);
  EXPECT_THROW(top_left_singvecs(p, 4), Error);
}

TEST(Projectors, IdempotentForEveryOrigin) {
  const Matrix a = random_matrix(6, 6, 1);
  const Matrix sym = a + a.transpose();
  for (const auto& u : {top_abs_eigvecs(sym, 3), top_left_singvecs(a, 2), orthonormal_complement(top_abs_eigvecs(sym, 2))}) {
    const Matrix p = u.projector();
    EXPECT_LT((p * p - p).cwiseAbs().maxCoeff(), 1e-9);
    expect_orthonormal(u.cols);
  }
}

TEST(Projectors, EigenAndSvdAgreeOnPsd) {
  const Matrix a = random_matrix(6, 4, 2);
  const Matrix psd = a * a.transpose();
  EXPECT_LT(subspace_distance(top_abs_eigvecs(psd, 3).cols, top_left_singvecs(psd, 3).cols), 1e-9);
}
