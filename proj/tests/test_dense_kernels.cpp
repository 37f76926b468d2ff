#include <gtest/gtest.h>

#include "hodlr/dense_kernels.hpp"
#include "support.hpp"

using namespace hodlr;

TEST(Orthog, AlreadyOrthonormalBlockIsUnchanged) {
  DenseMatrix m = DenseMatrix::Zero(4, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  const OrthogResult res = orthog(m);
  EXPECT_EQ(res.effective_rank, 2);
  EXPECT_LE((res.q.cwiseAbs() - m.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((res.q.transpose() * res.q - DenseMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Orthog, NormalizesSingleColumn) {
  DenseMatrix m(2, 1);
  m << 3.0, 4.0;
  const OrthogResult res = orthog(m);
  EXPECT_NEAR(std::fabs(res.q(0, 0)), 0.6, 1e-15);
  EXPECT_NEAR(std::fabs(res.q(1, 0)), 0.8, 1e-15);
  EXPECT_EQ(res.effective_rank, 1);
}

TEST(Orthog, RandomTallMatrixSpansItsRange) {
  RngStream rng(11);
  const DenseMatrix m = rng.randn(50, 10);
  const OrthogResult res = orthog(m);
  EXPECT_LE((res.q.transpose() * res.q - DenseMatrix::Identity(10, 10)).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_LE((res.q * (res.q.transpose() * m) - m).norm(), 1e-10 * m.norm());
  EXPECT_EQ(res.effective_rank, 10);
}

TEST(Orthog, FlagsRankDeficiency) {
  RngStream rng(12);
  DenseMatrix m = rng.randn(20, 5);
  m.col(4) = m.col(0) + m.col(1);
  const OrthogResult res = orthog(m);
  EXPECT_EQ(res.effective_rank, 4);
  // Completion is still orthonormal and still reproduces the input.
  EXPECT_LE((res.q.transpose() * res.q - DenseMatrix::Identity(5, 5)).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_LE((res.q * (res.q.transpose() * m) - m).norm(), 1e-10 * m.norm());
}

TEST(Orthog, RejectsWideAndNonFiniteInput) {
  RngStream rng(13);
  EXPECT_THROW(orthog(rng.randn(3, 5)), InvalidInput);
  DenseMatrix bad = rng.randn(4, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(orthog(bad), InvalidInput);
}

TEST(SmallSvd, DiagonalMatrixSortsSigma) {
  DenseMatrix m = DenseMatrix::Zero(3, 3);
  m.diagonal() << 3.0, 1.0, 2.0;
  const SvdResult svd = small_svd(m);
  EXPECT_NEAR(svd.sigma(0), 3.0, 1e-14);
  EXPECT_NEAR(svd.sigma(1), 2.0, 1e-14);
  EXPECT_NEAR(svd.sigma(2), 1.0, 1e-14);
}

TEST(SmallSvd, RankOneOuterProduct) {
  DenseMatrix m(2, 2);
  m << 1.0, 2.0, 2.0, 4.0;
  const SvdResult svd = small_svd(m);
  EXPECT_NEAR(svd.sigma(0), 5.0, 1e-14);
  EXPECT_NEAR(svd.sigma(1), 0.0, 1e-14);
}

TEST(SmallSvd, MatchesIndependentOracleOnRandomInput) {
  RngStream rng(14);
  const DenseMatrix m = rng.randn(20, 20);
  const SvdResult svd = small_svd(m);
  const Vector oracle = hodlr::testing::oracle_singular_values(m);
  for (index_t i = 0; i < 20; ++i)
    EXPECT_NEAR(svd.sigma(i), oracle(i), 1e-10 * oracle(0)) << "index " << i;
  const DenseMatrix recon = svd.u * svd.sigma.asDiagonal() * svd.v.transpose();
  EXPECT_LE(hodlr::testing::oracle_spectral_norm(recon - m),
            1e-12 * hodlr::testing::oracle_spectral_norm(m));
}

TEST(SmallSvd, RejectsOversizedInput) {
  EXPECT_THROW(small_svd(DenseMatrix::Zero(kSmallMatrixCap + 1, 2)), InvalidInput);
}

TEST(SymEig, DiagonalCase) {
  DenseMatrix m = DenseMatrix::Zero(2, 2);
  m.diagonal() << -1.0, 2.0;
  const SymEigResult eig = sym_eig(m);
  EXPECT_NEAR(eig.lambda(0), -1.0, 1e-14);
  EXPECT_NEAR(eig.lambda(1), 2.0, 1e-14);
}

TEST(SymEig, OffDiagonalPair) {
  DenseMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  const SymEigResult eig = sym_eig(m);
  EXPECT_NEAR(eig.lambda(0), -1.0, 1e-14);
  EXPECT_NEAR(eig.lambda(1), 1.0, 1e-14);
}

TEST(SymEig, ReconstructsRandomSymmetric) {
  const DenseMatrix m = hodlr::testing::random_symmetric(30, RngStream(15));
  const SymEigResult eig = sym_eig(m);
  const DenseMatrix recon = eig.v * eig.lambda.asDiagonal() * eig.v.transpose();
  EXPECT_LE((recon - m).norm(), 1e-11 * m.norm());
  for (index_t i = 1; i < 30; ++i) EXPECT_LE(eig.lambda(i - 1), eig.lambda(i));
}

TEST(SymEig, RejectsAsymmetricInput) {
  RngStream rng(16);
  const DenseMatrix m = rng.randn(5, 5);
  EXPECT_THROW(sym_eig(m), InvalidInput);
}

TEST(SpectralNorm, IdentityIsOne) {
  const DenseOperator op(DenseMatrix::Identity(8, 8));
  EXPECT_NEAR(spectral_norm_estimate(op, 5, RngStream(1)), 1.0, 1e-12);
}

TEST(SpectralNorm, DominantDiagonalEntry) {
  DenseMatrix m = DenseMatrix::Identity(16, 16);
  m(0, 0) = 5.0;
  const DenseOperator op(m);
  EXPECT_NEAR(spectral_norm_estimate(op, kSpectralNormDefaultIters, RngStream(2)), 5.0, 1e-6);
}

TEST(SpectralNorm, MatchesDenseEigOnRandomSpd) {
  // Random SPD with a well-separated top eigenvalue (geometric spectrum).
  RngStream rng(17);
  const DenseMatrix q = orthog(rng.randn(64, 64)).q;
  Vector lambda(64);
  for (index_t i = 0; i < 64; ++i) lambda(i) = 3.0 * std::pow(0.9, double(i));
  const DenseMatrix spd = q * lambda.asDiagonal() * q.transpose();
  const DenseOperator op(DenseMatrix(0.5 * (spd + spd.transpose())));
  const double truth = sym_eig(op.matrix()).lambda.cwiseAbs().maxCoeff();
  const double est = spectral_norm_estimate(op, kSpectralNormDefaultIters, RngStream(3));
  EXPECT_NEAR(est, truth, 1e-3 * truth);
}

TEST(SpectralNorm, ZeroOperatorGivesZero) {
  const DenseOperator op(DenseMatrix::Zero(6, 6));
  EXPECT_EQ(spectral_norm_estimate(op, 10, RngStream(4)), 0.0);
}

TEST(SpectralNorm, NeverOverestimatesAndIsMonotone) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const index_t n = 16 + index_t(seed) * 30;  // up to 226
    const DenseMatrix m = hodlr::testing::random_symmetric(n, RngStream(100 + seed));
    const DenseOperator op(m);
    const double truth = sym_eig(m).lambda.cwiseAbs().maxCoeff();
    double prev = 0.0;
    for (int iters : {1, 5, 20, 50}) {
      const double est = spectral_norm_estimate(op, iters, RngStream(seed));
      EXPECT_LE(est, truth * (1.0 + 1e-3));
      EXPECT_GE(est, prev);
      prev = est;
    }
  }
}
