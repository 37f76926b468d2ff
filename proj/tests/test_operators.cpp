#include <gtest/gtest.h>

#include "hodlr/dense_kernels.hpp"
#include "hodlr/toy_problem.hpp"
#include "support.hpp"

using namespace hodlr;
using hodlr::testing::oracle_singular_values;
using hodlr::testing::oracle_spectral_norm;

namespace {

// Dense oracles built from first principles with Eigen direct solves: the
// stencil matrix is assembled explicitly and inverted with a dense LU, a
// route fully independent of the cyclic Thomas solver in the library.
DenseMatrix dense_stencil(index_t n, double diag, double off) {
  DenseMatrix m = DenseMatrix::Zero(n, n);
  for (index_t i = 0; i < n; ++i) {
    m(i, i) = diag;
    m(i, (i + 1) % n) += off;
    m((i + 1) % n, i) += off;
  }
  return m;
}

DenseMatrix dense_smoother(index_t n, double width, double h) {
  const double dx = width / double(n);
  const double a = h * h / double(kSmootherPasses) / (dx * dx);
  const DenseMatrix one_pass = dense_stencil(n, 1.0 + 2.0 * a, -a).partialPivLu().solve(
      DenseMatrix::Identity(n, n));
  DenseMatrix s = one_pass;
  for (int p = 1; p < kSmootherPasses; ++p) s = one_pass * s;
  return s;
}

DenseMatrix dense_misfit(index_t n, double width, double h, index_t n_obs,
                         const Vector& noise_std) {
  const DenseMatrix s = dense_smoother(n, width, h);
  const auto obs = observation_indices(n, n_obs);
  DenseMatrix bs(n_obs, n);
  for (std::size_t k = 0; k < obs.size(); ++k) bs.row(index_t(k)) = s.row(obs[k]);
  const DenseMatrix weighted =
      noise_std.array().square().inverse().matrix().asDiagonal() * bs;
  return bs.transpose() * weighted;
}

DenseMatrix dense_prior_covariance(index_t n, double width, double gamma, double delta) {
  const double dx = width / double(n);
  const double a = gamma / (dx * dx);
  return dense_stencil(n, delta + 2.0 * a, -a).partialPivLu().solve(
      DenseMatrix::Identity(n, n));
}

}  // namespace

TEST(DenseOperatorWrap, IdentityAndCounter) {
  const DenseOperator op(DenseMatrix::Identity(8, 8));
  Vector e3 = Vector::Zero(8);
  e3(3) = 1.0;
  EXPECT_EQ((op.apply(e3) - e3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(op.apply_count(), 1u);
}

TEST(DenseOperatorWrap, BatchedApplyCountsColumns) {
  const DenseOperator op(DenseMatrix::Identity(8, 8));
  RngStream rng(1);
  op.apply(rng.randn(8, 5));
  EXPECT_EQ(op.apply_count(), 5u);
}

TEST(DenseOperatorWrap, MatchesDenseMultiply) {
  const DenseMatrix a = hodlr::testing::random_symmetric(32, RngStream(2));
  const DenseOperator op(a);
  RngStream rng(3);
  const DenseMatrix x = rng.randn(32, 4);
  EXPECT_LE((op.apply(x) - a * x).cwiseAbs().maxCoeff(), 1e-14 * a.cwiseAbs().maxCoeff());
}

TEST(DenseOperatorWrap, RejectsAsymmetricInput) {
  RngStream rng(4);
  EXPECT_THROW(DenseOperator(rng.randn(6, 6)), InvalidInput);
}

TEST(ToyMisfit, MatchesDenseOracle) {
  const index_t n = 128, n_obs = 32;
  const Vector noise = Vector::Constant(n_obs, 0.5);
  const ToyMisfitHessian op(n, 1e4, 150.0, n_obs, noise);
  const DenseMatrix oracle = dense_misfit(n, 1e4, 150.0, n_obs, noise);
  RngStream rng(5);
  const DenseMatrix x = rng.randn(n, 4);
  const double scale = oracle_spectral_norm(oracle) * x.norm();
  EXPECT_LE((op.apply(x) - oracle * x).cwiseAbs().maxCoeff(), 1e-11 * scale);
}

TEST(ToyMisfit, SmootherLimitIsNoiseWeightedIdentity) {
  // n_obs = N, h -> 0, unit noise: S -> I so the operator approaches the
  // identity and off-diagonal entries vanish.
  const index_t n = 64;
  const ToyMisfitHessian op(n, 1e4, 1e-6, n, Vector::Ones(n));
  const DenseMatrix dense = op.apply(DenseMatrix(DenseMatrix::Identity(n, n)));
  for (index_t i = 0; i < n; ++i) {
    EXPECT_NEAR(dense(i, i), 1.0, 1e-8);
    for (index_t j = 0; j < n; ++j)
      if (i != j) EXPECT_LE(std::fabs(dense(i, j)), 1e-8);
  }
}

TEST(ToyMisfit, RankIsExactlyObservationCount) {
  const index_t n = 256, n_obs = 100;
  const Vector noise = Vector::Constant(n_obs, 1.0);
  const ToyMisfitHessian op(n, 1e4, 100.0, n_obs, noise);
  const DenseMatrix dense = op.apply(DenseMatrix(DenseMatrix::Identity(n, n)));
  const SymEigResult eig = sym_eig(DenseMatrix(0.5 * (dense + dense.transpose())));
  const double lambda_max = eig.lambda.cwiseAbs().maxCoeff();
  Vector sorted = eig.lambda.cwiseAbs();
  std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<double>());
  for (index_t i = n_obs; i < n; ++i) EXPECT_LE(sorted(i), 1e-12 * lambda_max);
}

TEST(ToyMisfit, SmallSmoothingLengthShrinksOffDiagonalRank) {
  // Level-1 off-diagonal rank at absolute tolerance 1e-8*|H| is strictly
  // smaller for h = W/200 than for h = W/25.
  const index_t n = 256, n_obs = 128;
  auto block_rank = [&](double h) {
    const Vector noise = Vector::Constant(n_obs, 1.0);
    const DenseMatrix dense = dense_misfit(n, 1e4, h, n_obs, noise);
    const Vector sigma = oracle_singular_values(dense.topRightCorner(n / 2, n / 2));
    const double tol = 1e-8 * oracle_spectral_norm(dense);
    index_t r = 0;
    while (r < sigma.size() && sigma(r) > tol) ++r;
    return r;
  };
  EXPECT_LT(block_rank(1e4 / 200.0), block_rank(1e4 / 25.0));
}

TEST(ToyMisfit, PsdOnDeskScaleSweep) {
  for (index_t n : {64, 128, 512}) {
    const index_t n_obs = n / 4;
    const ToyMisfitHessian op(n, 1e4, 80.0, n_obs, Vector::Constant(n_obs, 0.3));
    const DenseMatrix dense = op.apply(DenseMatrix(DenseMatrix::Identity(n, n)));
    const SymEigResult eig = sym_eig(DenseMatrix(0.5 * (dense + dense.transpose())));
    EXPECT_GE(eig.lambda(0), -1e-12 * eig.lambda.cwiseAbs().maxCoeff()) << "n=" << n;
  }
}

TEST(ToyMisfit, SymmetryProbes) {
  const index_t n = 200, n_obs = 50;
  const ToyMisfitHessian op(n, 1e4, 120.0, n_obs, Vector::Constant(n_obs, 0.7));
  RngStream rng(6);
  const double norm = spectral_norm_estimate(op, 30, rng.substream(9));
  for (int t = 0; t < 20; ++t) {
    const Vector x = rng.randn(n, 1).col(0);
    const Vector y = rng.randn(n, 1).col(0);
    EXPECT_LE(std::fabs(x.dot(op.apply(y)) - y.dot(op.apply(x))),
              1e-10 * norm * x.norm() * y.norm());
  }
}

TEST(ToyMisfit, GlobalRankNondecreasingInObservations) {
  const index_t n = 256;
  index_t prev_rank = 0;
  for (index_t n_obs : {50, 100, 150, 200}) {
    const Vector noise = Vector::Constant(n_obs, 1.0);
    const DenseMatrix dense = dense_misfit(n, 1e4, 100.0, n_obs, noise);
    const Vector sigma = oracle_singular_values(dense);
    const double tol = 1e-6 * sigma(0);
    index_t rank = 0;
    while (rank < sigma.size() && sigma(rank) > tol) ++rank;
    EXPECT_GE(rank, prev_rank) << "n_obs=" << n_obs;
    prev_rank = rank;
  }
}

TEST(Prior, SqrtSquaredTimesPrecisionIsIdentity) {
  const index_t n = 128;
  const PriorOperator prior(n, 1e4);
  RngStream rng(7);
  const Vector x = rng.randn(n, 1).col(0);
  const Vector y = prior.precision_apply(prior.sqrt_apply(prior.sqrt_apply(x)));
  EXPECT_LE((y - x).norm(), 1e-9 * x.norm());
}

TEST(Prior, SqrtFactorReproducesCovariance) {
  const index_t n = 96;
  const PriorOperator prior(n, 1e4);
  const DenseMatrix sqrt = prior.sqrt_dense();
  const DenseMatrix oracle = dense_prior_covariance(n, 1e4, 600.0, 2.4e-3);
  EXPECT_LE(oracle_spectral_norm(sqrt * sqrt.transpose() - oracle),
            1e-10 * oracle_spectral_norm(oracle));
}

TEST(Prior, SampleCovarianceMatchesDenseOracle) {
  const index_t n = 24;
  const PriorOperator prior(n, 1e4);
  const DenseMatrix cov = prior.covariance();
  RngStream rng(8);
  const index_t samples = 100000;
  const DenseMatrix z = rng.randn(n, samples);
  const DenseMatrix draws = prior.sqrt_apply(z);
  const DenseMatrix emp = draws * draws.transpose() / double(samples);
  // Entrywise within 3 Monte-Carlo standard errors.
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = 0; j < n; ++j) {
      const double se =
          std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / double(samples));
      EXPECT_LE(std::fabs(emp(i, j) - cov(i, j)), 3.0 * se) << i << "," << j;
    }
  }
}

TEST(Prior, LargeDeltaLimitScalesConstantVector) {
  // gamma ~ 0 makes M ~ delta I, so Gamma^{1/2} ~ delta^{-1/2} I.
  const index_t n = 32;
  const PriorOperator prior(n, 1e4, 1e-12, 4.0);
  const Vector ones = Vector::Ones(n);
  const Vector out = prior.sqrt_apply(ones);
  for (index_t i = 0; i < n; ++i) EXPECT_NEAR(out(i), 0.5, 1e-6);
}

TEST(PreconditionedMisfitOp, ZeroMisfitGivesZero) {
  const index_t n = 64;
  const PriorOperator prior(n, 1e4);
  const ZeroOperator zero(n);
  const PreconditionedMisfit op(prior, zero);
  RngStream rng(9);
  EXPECT_EQ(op.apply(rng.randn(n, 2)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PreconditionedMisfitOp, IdentityMisfitGivesPriorCovariance) {
  const index_t n = 64;
  const PriorOperator prior(n, 1e4);
  const DenseOperator identity(DenseMatrix::Identity(n, n));
  const PreconditionedMisfit op(prior, identity);
  const DenseMatrix dense = op.apply(DenseMatrix(DenseMatrix::Identity(n, n)));
  EXPECT_LE(oracle_spectral_norm(dense - prior.covariance()),
            1e-10 * oracle_spectral_norm(prior.covariance()));
}

TEST(PreconditionedMisfitOp, MatchesTripleProductOracle) {
  const index_t n = 64;
  const PriorOperator prior(n, 1e4);
  RngStream rng(10);
  const DenseMatrix g = rng.randn(n, n);
  const DenseMatrix spd = g * g.transpose() / double(n);
  const DenseOperator hm(spd);
  const PreconditionedMisfit op(prior, hm);
  const DenseMatrix sqrt = prior.sqrt_dense();
  const DenseMatrix oracle = sqrt * spd * sqrt;
  const DenseMatrix dense = op.apply(DenseMatrix(DenseMatrix::Identity(n, n)));
  EXPECT_LE(oracle_spectral_norm(dense - oracle), 1e-10 * oracle_spectral_norm(oracle));
}

TEST(PreconditionedMisfitOp, CounterTracksMisfitAppliesOnly) {
  const index_t n = 32;
  const PriorOperator prior(n, 1e4);
  const DenseOperator hm(DenseMatrix::Identity(n, n));
  const PreconditionedMisfit op(prior, hm);
  RngStream rng(11);
  op.apply(rng.randn(n, 7));
  EXPECT_EQ(op.apply_count(), 7u);
  EXPECT_EQ(hm.apply_count(), 7u);
}

namespace {

// Dense normal-equations MAP oracle: beta = prior_mean + (J^T W J + M)^{-1}
// J^T W (d - J * prior_mean), all assembled densely.
Vector dense_map_oracle(const ToyProblem& tp) {
  const index_t n = tp.config.n;
  const DenseMatrix s = dense_smoother(n, tp.config.width, tp.config.smoothing_length);
  const auto obs = observation_indices(n, tp.config.n_obs);
  DenseMatrix jac(index_t(obs.size()), n);
  for (std::size_t k = 0; k < obs.size(); ++k) jac.row(index_t(k)) = s.row(obs[k]);
  const DenseMatrix w = tp.noise_std.array().square().inverse().matrix().asDiagonal();
  const double dx = tp.config.width / double(n);
  const DenseMatrix m = dense_stencil(n, 2.4e-3 + 2.0 * 600.0 / (dx * dx), -600.0 / (dx * dx));
  const DenseMatrix normal = jac.transpose() * w * jac + m;
  const Vector rhs = jac.transpose() * (w * (tp.data - jac * tp.prior_mean()));
  return tp.prior_mean() + normal.llt().solve(rhs);
}

}  // namespace

TEST(MapEstimate, LinearRecoveryMatchesDenseNormalEquations) {
  ToyProblemConfig cfg;
  cfg.n = 128;
  cfg.n_obs = 40;
  cfg.seed = 99;
  ToyProblem tp = make_toy_problem(cfg);
  tp.data = tp.forward->value(tp.beta_true);  // zero noise draw

  MapOptions opts;
  opts.grad_tol = 1e-12;
  const MapResult res = map_estimate(*tp.forward, *tp.prior, tp.data, tp.noise_std,
                                     tp.prior_mean(), tp.prior_mean(), opts);
  const Vector oracle = dense_map_oracle(tp);
  EXPECT_LE((res.beta - oracle).norm(), 1e-8 * oracle.norm());
}

TEST(MapEstimate, DataAtPriorMeanConvergesInZeroIterations) {
  ToyProblemConfig cfg;
  cfg.n = 64;
  cfg.n_obs = 16;
  ToyProblem tp = make_toy_problem(cfg);
  tp.data = tp.forward->value(tp.prior_mean());
  const MapResult res = map_estimate(*tp.forward, *tp.prior, tp.data, tp.noise_std,
                                     tp.prior_mean(), tp.prior_mean());
  EXPECT_EQ(res.iterations, 0);
  EXPECT_EQ(res.grad_norm, 0.0);
}

TEST(MapEstimate, ToyReconstructionErrorBelowTenPercent) {
  ToyProblemConfig cfg;  // N=512, 100 observations, 1% relative noise
  cfg.seed = 7;
  const ToyProblem tp = make_toy_problem(cfg);
  MapOptions opts;
  opts.grad_tol = 1e-10;
  const MapResult res = map_estimate(*tp.forward, *tp.prior, tp.data, tp.noise_std,
                                     tp.prior_mean(), tp.prior_mean(), opts);
  const double rel_error = (res.beta - tp.beta_true).norm() / tp.beta_true.norm();
  EXPECT_LE(rel_error, 0.10);
  for (std::size_t i = 1; i < res.objective_history.size(); ++i)
    EXPECT_LE(res.objective_history[i], res.objective_history[i - 1]);
}
