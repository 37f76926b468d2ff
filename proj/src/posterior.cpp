#include "hodlr/posterior.hpp"

#include <cmath>

#include "hodlr/dense_kernels.hpp"

namespace hodlr {

PosteriorModel build_posterior(std::shared_ptr<const PriorOperator> prior,
                               const LinearOperator& misfit, const HierPartition& partition,
                               double eps_rel, index_t d, Vector mean, RngStream rng) {
  require(prior != nullptr, "build_posterior: prior must not be null");
  require(prior->size() == misfit.size() && partition.size() == misfit.size(),
          "build_posterior: inconsistent sizes");
  require(mean.size() == misfit.size(), "build_posterior: mean size mismatch");
  require(eps_rel > 0.0 && eps_rel < 1.0, "build_posterior: need 0 < eps_rel < 1");

  const PreconditionedMisfit preconditioned(*prior, misfit);
  auto [compressed, report] = hodlr_compress_adaptive(preconditioned, partition, eps_rel, d, rng);

  PosteriorModel model{std::move(prior), std::move(compressed), nullptr, std::move(mean), 0.0,
                       std::move(report)};
  const HodlrMatrix shifted = model.misfit_compressed.add_scaled_identity(1.0);
  model.shifted_factor =
      std::make_shared<const HodlrFactorization>(HodlrFactorization::factorize_spd(shifted));
  return model;
}

DenseMatrix sample(const PosteriorModel& model, index_t count, RngStream rng) {
  require(count >= 1, "sample: count must be >= 1");
  const index_t n = model.mean.size();
  DenseMatrix z(n, count);
  for (index_t c = 0; c < count; ++c) {
    RngStream col_rng = rng.substream(std::uint64_t(c));
    z.col(c) = col_rng.randn(n, 1).col(0);
  }
  const DenseMatrix w = model.shifted_factor->inv_sqrt_transpose_apply(z);
  DenseMatrix s = model.prior->sqrt_apply(w);
  s.colwise() += model.mean;
  return s;
}

Vector pointwise_std(const PosteriorModel& model, int probes, RngStream rng) {
  const index_t n = model.mean.size();
  if (probes <= 0) {
    // Exact sweep: column norms of W^{-1} Gamma_prior^{1/2}.
    const DenseMatrix t = model.shifted_factor->inv_sqrt_apply(model.prior->sqrt_dense());
    return t.colwise().norm().transpose();
  }
  DenseMatrix z(n, probes);
  for (index_t c = 0; c < probes; ++c) {
    RngStream col_rng = rng.substream(std::uint64_t(c));
    z.col(c) = col_rng.randn(n, 1).col(0);
  }
  const DenseMatrix s = model.prior->sqrt_apply(model.shifted_factor->inv_sqrt_transpose_apply(z));
  const Vector mean_sq = s.array().square().rowwise().mean();
  return mean_sq.array().sqrt();
}

BoundReport covariance_bound_check(const DenseMatrix& a, const DenseMatrix& a_tilde) {
  require(a.rows() == a.cols() && a_tilde.rows() == a_tilde.cols() && a.rows() == a_tilde.rows(),
          "covariance_bound_check: need two symmetric matrices of equal size");

  BoundReport rep;
  const SymEigResult eig_a = sym_eig(a);
  rep.lambda_min = eig_a.lambda(0);
  rep.eps = dense_sym_spectral_norm(a - a_tilde);
  rep.lambda_min_ok = rep.lambda_min > -1.0;
  if (rep.lambda_min_ok) {
    rep.eps_star = rep.eps / (1.0 + rep.lambda_min);
    rep.eps_star_ok = rep.eps_star < 1.0;
    rep.bound = rep.eps_star / (1.0 + rep.eps_star);
  } else {
    rep.eps_star_ok = false;
  }

  // (I + A)^{-1} through the eigendecompositions; exact dense quantities.
  auto shifted_inverse = [](const SymEigResult& eig) {
    DenseMatrix t = eig.v;
    t.array().rowwise() *= (eig.lambda.array() + 1.0).inverse().transpose();
    return DenseMatrix(t * eig.v.transpose());
  };
  const SymEigResult eig_at = sym_eig(a_tilde);
  require_numeric((eig_a.lambda.array() > -1.0).all() && (eig_at.lambda.array() > -1.0).all(),
                  "covariance_bound_check: I + A must be invertible for both inputs");
  const DenseMatrix inv_a = shifted_inverse(eig_a);
  const DenseMatrix inv_at = shifted_inverse(eig_at);
  rep.lhs = dense_sym_spectral_norm(inv_a - inv_at) / dense_sym_spectral_norm(inv_a);
  rep.holds = rep.lambda_min_ok && rep.eps_star_ok && rep.lhs <= rep.bound;
  return rep;
}

}  // namespace hodlr
