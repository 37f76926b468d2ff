#pragma once

// The matrix-free operators behind the experiments: a 1D periodic
// parameter-to-observable smoother standing in for the PDE sensitivity, the
// Gauss-Newton data-misfit Hessian built from it, an elliptic prior
// covariance, the prior-preconditioned misfit, and the inexact Gauss-Newton
// MAP solver.
//
// The smoothing length h controls how far a local parameter perturbation
// reaches the observations; it plays the role of the domain thickness in
// aspect-ratio studies. Small h means local sensitivities and HODLR-friendly
// off-diagonal blocks.

#include <memory>
#include <vector>

#include "hodlr/common.hpp"
#include "hodlr/linear_operator.hpp"
#include "hodlr/rng.hpp"

namespace hodlr {

// Iterated diffusive smoother S = (I - (h^2/m) Lap)^{-m} on an N-point
// periodic grid over [0, W), second-order centered differences, m = 8
// passes. Each pass is a cyclic tridiagonal sweep (Thomas plus a rank-one
// corner correction), so an apply costs O(N) per column.
//
// The iteration matters: a single elliptic solve is the inverse of a
// tridiagonal matrix, which is semiseparable -- every off-diagonal block
// has rank <= 4 regardless of h, so the smoothing length would not control
// off-diagonal rank at all. Composing m passes gives a Matern-like kernel
// whose off-diagonal numerical rank grows with h, which is the locality
// behavior the smoothing length is supposed to model.
inline constexpr int kSmootherPasses = 8;

class PeriodicSmoother {
 public:
  PeriodicSmoother(index_t n, double width, double smoothing_length,
                   int passes = kSmootherPasses);

  index_t size() const { return n_; }
  double width() const { return width_; }
  double smoothing_length() const { return h_; }
  int passes() const { return passes_; }

  void solve_in_place(Vector& x) const;  // applies all m passes
  DenseMatrix apply(const DenseMatrix& x, Exec exec = Exec::Parallel) const;

 private:
  index_t n_;
  double width_, h_;
  int passes_;
  double diag_, off_;          // per-pass cyclic tridiagonal coefficients
  std::vector<double> sweep_;  // precomputed Thomas denominators
  Vector corner_q_;            // Sherman-Morrison correction column
  double corner_denom_ = 0.0;
};

// Uniformly spaced observation indices, strictly increasing for n_obs <= n.
std::vector<index_t> observation_indices(index_t n, index_t n_obs);

// H = S^T B^T Gamma_noise^{-1} B S, symmetric PSD with rank exactly n_obs.
// Each apply column costs two smoother applies (2m tridiagonal sweeps),
// O(N) per column.
class ToyMisfitHessian final : public LinearOperator {
 public:
  ToyMisfitHessian(index_t n, double width, double smoothing_length, index_t n_obs,
                   Vector noise_std);

  const PeriodicSmoother& smoother() const { return smoother_; }
  const std::vector<index_t>& observations() const { return obs_; }
  const Vector& noise_std() const { return noise_std_; }

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override;

  PeriodicSmoother smoother_;
  std::vector<index_t> obs_;
  Vector noise_std_;
};

// Gamma_prior = M^{-1} with M the periodic discretization of
// (delta I - gamma Lap); gamma = 6e2 and delta = 2.4e-3 by default. The
// symmetric square root comes from a dense eigendecomposition of M, which
// limits this operator to desk scale (the small-matrix cap).
class PriorOperator {
 public:
  PriorOperator(index_t n, double width, double gamma = 600.0, double delta = 2.4e-3);

  index_t size() const { return n_; }
  double gamma() const { return gamma_; }
  double delta() const { return delta_; }

  // Gamma_prior^{1/2} X (symmetric factor).
  DenseMatrix sqrt_apply(const DenseMatrix& x) const;
  Vector sqrt_apply(const Vector& x) const;

  // Gamma_prior^{-1} x = M x via the stencil (exact, O(N)).
  Vector precision_apply(const Vector& x) const;

  DenseMatrix covariance() const;       // dense Gamma_prior (oracle use)
  DenseMatrix sqrt_dense() const;       // dense Gamma_prior^{1/2}

 private:
  index_t n_;
  double width_, gamma_, delta_;
  double diag_, off_;  // M stencil
  DenseMatrix eigvecs_;
  Vector eigvals_;  // of M, ascending
};

// H' = Gamma_prior^{1/2} H_misfit Gamma_prior^{1/2} (the prior square root
// is symmetric). Each apply column triggers exactly one misfit apply, so
// this operator's counter equals the misfit-apply count, the unit that
// dominates cost.
class PreconditionedMisfit final : public LinearOperator {
 public:
  PreconditionedMisfit(const PriorOperator& prior, const LinearOperator& misfit);

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override;
  const PriorOperator& prior_;
  const LinearOperator& misfit_;
};

// Parameter-to-observable model exposing value, Jacobian-vector and
// transposed-Jacobian-vector products.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual index_t param_dim() const = 0;
  virtual index_t data_dim() const = 0;
  virtual Vector value(const Vector& beta) const = 0;
  virtual Vector jac_apply(const Vector& beta, const Vector& v) const = 0;
  virtual Vector jac_transpose_apply(const Vector& beta, const Vector& w) const = 0;
};

// F(beta) = B S beta: the linear toy forward map.
class LinearSmootherForward final : public ForwardModel {
 public:
  LinearSmootherForward(index_t n, double width, double smoothing_length, index_t n_obs);

  index_t param_dim() const override { return smoother_.size(); }
  index_t data_dim() const override { return index_t(obs_.size()); }
  Vector value(const Vector& beta) const override;
  Vector jac_apply(const Vector& beta, const Vector& v) const override;
  Vector jac_transpose_apply(const Vector& beta, const Vector& w) const override;

  const std::vector<index_t>& observations() const { return obs_; }
  const PeriodicSmoother& smoother() const { return smoother_; }

 private:
  PeriodicSmoother smoother_;
  std::vector<index_t> obs_;
};

struct MapOptions {
  double grad_tol = 1e-8;        // relative gradient reduction
  int max_iters = 100;
  double armijo_c = 1e-4;
  double min_step = 1e-12;
  double cg_tol_floor = 1e-12;   // lower bound for the inner relative residual
  int cg_max_iters = 0;          // 0: 10 * N
};

struct MapResult {
  Vector beta;
  int iterations = 0;
  double initial_grad_norm = 0.0;
  double grad_norm = 0.0;
  std::vector<double> objective_history;
};

// Inexact Gauss-Newton with Armijo backtracking; inner systems solved by
// conjugate gradients at the Eisenstat-Walker style relative residual
// min(0.5, sqrt(||g||/||g0||)). The objective decreases across accepted
// steps; line-search failure and the iteration cap are errors.
MapResult map_estimate(const ForwardModel& forward, const PriorOperator& prior,
                       const Vector& data, const Vector& noise_std, const Vector& prior_mean,
                       const Vector& init, const MapOptions& opts = {});

// The synthetic 1D inverse problem: truth field
// beta_true(x) = log(1200 + 1100 sin(2 pi x / W)) on [0, W), uniformly
// spaced observations of B S beta_true with relative Gaussian noise, and
// the constant prior mean 6.73315.
struct ToyProblemConfig {
  index_t n = 512;
  double width = 1e4;
  double smoothing_length = 100.0;  // = width / 100
  index_t n_obs = 100;
  double noise_rel = 0.01;
  std::uint64_t seed = 0;
};

struct ToyProblem {
  ToyProblemConfig config;
  Vector grid;       // x_i = i W / N
  Vector beta_true;
  double prior_mean_value = 6.73315;
  Vector data;       // noisy observations
  Vector noise_std;  // absolute per-observation sigma
  std::shared_ptr<PriorOperator> prior;
  std::shared_ptr<LinearSmootherForward> forward;
  std::shared_ptr<ToyMisfitHessian> misfit;

  Vector prior_mean() const {
    return Vector::Constant(config.n, prior_mean_value);
  }
};

ToyProblem make_toy_problem(const ToyProblemConfig& config);

// Misfit Hessian with a constant absolute noise level (operator studies
// that do not need the synthetic data pipeline).
std::shared_ptr<ToyMisfitHessian> toy_misfit_hessian(index_t n, double width,
                                                     double smoothing_length, index_t n_obs,
                                                     double noise_std_abs);

}  // namespace hodlr
