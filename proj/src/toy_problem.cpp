#include "hodlr/toy_problem.hpp"

#include <cmath>

#include "hodlr/dense_kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hodlr {

PeriodicSmoother::PeriodicSmoother(index_t n, double width, double smoothing_length, int passes)
    : n_(n), width_(width), h_(smoothing_length), passes_(passes) {
  require(n >= 4, "PeriodicSmoother: need N >= 4");
  require(width > 0.0 && smoothing_length > 0.0, "PeriodicSmoother: W and h must be positive");
  require(passes >= 1, "PeriodicSmoother: need at least one pass");

  const double dx = width_ / double(n_);
  const double a = (h_ * h_ / double(passes_)) / (dx * dx);
  diag_ = 1.0 + 2.0 * a;
  off_ = -a;

  // Sherman-Morrison corner split: A = A' + u v^T with gamma = -diag,
  // u = (gamma, 0, .., 0, off), v = (1, 0, .., 0, off/gamma). A' is plain
  // tridiagonal and strictly diagonally dominant, so Thomas is stable.
  const double gamma = -diag_;
  sweep_.assign(std::size_t(n_), 0.0);
  auto mod_diag = [&](index_t i) {
    if (i == 0) return diag_ - gamma;
    if (i == n_ - 1) return diag_ - off_ * off_ / gamma;
    return diag_;
  };
  sweep_[0] = mod_diag(0);
  for (index_t i = 1; i < n_; ++i) sweep_[std::size_t(i)] = mod_diag(i) - off_ * off_ / sweep_[std::size_t(i) - 1];

  Vector u = Vector::Zero(n_);
  u(0) = gamma;
  u(n_ - 1) = off_;
  // corner_q_ = A'^{-1} u via the same sweep
  corner_q_ = u;
  for (index_t i = 1; i < n_; ++i)
    corner_q_(i) -= off_ / sweep_[std::size_t(i) - 1] * corner_q_(i - 1);
  corner_q_(n_ - 1) /= sweep_[std::size_t(n_) - 1];
  for (index_t i = n_ - 2; i >= 0; --i)
    corner_q_(i) = (corner_q_(i) - off_ * corner_q_(i + 1)) / sweep_[std::size_t(i)];
  corner_denom_ = 1.0 + (corner_q_(0) + off_ / gamma * corner_q_(n_ - 1));
}

void PeriodicSmoother::solve_in_place(Vector& x) const {
  require(x.size() == n_, "PeriodicSmoother::solve_in_place: size mismatch");
  for (int pass = 0; pass < passes_; ++pass) {
    for (index_t i = 1; i < n_; ++i) x(i) -= off_ / sweep_[std::size_t(i) - 1] * x(i - 1);
    x(n_ - 1) /= sweep_[std::size_t(n_) - 1];
    for (index_t i = n_ - 2; i >= 0; --i)
      x(i) = (x(i) - off_ * x(i + 1)) / sweep_[std::size_t(i)];
    const double vy = x(0) + off_ / (-diag_) * x(n_ - 1);
    x -= corner_q_ * (vy / corner_denom_);
  }
}

DenseMatrix PeriodicSmoother::apply(const DenseMatrix& x, Exec exec) const {
  require(x.rows() == n_, "PeriodicSmoother::apply: row count mismatch");
  DenseMatrix y = x;
  const index_t cols = x.cols();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && cols > 1)
#endif
  for (index_t c = 0; c < cols; ++c) {
    Vector col = y.col(c);
    solve_in_place(col);
    y.col(c) = col;
  }
  return y;
}

std::vector<index_t> observation_indices(index_t n, index_t n_obs) {
  require(n_obs >= 1 && n_obs <= n, "observation_indices: need 1 <= n_obs <= N");
  std::vector<index_t> obs(static_cast<std::size_t>(n_obs));
  for (index_t k = 0; k < n_obs; ++k) obs[std::size_t(k)] = (k * n) / n_obs;
  return obs;
}

ToyMisfitHessian::ToyMisfitHessian(index_t n, double width, double smoothing_length,
                                   index_t n_obs, Vector noise_std)
    : LinearOperator(n),
      smoother_(n, width, smoothing_length),
      obs_(observation_indices(n, n_obs)),
      noise_std_(std::move(noise_std)) {
  require(noise_std_.size() == n_obs, "ToyMisfitHessian: one noise sigma per observation");
  require((noise_std_.array() > 0.0).all(), "ToyMisfitHessian: noise sigmas must be positive");
}

DenseMatrix ToyMisfitHessian::apply_impl(const DenseMatrix& x) const {
  DenseMatrix y(x.rows(), x.cols());
  const index_t cols = x.cols();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (cols > 1)
#endif
  for (index_t c = 0; c < cols; ++c) {
    Vector v = x.col(c);
    smoother_.solve_in_place(v);
    Vector w = Vector::Zero(x.rows());
    for (std::size_t k = 0; k < obs_.size(); ++k) {
      const double s = noise_std_(index_t(k));
      w(obs_[k]) = v(obs_[k]) / (s * s);
    }
    smoother_.solve_in_place(w);
    y.col(c) = w;
  }
  return y;
}

PriorOperator::PriorOperator(index_t n, double width, double gamma, double delta)
    : n_(n), width_(width), gamma_(gamma), delta_(delta) {
  require(n >= 4 && n <= kSmallMatrixCap,
          "PriorOperator: size must be in [4, small-matrix cap]");
  require(width > 0.0 && gamma > 0.0 && delta > 0.0,
          "PriorOperator: W, gamma, delta must be positive");

  const double dx = width_ / double(n_);
  const double a = gamma_ / (dx * dx);
  diag_ = delta_ + 2.0 * a;
  off_ = -a;

  DenseMatrix m = DenseMatrix::Zero(n_, n_);
  for (index_t i = 0; i < n_; ++i) {
    m(i, i) = diag_;
    m(i, (i + 1) % n_) = off_;
    m((i + 1) % n_, i) = off_;
  }
  const SymEigResult eig = sym_eig(m);
  require_numeric(eig.lambda(0) > 0.0, "PriorOperator: precision operator not positive definite");
  eigvecs_ = eig.v;
  eigvals_ = eig.lambda;
}

DenseMatrix PriorOperator::sqrt_apply(const DenseMatrix& x) const {
  require(x.rows() == n_, "PriorOperator::sqrt_apply: row count mismatch");
  DenseMatrix t = eigvecs_.transpose() * x;
  t.array().colwise() *= eigvals_.array().rsqrt();
  return eigvecs_ * t;
}

Vector PriorOperator::sqrt_apply(const Vector& x) const {
  return Vector(sqrt_apply(DenseMatrix(x)).col(0));
}

Vector PriorOperator::precision_apply(const Vector& x) const {
  require(x.size() == n_, "PriorOperator::precision_apply: size mismatch");
  Vector y(n_);
  for (index_t i = 0; i < n_; ++i) {
    const index_t prev = i == 0 ? n_ - 1 : i - 1;
    const index_t next = i == n_ - 1 ? 0 : i + 1;
    y(i) = diag_ * x(i) + off_ * (x(prev) + x(next));
  }
  return y;
}

DenseMatrix PriorOperator::covariance() const {
  DenseMatrix t = eigvecs_;
  t.array().rowwise() *= eigvals_.array().inverse().transpose();
  return t * eigvecs_.transpose();
}

DenseMatrix PriorOperator::sqrt_dense() const {
  DenseMatrix t = eigvecs_;
  t.array().rowwise() *= eigvals_.array().rsqrt().transpose();
  return t * eigvecs_.transpose();
}

PreconditionedMisfit::PreconditionedMisfit(const PriorOperator& prior,
                                           const LinearOperator& misfit)
    : LinearOperator(misfit.size()), prior_(prior), misfit_(misfit) {
  require(prior.size() == misfit.size(), "PreconditionedMisfit: size mismatch");
}

DenseMatrix PreconditionedMisfit::apply_impl(const DenseMatrix& x) const {
  return prior_.sqrt_apply(misfit_.apply(prior_.sqrt_apply(x)));
}

LinearSmootherForward::LinearSmootherForward(index_t n, double width, double smoothing_length,
                                             index_t n_obs)
    : smoother_(n, width, smoothing_length), obs_(observation_indices(n, n_obs)) {}

Vector LinearSmootherForward::value(const Vector& beta) const { return jac_apply(beta, beta); }

Vector LinearSmootherForward::jac_apply(const Vector&, const Vector& v) const {
  Vector s = v;
  smoother_.solve_in_place(s);
  Vector y(index_t(obs_.size()));
  for (std::size_t k = 0; k < obs_.size(); ++k) y(index_t(k)) = s(obs_[k]);
  return y;
}

Vector LinearSmootherForward::jac_transpose_apply(const Vector&, const Vector& w) const {
  require(w.size() == index_t(obs_.size()), "jac_transpose_apply: data size mismatch");
  Vector s = Vector::Zero(smoother_.size());
  for (std::size_t k = 0; k < obs_.size(); ++k) s(obs_[k]) = w(index_t(k));
  smoother_.solve_in_place(s);
  return s;
}

namespace {

// CG on the Gauss-Newton system; returns the step for rhs = -g.
Vector gauss_newton_cg(const ForwardModel& forward, const PriorOperator& prior,
                       const Vector& beta, const Vector& inv_var, const Vector& g,
                       double rel_tol, int max_iters) {
  auto apply_h = [&](const Vector& v) {
    Vector jv = forward.jac_apply(beta, v);
    jv.array() *= inv_var.array();
    return Vector(forward.jac_transpose_apply(beta, jv) + prior.precision_apply(v));
  };
  Vector p = Vector::Zero(g.size());
  Vector r = -g;
  const double b_norm = r.norm();
  if (b_norm == 0.0) return p;
  Vector d = r;
  double rs = r.squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    const Vector q = apply_h(d);
    const double dq = d.dot(q);
    if (dq <= 0.0) break;  // should not happen for an SPD system
    const double alpha = rs / dq;
    p += alpha * d;
    r -= alpha * q;
    const double rs_new = r.squaredNorm();
    if (std::sqrt(rs_new) <= rel_tol * b_norm) break;
    d = r + (rs_new / rs) * d;
    rs = rs_new;
  }
  return p;
}

}  // namespace

MapResult map_estimate(const ForwardModel& forward, const PriorOperator& prior,
                       const Vector& data, const Vector& noise_std, const Vector& prior_mean,
                       const Vector& init, const MapOptions& opts) {
  const index_t n = forward.param_dim();
  require(prior.size() == n, "map_estimate: prior size mismatch");
  require(data.size() == forward.data_dim(), "map_estimate: data size mismatch");
  require(noise_std.size() == data.size(), "map_estimate: noise size mismatch");
  require(prior_mean.size() == n && init.size() == n, "map_estimate: parameter size mismatch");
  require((noise_std.array() > 0.0).all(), "map_estimate: noise sigmas must be positive");

  const Vector inv_var = noise_std.array().square().inverse();

  auto objective = [&](const Vector& beta) {
    const Vector misfit = forward.value(beta) - data;
    const Vector db = beta - prior_mean;
    return 0.5 * (misfit.array().square() * inv_var.array()).sum() +
           0.5 * db.dot(prior.precision_apply(db));
  };
  auto gradient = [&](const Vector& beta) {
    Vector misfit = forward.value(beta) - data;
    misfit.array() *= inv_var.array();
    return Vector(forward.jac_transpose_apply(beta, misfit) +
                  prior.precision_apply(beta - prior_mean));
  };

  MapResult res;
  res.beta = init;
  res.objective_history.push_back(objective(res.beta));

  Vector g = gradient(res.beta);
  res.initial_grad_norm = g.norm();
  res.grad_norm = res.initial_grad_norm;
  if (res.initial_grad_norm == 0.0) return res;

  const int cg_max = opts.cg_max_iters > 0 ? opts.cg_max_iters : int(10 * n);
  for (int it = 0; it < opts.max_iters; ++it) {
    if (res.grad_norm <= opts.grad_tol * res.initial_grad_norm) return res;

    const double rel = res.grad_norm / res.initial_grad_norm;
    const double eta = std::max(std::min(0.5, std::sqrt(rel)), opts.cg_tol_floor);
    const Vector step = gauss_newton_cg(forward, prior, res.beta, inv_var, g, eta, cg_max);

    const double slope = g.dot(step);
    require_numeric(slope < 0.0, "map_estimate: CG step is not a descent direction");
    double alpha = 1.0;
    const double j0 = res.objective_history.back();
    Vector candidate;
    while (true) {
      candidate = res.beta + alpha * step;
      if (objective(candidate) <= j0 + opts.armijo_c * alpha * slope) break;
      alpha *= 0.5;
      require_numeric(alpha >= opts.min_step, "map_estimate: line search failed");
    }

    res.beta = candidate;
    res.objective_history.push_back(objective(res.beta));
    g = gradient(res.beta);
    res.grad_norm = g.norm();
    ++res.iterations;
  }
  require_numeric(res.grad_norm <= opts.grad_tol * res.initial_grad_norm,
                  "map_estimate: iteration cap reached before gradient tolerance");
  return res;
}

ToyProblem make_toy_problem(const ToyProblemConfig& config) {
  ToyProblem p;
  p.config = config;
  const index_t n = config.n;
  const double w = config.width;

  p.grid = Vector::LinSpaced(n, 0.0, w * double(n - 1) / double(n));
  p.beta_true.resize(n);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (index_t i = 0; i < n; ++i)
    p.beta_true(i) = std::log(1200.0 + 1100.0 * std::sin(two_pi * p.grid(i) / w));

  p.prior = std::make_shared<PriorOperator>(n, w);
  p.forward =
      std::make_shared<LinearSmootherForward>(n, w, config.smoothing_length, config.n_obs);

  const Vector y_true = p.forward->value(p.beta_true);
  p.noise_std = config.noise_rel * y_true.cwiseAbs();
  require((p.noise_std.array() > 0.0).all(),
          "make_toy_problem: relative noise needs nonzero truth observations");

  RngStream noise_rng = RngStream(config.seed).substream(0xDA7Au);
  const Vector z = noise_rng.randn(index_t(config.n_obs), 1).col(0);
  p.data = y_true + p.noise_std.cwiseProduct(z);

  p.misfit = std::make_shared<ToyMisfitHessian>(n, w, config.smoothing_length, config.n_obs,
                                                p.noise_std);
  return p;
}

std::shared_ptr<ToyMisfitHessian> toy_misfit_hessian(index_t n, double width,
                                                     double smoothing_length, index_t n_obs,
                                                     double noise_std_abs) {
  return std::make_shared<ToyMisfitHessian>(n, width, smoothing_length, n_obs,
                                            Vector::Constant(n_obs, noise_std_abs));
}

}  // namespace hodlr
