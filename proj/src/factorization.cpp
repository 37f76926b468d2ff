#include "hodlr/factorization.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>

#include "hodlr/dense_kernels.hpp"
#include "hodlr/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hodlr {

namespace {

void apply_update(const DenseMatrix& q, const Vector& gain, index_t local_offset,
                  DenseMatrix& x) {
  if (q.cols() == 0) return;
  auto rows = x.middleRows(local_offset, q.rows());
  DenseMatrix t = q.transpose() * rows;
  t.array().colwise() *= gain.array();
  rows.noalias() += q * t;
}

// Smallest Ritz value of a 20-step Lanczos recurrence; a non-positive value
// certifies the matrix is not positive definite.
double lanczos_min_ritz(const HodlrMatrix& h, int steps) {
  RngStream rng(0x5AD5AD ^ std::uint64_t(h.size()));
  const index_t n = h.size();
  Vector v = rng.randn(n, 1).col(0);
  v /= v.norm();
  Vector v_prev = Vector::Zero(n);
  double beta = 0.0;
  std::vector<double> alphas, betas;
  for (int k = 0; k < steps && k < int(n); ++k) {
    Vector w = h.apply(v);
    const double alpha = v.dot(w);
    w -= alpha * v + beta * v_prev;
    alphas.push_back(alpha);
    beta = w.norm();
    if (beta < 1e-300) break;
    betas.push_back(beta);
    v_prev = v;
    v = w / beta;
  }
  const index_t m = index_t(alphas.size());
  DenseMatrix t = DenseMatrix::Zero(m, m);
  for (index_t i = 0; i < m; ++i) {
    t(i, i) = alphas[std::size_t(i)];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = betas[std::size_t(i)];
  }
  return sym_eig(t).lambda(0);
}

}  // namespace

DenseMatrix HodlrFactorization::subtree_inv_apply(int level, IndexRange range,
                                                  DenseMatrix x) const {
  const HierPartition& p = source_.partition();
  for (const LeafFactor& lf : leaves_) {
    if (lf.offset < range.begin || lf.offset >= range.end) continue;
    auto rows = x.middleRows(lf.offset - range.begin, lf.l.rows());
    lf.l.triangularView<Eigen::Lower>().solveInPlace(rows);
  }
  for (int m = p.depth(); m > level; --m) {
    for (const UpdateFactor& uf : updates_[std::size_t(m) - 1]) {
      if (uf.offset < range.begin || uf.offset >= range.end) continue;
      apply_update(uf.q, uf.inverse_gain, uf.offset - range.begin, x);
    }
  }
  return x;
}

HodlrFactorization HodlrFactorization::factorize_spd(const HodlrMatrix& h, double factor_tol) {
  require(factor_tol > 0.0, "factorize_spd: factor_tol must be positive");
  require_numeric(lanczos_min_ritz(h, 20) > 0.0,
                  "factorize_spd: Lanczos probe found a non-positive Ritz value; "
                  "matrix is not positive definite");

  HodlrFactorization f(h);
  f.factor_tol_ = factor_tol;
  const HierPartition& p = h.partition();

  f.leaves_.resize(std::size_t(p.num_leaves()));
  for (index_t j = 0; j < p.num_leaves(); ++j) {
    Eigen::LLT<DenseMatrix> llt(h.leaf(j));
    require_numeric(llt.info() == Eigen::Success,
                    "factorize_spd: leaf diagonal block is not positive definite");
    f.leaves_[std::size_t(j)] = LeafFactor{p.leaf(j).begin, DenseMatrix(llt.matrixL())};
  }

  f.updates_.resize(std::size_t(p.depth()));
  for (int level = p.depth(); level >= 1; --level) {
    auto& level_updates = f.updates_[std::size_t(level) - 1];
    level_updates.resize(std::size_t(p.num_pairs(level)));
    const index_t pairs = p.num_pairs(level);

    std::string failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (pairs > 1)
#endif
    for (index_t j = 0; j < pairs; ++j) {
      const LowRankFactor& blk = h.factor(level, j);
      const IndexRange left = p.block(level, 2 * j);
      const IndexRange right = p.block(level, 2 * j + 1);
      const IndexRange pair_range{left.begin, right.end};
      const index_t r = blk.rank();
      UpdateFactor uf;
      uf.offset = pair_range.begin;
      if (r == 0) {
        uf.q = DenseMatrix(pair_range.size(), 0);
        level_updates[std::size_t(j)] = std::move(uf);
        continue;
      }

      const DenseMatrix u_eff = f.subtree_inv_apply(level, left, blk.u);
      const DenseMatrix v_eff = f.subtree_inv_apply(level, right, blk.v);

      DenseMatrix pmat = DenseMatrix::Zero(pair_range.size(), 2 * r);
      pmat.topLeftCorner(left.size(), r) = u_eff;
      pmat.bottomRightCorner(right.size(), r) = v_eff;

      Eigen::HouseholderQR<DenseMatrix> qr(pmat);
      const DenseMatrix q_thin =
          qr.householderQ() * DenseMatrix::Identity(pair_range.size(), 2 * r);
      const DenseMatrix r_mat =
          qr.matrixQR().topRows(2 * r).triangularView<Eigen::Upper>();

      DenseMatrix core = DenseMatrix::Zero(2 * r, 2 * r);
      core.topRightCorner(r, r).diagonal() = blk.sigma;
      core.bottomLeftCorner(r, r).diagonal() = blk.sigma;
      DenseMatrix c = r_mat * core * r_mat.transpose();
      c = 0.5 * (c + c.transpose());

      const SymEigResult eig = sym_eig(c);
      if (1.0 + eig.lambda(0) <= 0.0) {
#ifdef _OPENMP
#pragma omp critical
#endif
        failure = "factorize_spd: indefinite update core at level " + std::to_string(level);
        continue;
      }

      uf.q = q_thin * eig.v;
      uf.forward_gain = (eig.lambda.array() + 1.0).sqrt() - 1.0;
      uf.inverse_gain = (eig.lambda.array() + 1.0).rsqrt() - 1.0;
      level_updates[std::size_t(j)] = std::move(uf);
    }
    require_numeric(failure.empty(), failure);
  }

  // Verify the factor residual against the source with power iterations.
  {
    RngStream rng(0xFAC70 ^ std::uint64_t(h.size()));
    Vector x = rng.randn(h.size(), 1).col(0);
    double residual = 0.0, h_norm = 0.0;
    Vector y = x;
    for (int k = 0; k < 20; ++k) {
      const double xn = x.norm();
      Vector r = f.sqrt_apply(Vector(f.sqrt_transpose_apply(x))) - h.apply(x);
      residual = std::max(residual, r.norm() / xn);
      if (r.norm() == 0.0) break;
      x = r / r.norm();
    }
    for (int k = 0; k < 20; ++k) {
      const Vector hy = h.apply(y);
      h_norm = std::max(h_norm, hy.norm() / y.norm());
      if (hy.norm() == 0.0) break;
      y = hy / hy.norm();
    }
    f.verified_residual_ = h_norm > 0.0 ? residual / h_norm : residual;
    require_numeric(f.verified_residual_ <= factor_tol,
                    "factorize_spd: factor residual exceeds factor_tol");
  }
  return f;
}

DenseMatrix HodlrFactorization::sqrt_apply(const DenseMatrix& z, Exec exec) const {
  require(z.rows() == size(), "sqrt_apply: row count mismatch");
  DenseMatrix x = z;
  const HierPartition& p = source_.partition();
  for (int level = 1; level <= p.depth(); ++level) {
    const auto& ups = updates_[std::size_t(level) - 1];
    const index_t count = index_t(ups.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && count > 1)
#endif
    for (index_t j = 0; j < count; ++j)
      apply_update(ups[std::size_t(j)].q, ups[std::size_t(j)].forward_gain,
                   ups[std::size_t(j)].offset, x);
  }
  const index_t leaves = index_t(leaves_.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && leaves > 1)
#endif
  for (index_t j = 0; j < leaves; ++j) {
    const LeafFactor& lf = leaves_[std::size_t(j)];
    x.middleRows(lf.offset, lf.l.rows()) =
        lf.l.triangularView<Eigen::Lower>() * x.middleRows(lf.offset, lf.l.rows());
  }
  return x;
}

DenseMatrix HodlrFactorization::sqrt_transpose_apply(const DenseMatrix& z, Exec exec) const {
  require(z.rows() == size(), "sqrt_transpose_apply: row count mismatch");
  DenseMatrix x = z;
  const HierPartition& p = source_.partition();
  const index_t leaves = index_t(leaves_.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && leaves > 1)
#endif
  for (index_t j = 0; j < leaves; ++j) {
    const LeafFactor& lf = leaves_[std::size_t(j)];
    x.middleRows(lf.offset, lf.l.rows()) =
        lf.l.transpose().triangularView<Eigen::Upper>() * x.middleRows(lf.offset, lf.l.rows());
  }
  for (int level = p.depth(); level >= 1; --level) {
    const auto& ups = updates_[std::size_t(level) - 1];
    const index_t count = index_t(ups.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && count > 1)
#endif
    for (index_t j = 0; j < count; ++j)
      apply_update(ups[std::size_t(j)].q, ups[std::size_t(j)].forward_gain,
                   ups[std::size_t(j)].offset, x);
  }
  return x;
}

DenseMatrix HodlrFactorization::inv_sqrt_apply(const DenseMatrix& z, Exec exec) const {
  require(z.rows() == size(), "inv_sqrt_apply: row count mismatch");
  DenseMatrix x = z;
  const HierPartition& p = source_.partition();
  const index_t leaves = index_t(leaves_.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && leaves > 1)
#endif
  for (index_t j = 0; j < leaves; ++j) {
    const LeafFactor& lf = leaves_[std::size_t(j)];
    auto rows = x.middleRows(lf.offset, lf.l.rows());
    lf.l.triangularView<Eigen::Lower>().solveInPlace(rows);
  }
  for (int level = p.depth(); level >= 1; --level) {
    const auto& ups = updates_[std::size_t(level) - 1];
    const index_t count = index_t(ups.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && count > 1)
#endif
    for (index_t j = 0; j < count; ++j)
      apply_update(ups[std::size_t(j)].q, ups[std::size_t(j)].inverse_gain,
                   ups[std::size_t(j)].offset, x);
  }
  return x;
}

DenseMatrix HodlrFactorization::inv_sqrt_transpose_apply(const DenseMatrix& z, Exec exec) const {
  require(z.rows() == size(), "inv_sqrt_transpose_apply: row count mismatch");
  DenseMatrix x = z;
  const HierPartition& p = source_.partition();
  for (int level = 1; level <= p.depth(); ++level) {
    const auto& ups = updates_[std::size_t(level) - 1];
    const index_t count = index_t(ups.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && count > 1)
#endif
    for (index_t j = 0; j < count; ++j)
      apply_update(ups[std::size_t(j)].q, ups[std::size_t(j)].inverse_gain,
                   ups[std::size_t(j)].offset, x);
  }
  const index_t leaves = index_t(leaves_.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && leaves > 1)
#endif
  for (index_t j = 0; j < leaves; ++j) {
    const LeafFactor& lf = leaves_[std::size_t(j)];
    auto rows = x.middleRows(lf.offset, lf.l.rows());
    lf.l.transpose().triangularView<Eigen::Upper>().solveInPlace(rows);
  }
  return x;
}

Vector HodlrFactorization::sqrt_apply(const Vector& z, Exec exec) const {
  return Vector(sqrt_apply(DenseMatrix(z), exec).col(0));
}
Vector HodlrFactorization::sqrt_transpose_apply(const Vector& z, Exec exec) const {
  return Vector(sqrt_transpose_apply(DenseMatrix(z), exec).col(0));
}
Vector HodlrFactorization::inv_sqrt_apply(const Vector& z, Exec exec) const {
  return Vector(inv_sqrt_apply(DenseMatrix(z), exec).col(0));
}
Vector HodlrFactorization::inv_sqrt_transpose_apply(const Vector& z, Exec exec) const {
  return Vector(inv_sqrt_transpose_apply(DenseMatrix(z), exec).col(0));
}

HodlrFactorization::SolveResult HodlrFactorization::solve(const Vector& b, Exec exec) const {
  require(b.size() == size(), "solve: size mismatch");
  SolveResult res;
  res.x = inv_sqrt_transpose_apply(inv_sqrt_apply(b, exec), exec);
  const double bn = b.norm();
  res.rel_residual = bn > 0.0 ? (source_.apply(res.x) - b).norm() / bn : 0.0;
  return res;
}

std::uint64_t HodlrFactorization::solve_madds() const {
  std::uint64_t madds = 0;
  for (const auto& level : updates_) {
    for (const auto& uf : level) {
      const std::uint64_t n = std::uint64_t(uf.q.rows()), m = std::uint64_t(uf.q.cols());
      madds += 2 * (2 * n * m + m);  // once in W^{-1}, once in W^{-T}
    }
  }
  for (const auto& lf : leaves_) {
    const std::uint64_t n = std::uint64_t(lf.l.rows());
    madds += n * (n + 1);  // forward plus backward triangular solve
  }
  return madds;
}

std::uint64_t HodlrFactorization::sqrt_apply_madds() const {
  std::uint64_t madds = 0;
  for (const auto& level : updates_) {
    for (const auto& uf : level) {
      const std::uint64_t n = std::uint64_t(uf.q.rows()), m = std::uint64_t(uf.q.cols());
      madds += 2 * n * m + m;
    }
  }
  for (const auto& lf : leaves_) {
    const std::uint64_t n = std::uint64_t(lf.l.rows());
    madds += n * (n + 1) / 2;
  }
  return madds;
}

}  // namespace hodlr
