#pragma once

// Symmetric factorization W W^T = H of an SPD HODLR matrix.
//
// W = B * G_L * ... * G_1, where B is the block-diagonal of leaf Cholesky
// factors and each G_l = I + sum_pairs q diag(g) q^T is a symmetric
// low-rank update of the identity living on one sibling-pair range. A
// pair's update comes from pulling the children factors out of its
// off-diagonal block: with P = [W_left^{-1} U | W_right^{-1} V] = Q R and
// the 2r x 2r core R K R^T = E diag(lambda) E^T (K the antidiagonal sigma
// coupling), the middle matrix I + P K P^T factors as G G^T with
// q = Q E and g = sqrt(1 + lambda) - 1. Eigenvalues at or below -1 mean
// the matrix is not positive definite, which is an error here.
//
// Factorization costs O(N log^2 N); every apply below costs O(N log N).

#include <cstdint>
#include <vector>

#include "hodlr/common.hpp"
#include "hodlr/hodlr_matrix.hpp"

namespace hodlr {

class HodlrFactorization {
 public:
  // Requires densify(h) SPD; a 20-step Lanczos probe rejects clearly
  // indefinite inputs up front and the construction itself fails on any
  // indefinite leaf or update core. The factor residual
  // ||W W^T - H||_2 <= factor_tol ||H||_2 is verified with power-iteration
  // probes before returning.
  static HodlrFactorization factorize_spd(const HodlrMatrix& h, double factor_tol = 1e-10);

  index_t size() const { return source_.size(); }
  const HodlrMatrix& source() const { return source_; }
  double factor_tol() const { return factor_tol_; }
  double verified_residual() const { return verified_residual_; }

  // W z, W^T z, W^{-1} z, W^{-T} z. Matrix versions apply columnwise; the
  // parallel policy distributes disjoint pair/leaf ranges per level, so all
  // results are bit-identical to the serial schedule.
  DenseMatrix sqrt_apply(const DenseMatrix& z, Exec exec = Exec::Parallel) const;
  DenseMatrix sqrt_transpose_apply(const DenseMatrix& z, Exec exec = Exec::Parallel) const;
  DenseMatrix inv_sqrt_apply(const DenseMatrix& z, Exec exec = Exec::Parallel) const;
  DenseMatrix inv_sqrt_transpose_apply(const DenseMatrix& z, Exec exec = Exec::Parallel) const;

  Vector sqrt_apply(const Vector& z, Exec exec = Exec::Parallel) const;
  Vector sqrt_transpose_apply(const Vector& z, Exec exec = Exec::Parallel) const;
  Vector inv_sqrt_apply(const Vector& z, Exec exec = Exec::Parallel) const;
  Vector inv_sqrt_transpose_apply(const Vector& z, Exec exec = Exec::Parallel) const;

  struct SolveResult {
    Vector x;
    double rel_residual = 0.0;  // ||H x - b|| / ||b||, always reported
  };

  // x = W^{-T} W^{-1} b with the residual measured against the source.
  SolveResult solve(const Vector& b, Exec exec = Exec::Parallel) const;

  // Exact multiply-add counts mirroring the apply kernels.
  std::uint64_t solve_madds() const;
  std::uint64_t sqrt_apply_madds() const;

 private:
  explicit HodlrFactorization(HodlrMatrix source) : source_(std::move(source)) {}

  struct LeafFactor {
    index_t offset = 0;
    DenseMatrix l;  // lower triangular Cholesky factor
  };

  struct UpdateFactor {
    index_t offset = 0;
    DenseMatrix q;        // orthonormal columns on the pair's range
    Vector forward_gain;  // sqrt(1 + lambda) - 1
    Vector inverse_gain;  // 1 / sqrt(1 + lambda) - 1
  };

  // X has rows for [range.begin, range.end); applies the inverse of the
  // partial factor built from levels > level within that range.
  DenseMatrix subtree_inv_apply(int level, IndexRange range, DenseMatrix x) const;

  HodlrMatrix source_;
  double factor_tol_ = 1e-10;
  double verified_residual_ = 0.0;
  std::vector<LeafFactor> leaves_;
  std::vector<std::vector<UpdateFactor>> updates_;  // [level-1][pair]
};

}  // namespace hodlr
