#pragma once

// Symmetric HODLR matrix: dense leaf diagonal blocks plus one low-rank
// factor per sibling pair and level for the upper off-diagonal block; the
// lower block is its transpose. Storage for uniform rank r per level is
//
//   sum_{l=1..L} sum_{pairs j} r * (n_left + n_right + 1)  +  sum_leaves n_j^2
//
// which is O(N (r L + leaf)) = O(N log N) for bounded ranks and L ~ log N.

#include <cstdint>
#include <string>
#include <vector>

#include "hodlr/common.hpp"
#include "hodlr/linear_operator.hpp"
#include "hodlr/partition.hpp"

namespace hodlr {

struct LowRankFactor {
  DenseMatrix u;  // block rows x rank, orthonormal columns
  Vector sigma;   // non-increasing, non-negative
  DenseMatrix v;  // block cols x rank, orthonormal columns

  index_t rank() const { return sigma.size(); }
  DenseMatrix dense() const { return u * sigma.asDiagonal() * v.transpose(); }
};

class HodlrMatrix {
 public:
  // All ranks zero, all leaves zero.
  explicit HodlrMatrix(HierPartition partition);

  static HodlrMatrix identity(HierPartition partition);

  index_t size() const { return partition_.size(); }
  int depth() const { return partition_.depth(); }
  const HierPartition& partition() const { return partition_; }

  const LowRankFactor& factor(int level, index_t pair) const;
  void set_factor(int level, index_t pair, LowRankFactor f);

  const DenseMatrix& leaf(index_t j) const;
  void set_leaf(index_t j, DenseMatrix d);

  // y = H x, exact in the stored factors. Levels are accumulated coarse to
  // fine and leaves last; the parallel policy distributes sibling pairs and
  // leaves (disjoint output rows), so results are bit-identical to the
  // serial schedule.
  DenseMatrix apply(const DenseMatrix& x, Exec exec = Exec::Parallel) const;
  Vector apply(const Vector& x, Exec exec = Exec::Parallel) const;

  DenseMatrix densify() const;  // N <= small-matrix cap

  // Exact number of stored real values (factors + sigmas + full dense leaves).
  std::uint64_t storage_count() const;

  // Frobenius norm from the factors, never densifying.
  double frob_norm() const;

  // Same hierarchy with leaf diagonals shifted: densify() + c*I exactly.
  HodlrMatrix add_scaled_identity(double c) const;

  // Exact multiply-add count of one apply column; mirrors the kernel.
  std::uint64_t apply_madds_per_column() const;

  // Container with a JSON header and little-endian float64 payload.
  void save(const std::string& path) const;
  static HodlrMatrix load(const std::string& path);

  // Truncate every off-diagonal block of a symmetric dense matrix at the
  // given absolute spectral tolerance (0 keeps full ranks -> exact).
  static HodlrMatrix from_dense(const DenseMatrix& a, const HierPartition& partition,
                                double block_abs_tol = 0.0);

 private:
  HierPartition partition_;
  std::vector<std::vector<LowRankFactor>> factors_;  // [level-1][pair]
  std::vector<DenseMatrix> leaves_;
};

// Serial reference apply: independent naive loops (no shared kernel code),
// kept as the oracle the optimized/parallel kernels are tested against.
DenseMatrix hodlr_apply_reference(const HodlrMatrix& h, const DenseMatrix& x);

// LinearOperator view of a HODLR matrix.
class HodlrOperator final : public LinearOperator {
 public:
  explicit HodlrOperator(const HodlrMatrix& h) : LinearOperator(h.size()), h_(h) {}

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override { return h_.apply(x); }
  const HodlrMatrix& h_;
};

}  // namespace hodlr
