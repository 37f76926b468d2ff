#pragma once

// Recursive bisection index hierarchy, permutations, and the kd-tree
// ordering that keeps spatially close degrees of freedom close in index
// space.

#include <vector>

#include "hodlr/common.hpp"

namespace hodlr {

struct IndexRange {
  index_t begin = 0;
  index_t end = 0;  // half-open
  index_t size() const { return end - begin; }
};

// Depth-L balanced bisection of {0..N-1}. Level l in 1..L has 2^l
// contiguous blocks; odd splits give the left child the larger half, so
// sibling sizes differ by at most one and children tile their parent.
class HierPartition {
 public:
  HierPartition(index_t n, int depth);

  index_t size() const { return n_; }
  int depth() const { return depth_; }

  index_t num_blocks(int level) const { return index_t(1) << level; }
  index_t num_pairs(int level) const { return index_t(1) << (level - 1); }
  IndexRange block(int level, index_t j) const;

  index_t num_leaves() const { return num_blocks(depth_); }
  IndexRange leaf(index_t j) const { return block(depth_, j); }
  index_t max_leaf_size() const;

 private:
  index_t n_;
  int depth_;
  std::vector<std::vector<index_t>> offsets_;  // offsets_[l] has 2^(l+1)+1 entries
};

// L = max(1, floor(log2(N / leaf_target))); grows by one per doubling of N.
int default_depth(index_t n, index_t leaf_target);

class Permutation {
 public:
  static Permutation identity(index_t n);

  // order[i] = source index placed at position i; must be a bijection.
  explicit Permutation(std::vector<index_t> order);

  index_t size() const { return index_t(order_.size()); }
  index_t operator[](index_t i) const { return order_[std::size_t(i)]; }
  const std::vector<index_t>& order() const { return order_; }
  const std::vector<index_t>& inverse() const { return inverse_; }

  // y = B x with (B x)_i = x_{order[i]}, and friends.
  DenseMatrix apply_rows(const DenseMatrix& x) const;
  DenseMatrix apply_transpose_rows(const DenseMatrix& x) const;
  DenseMatrix conjugate(const DenseMatrix& a) const;       // B A B^T
  DenseMatrix conjugate_back(const DenseMatrix& a) const;  // B^T A B

 private:
  std::vector<index_t> order_;
  std::vector<index_t> inverse_;
};

// 1-based text export/import, one index per line.
void write_permutation(const std::string& path, const Permutation& perm);
Permutation read_permutation(const std::string& path);

struct PointCloud {
  DenseMatrix coords;  // N x dim, dim in {1,2,3}
  index_t size() const { return coords.rows(); }
  int dim() const { return int(coords.cols()); }
};

// Whitespace-delimited text, one point per line.
PointCloud read_point_cloud(const std::string& path);
void write_point_cloud(const std::string& path, const PointCloud& pts);

struct KdOrderResult {
  Permutation perm;
  bool degenerate = false;  // all points identical: input order kept
};

// Recursive hyperplane splits: widest-extent axis, median split with ties
// broken by original index, left part gets the larger half. Recursion
// continues to singletons so leaf interiors get a stable local order too.
KdOrderResult kdtree_order(const PointCloud& pts, int depth);

// Mean cross-pair distance between the two level-1 sibling blocks divided
// by the global mean pairwise distance, under the given ordering.
// A fixed-size pair subsample is used for N > 2000. Diagnostic quantity
// only; larger means better separated siblings.
double locality_score(const PointCloud& pts, const Permutation& perm,
                      const HierPartition& partition);

}  // namespace hodlr
