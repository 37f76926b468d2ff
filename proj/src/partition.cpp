#include "hodlr/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hodlr/rng.hpp"

namespace hodlr {

HierPartition::HierPartition(index_t n, int depth) : n_(n), depth_(depth) {
  require(depth >= 1, "HierPartition: depth must be >= 1");
  require(n >= (index_t(1) << depth), "HierPartition: need N >= 2^L so every leaf is non-empty");

  offsets_.resize(std::size_t(depth) + 1);
  offsets_[0] = {0, n};
  for (int l = 1; l <= depth; ++l) {
    const auto& parent = offsets_[std::size_t(l) - 1];
    auto& cur = offsets_[std::size_t(l)];
    cur.reserve(parent.size() * 2 - 1);
    for (std::size_t p = 0; p + 1 < parent.size(); ++p) {
      const index_t lo = parent[p], hi = parent[p + 1];
      cur.push_back(lo);
      cur.push_back(lo + (hi - lo + 1) / 2);  // left child takes ceil(n/2)
    }
    cur.push_back(n);
  }
}

IndexRange HierPartition::block(int level, index_t j) const {
  require(level >= 1 && level <= depth_, "HierPartition::block: level out of range");
  require(j >= 0 && j < num_blocks(level), "HierPartition::block: block index out of range");
  const auto& off = offsets_[std::size_t(level)];
  return IndexRange{off[std::size_t(j)], off[std::size_t(j) + 1]};
}

index_t HierPartition::max_leaf_size() const {
  index_t m = 0;
  for (index_t j = 0; j < num_leaves(); ++j) m = std::max(m, leaf(j).size());
  return m;
}

int default_depth(index_t n, index_t leaf_target) {
  require(n >= 1 && leaf_target >= 1, "default_depth: sizes must be positive");
  int depth = 0;
  // floor(log2(n / leaf_target)) without floating point edge cases
  for (index_t m = n / leaf_target; m > 1; m /= 2) ++depth;
  return std::max(1, depth);
}

Permutation Permutation::identity(index_t n) {
  std::vector<index_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), index_t(0));
  return Permutation(std::move(order));
}

Permutation::Permutation(std::vector<index_t> order) : order_(std::move(order)) {
  const index_t n = index_t(order_.size());
  require(n >= 1, "Permutation: empty order");
  inverse_.assign(std::size_t(n), index_t(-1));
  for (index_t i = 0; i < n; ++i) {
    const index_t src = order_[std::size_t(i)];
    require(src >= 0 && src < n, "Permutation: index out of range");
    require(inverse_[std::size_t(src)] == index_t(-1), "Permutation: not a bijection");
    inverse_[std::size_t(src)] = i;
  }
}

DenseMatrix Permutation::apply_rows(const DenseMatrix& x) const {
  require(x.rows() == size(), "Permutation::apply_rows: size mismatch");
  DenseMatrix y(x.rows(), x.cols());
  for (index_t i = 0; i < x.rows(); ++i) y.row(i) = x.row(order_[std::size_t(i)]);
  return y;
}

DenseMatrix Permutation::apply_transpose_rows(const DenseMatrix& x) const {
  require(x.rows() == size(), "Permutation::apply_transpose_rows: size mismatch");
  DenseMatrix y(x.rows(), x.cols());
  for (index_t i = 0; i < x.rows(); ++i) y.row(order_[std::size_t(i)]) = x.row(i);
  return y;
}

DenseMatrix Permutation::conjugate(const DenseMatrix& a) const {
  require(a.rows() == size() && a.cols() == size(), "Permutation::conjugate: size mismatch");
  DenseMatrix b(a.rows(), a.cols());
  for (index_t j = 0; j < a.cols(); ++j)
    for (index_t i = 0; i < a.rows(); ++i)
      b(i, j) = a(order_[std::size_t(i)], order_[std::size_t(j)]);
  return b;
}

DenseMatrix Permutation::conjugate_back(const DenseMatrix& a) const {
  require(a.rows() == size() && a.cols() == size(), "Permutation::conjugate_back: size mismatch");
  DenseMatrix b(a.rows(), a.cols());
  for (index_t j = 0; j < a.cols(); ++j)
    for (index_t i = 0; i < a.rows(); ++i)
      b(order_[std::size_t(i)], order_[std::size_t(j)]) = a(i, j);
  return b;
}

void write_permutation(const std::string& path, const Permutation& perm) {
  std::ofstream out(path);
  require(out.good(), "write_permutation: cannot open " + path);
  for (index_t i = 0; i < perm.size(); ++i) out << (perm[i] + 1) << "\n";
}

Permutation read_permutation(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_permutation: cannot open " + path);
  std::vector<index_t> order;
  long long v;
  while (in >> v) order.push_back(index_t(v - 1));
  return Permutation(std::move(order));
}

PointCloud read_point_cloud(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_point_cloud: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (row.empty()) continue;
    if (!rows.empty())
      require(row.size() == rows.front().size(), "read_point_cloud: inconsistent dimensions");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "read_point_cloud: no points");
  const int dim = int(rows.front().size());
  require(dim >= 1 && dim <= 3, "read_point_cloud: dimension must be 1..3");
  PointCloud pts;
  pts.coords.resize(index_t(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int d = 0; d < dim; ++d) pts.coords(index_t(i), d) = rows[i][std::size_t(d)];
  require(all_finite(pts.coords), "read_point_cloud: non-finite coordinates");
  return pts;
}

void write_point_cloud(const std::string& path, const PointCloud& pts) {
  std::ofstream out(path);
  require(out.good(), "write_point_cloud: cannot open " + path);
  char buf[64];
  for (index_t i = 0; i < pts.size(); ++i) {
    for (int d = 0; d < pts.dim(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", pts.coords(i, d));
      out << buf << (d + 1 == pts.dim() ? "" : " ");
    }
    out << "\n";
  }
}

namespace {

void kd_split(const PointCloud& pts, std::vector<index_t>& idx, index_t lo, index_t hi) {
  const index_t count = hi - lo;
  if (count <= 1) return;

  int axis = 0;
  double best_extent = -1.0;
  for (int d = 0; d < pts.dim(); ++d) {
    double mn = pts.coords(idx[std::size_t(lo)], d), mx = mn;
    for (index_t i = lo + 1; i < hi; ++i) {
      const double c = pts.coords(idx[std::size_t(i)], d);
      mn = std::min(mn, c);
      mx = std::max(mx, c);
    }
    if (mx - mn > best_extent) {
      best_extent = mx - mn;
      axis = d;
    }
  }

  const index_t mid = lo + (count + 1) / 2;  // left part takes ceil(n/2)
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](index_t a, index_t b) {
                     const double ca = pts.coords(a, axis), cb = pts.coords(b, axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  kd_split(pts, idx, lo, mid);
  kd_split(pts, idx, mid, hi);
}

}  // namespace

KdOrderResult kdtree_order(const PointCloud& pts, int depth) {
  const index_t n = pts.size();
  require(n >= 1, "kdtree_order: empty point cloud");
  require(all_finite(pts.coords), "kdtree_order: non-finite coordinates");
  require(n >= (index_t(1) << depth), "kdtree_order: need N >= 2^L");

  bool degenerate = true;
  for (int d = 0; d < pts.dim() && degenerate; ++d) {
    for (index_t i = 1; i < n; ++i) {
      if (pts.coords(i, d) != pts.coords(0, d)) {
        degenerate = false;
        break;
      }
    }
  }
  if (degenerate) return KdOrderResult{Permutation::identity(n), true};

  std::vector<index_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), index_t(0));
  kd_split(pts, idx, 0, n);
  return KdOrderResult{Permutation(std::move(idx)), false};
}

namespace {

double point_dist(const PointCloud& pts, index_t a, index_t b) {
  return (pts.coords.row(a) - pts.coords.row(b)).norm();
}

}  // namespace

double locality_score(const PointCloud& pts, const Permutation& perm,
                      const HierPartition& partition) {
  const index_t n = pts.size();
  require(perm.size() == n && partition.size() == n, "locality_score: inconsistent sizes");

  const IndexRange left = partition.block(1, 0);
  const IndexRange right = partition.block(1, 1);

  double cross_sum = 0.0, global_sum = 0.0;
  std::uint64_t cross_cnt = 0, global_cnt = 0;

  if (n <= 2000) {
    for (index_t i = 0; i < n; ++i) {
      for (index_t j = i + 1; j < n; ++j) {
        const double dij = point_dist(pts, perm[i], perm[j]);
        global_sum += dij;
        ++global_cnt;
        const bool il = i < left.end, jl = j < left.end;
        if (il != jl) {
          cross_sum += dij;
          ++cross_cnt;
        }
      }
    }
  } else {
    // Fixed-size subsample with an internal stream derived from N only, so
    // the score is deterministic for a given input.
    constexpr std::uint64_t kPairs = 200000;
    RngStream rng(0x10C0u ^ std::uint64_t(n));
    auto draw_index = [&](index_t lo, index_t hi) {
      const index_t k = lo + index_t(rng.uniform() * double(hi - lo));
      return std::min(k, hi - 1);
    };
    for (std::uint64_t s = 0; s < kPairs; ++s) {
      const index_t i = draw_index(0, n);
      const index_t j = draw_index(0, n);
      if (i == j) continue;
      global_sum += point_dist(pts, perm[i], perm[j]);
      ++global_cnt;
    }
    for (std::uint64_t s = 0; s < kPairs; ++s) {
      const index_t i = draw_index(left.begin, left.end);
      const index_t j = draw_index(right.begin, right.end);
      cross_sum += point_dist(pts, perm[i], perm[j]);
      ++cross_cnt;
    }
  }

  require(global_cnt > 0 && cross_cnt > 0, "locality_score: need at least two points per side");
  const double global_mean = global_sum / double(global_cnt);
  if (global_mean == 0.0) return 1.0;  // degenerate cloud
  return (cross_sum / double(cross_cnt)) / global_mean;
}

}  // namespace hodlr
