#pragma once

// Shared helpers for the test suites: seeded random instances and dense
// oracles that stay off the library's fast paths (Jacobi SVD, naive loops,
// dense Eigen solves).

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "hodlr/dense_kernels.hpp"
#include "hodlr/hodlr_matrix.hpp"
#include "hodlr/partition.hpp"
#include "hodlr/rng.hpp"

namespace hodlr::testing {

inline DenseMatrix random_symmetric(index_t n, RngStream rng) {
  const DenseMatrix g = rng.randn(n, n);
  return 0.5 * (g + g.transpose());
}

// Oracle spectral norm via Jacobi SVD (a different algorithm from the
// library's symmetric eigensolver route).
inline double oracle_spectral_norm(const DenseMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<DenseMatrix> svd(m);
  return svd.singularValues()(0);
}

inline Vector oracle_singular_values(const DenseMatrix& m) {
  Eigen::JacobiSVD<DenseMatrix> svd(m);
  return svd.singularValues();
}

// Random HODLR instance with orthonormal factors and geometrically decaying
// singular values; leaves are symmetric random blocks.
inline HodlrMatrix random_hodlr(const HierPartition& partition, index_t rank, RngStream rng,
                                double sigma_decay = 0.5, double leaf_scale = 1.0) {
  HodlrMatrix h(partition);
  for (int l = 1; l <= partition.depth(); ++l) {
    for (index_t j = 0; j < partition.num_pairs(l); ++j) {
      const index_t nl = partition.block(l, 2 * j).size();
      const index_t nr = partition.block(l, 2 * j + 1).size();
      const index_t r = std::min({rank, nl, nr});
      RngStream block_rng = rng.substream(std::uint64_t(1000 * l + j));
      LowRankFactor f;
      f.u = orthog(block_rng.substream(0).randn(nl, r)).q;
      f.v = orthog(block_rng.substream(1).randn(nr, r)).q;
      f.sigma.resize(r);
      for (index_t k = 0; k < r; ++k) f.sigma(k) = std::pow(sigma_decay, double(k));
      h.set_factor(l, j, std::move(f));
    }
  }
  for (index_t j = 0; j < partition.num_leaves(); ++j) {
    const index_t m = partition.leaf(j).size();
    const DenseMatrix g = rng.substream(std::uint64_t(5000 + j)).randn(m, m);
    h.set_leaf(j, DenseMatrix(leaf_scale * 0.5 * (g + g.transpose())));
  }
  return h;
}

// Same, shifted far enough to be comfortably SPD.
inline HodlrMatrix random_spd_hodlr(const HierPartition& partition, index_t rank,
                                    RngStream rng, double sigma_decay = 0.5) {
  const HodlrMatrix h = random_hodlr(partition, rank, rng, sigma_decay, 0.25);
  double shift = 1.0;
  for (int l = 1; l <= partition.depth(); ++l) shift += 1.0;  // one layer per level
  double leaf_norm = 0.0;
  for (index_t j = 0; j < partition.num_leaves(); ++j)
    leaf_norm = std::max(leaf_norm, h.leaf(j).cwiseAbs().rowwise().sum().maxCoeff());
  return h.add_scaled_identity(shift + leaf_norm);
}

}  // namespace hodlr::testing
