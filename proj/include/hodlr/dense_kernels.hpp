#pragma once

// Small dense primitives shared by every other module: Householder
// orthogonalization, small SVD, symmetric eigendecomposition and a power
// iteration spectral-norm estimate. Backed by Eigen behind these contracts.

#include "hodlr/common.hpp"
#include "hodlr/linear_operator.hpp"
#include "hodlr/rng.hpp"

namespace hodlr {

struct OrthogResult {
  DenseMatrix q;           // rows x cols, orthonormal columns spanning range(m)
  index_t effective_rank;  // numerical rank of the input; columns beyond it
                           // are an arbitrary orthonormal completion
};

// Householder QR based orthogonalization; requires rows >= cols and finite
// entries. Rank-deficient inputs are permitted.
OrthogResult orthog(const DenseMatrix& m);

struct SvdResult {
  DenseMatrix u;
  Vector sigma;  // non-increasing, non-negative
  DenseMatrix v;
};

// Thin SVD for matrices with both dimensions <= kSmallMatrixCap.
SvdResult small_svd(const DenseMatrix& m);

struct SymEigResult {
  Vector lambda;  // ascending
  DenseMatrix v;  // orthonormal
};

// Symmetric eigendecomposition; input must be symmetric to 1e-12 relative.
SymEigResult sym_eig(const DenseMatrix& m);

// Power-iteration estimate of the largest |eigenvalue| of a symmetric
// operator. Returns the running maximum of ||A x_k|| / ||x_k||, so the
// estimate never exceeds ||A||_2 and is non-decreasing in iters for a fixed
// seed. 50 iterations is the documented default for ~1% accuracy on
// well-separated spectra. Consumes one operator apply per iteration.
double spectral_norm_estimate(const LinearOperator& op, int iters, RngStream rng);

inline constexpr int kSpectralNormDefaultIters = 50;

// Spectral norm of an explicit symmetric matrix via sym_eig (oracle path).
double dense_sym_spectral_norm(const DenseMatrix& m);

}  // namespace hodlr
