#include "hodlr/dense_kernels.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace hodlr {

OrthogResult orthog(const DenseMatrix& m) {
  require(m.rows() >= m.cols(), "orthog: need rows >= cols");
  require(m.cols() >= 1, "orthog: empty input");
  require(all_finite(m), "orthog: non-finite input");

  Eigen::HouseholderQR<DenseMatrix> qr(m);
  DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(m.rows(), m.cols());

  Eigen::ColPivHouseholderQR<DenseMatrix> rank_probe(m);
  return OrthogResult{std::move(q), rank_probe.rank()};
}

SvdResult small_svd(const DenseMatrix& m) {
  require(m.rows() <= kSmallMatrixCap && m.cols() <= kSmallMatrixCap,
          "small_svd: dimension exceeds the small-matrix cap");
  require(m.size() > 0, "small_svd: empty input");
  require(all_finite(m), "small_svd: non-finite input");

  if (std::min(m.rows(), m.cols()) <= 16) {
    Eigen::JacobiSVD<DenseMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return SvdResult{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  }
  Eigen::BDCSVD<DenseMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  require_numeric(svd.info() == Eigen::Success, "small_svd: SVD did not converge");
  return SvdResult{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

SymEigResult sym_eig(const DenseMatrix& m) {
  require(m.rows() == m.cols(), "sym_eig: matrix must be square");
  require(m.rows() <= kSmallMatrixCap, "sym_eig: dimension exceeds the small-matrix cap");
  require(all_finite(m), "sym_eig: non-finite input");
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * std::max(scale, 1e-300),
          "sym_eig: input asymmetric beyond 1e-12 relative");

  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(m);
  require_numeric(eig.info() == Eigen::Success, "sym_eig: eigendecomposition failed");
  return SymEigResult{eig.eigenvalues(), eig.eigenvectors()};
}

double spectral_norm_estimate(const LinearOperator& op, int iters, RngStream rng) {
  require(iters >= 1, "spectral_norm_estimate: iters must be >= 1");
  Vector x = rng.randn(op.size(), 1).col(0);
  double estimate = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double xn = x.norm();
    if (xn == 0.0) break;
    const Vector y = op.apply(x);
    estimate = std::max(estimate, y.norm() / xn);
    if (y.norm() == 0.0) break;  // zero operator (or x in its null space)
    x = y / y.norm();
  }
  return estimate;
}

double dense_sym_spectral_norm(const DenseMatrix& m) {
  if (m.size() == 0) return 0.0;
  const SymEigResult eig = sym_eig(m);
  return eig.lambda.cwiseAbs().maxCoeff();
}

}  // namespace hodlr
