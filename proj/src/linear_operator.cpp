#include "hodlr/linear_operator.hpp"

#include <algorithm>

namespace hodlr {

DenseOperator::DenseOperator(DenseMatrix a) : LinearOperator(a.rows()), a_(std::move(a)) {
  require(a_.rows() == a_.cols(), "dense_operator: matrix must be square");
  require(all_finite(a_), "dense_operator: non-finite entries");
  const double scale = std::max(a_.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10 * scale, "dense_operator: matrix asymmetric beyond 1e-10 relative");
}

}  // namespace hodlr
