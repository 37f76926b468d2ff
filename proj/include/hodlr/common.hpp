#pragma once

// Shared scalar/matrix aliases and the error types used across the library.
// Dense storage is column-major double precision throughout.

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hodlr {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using index_t = Eigen::Index;

// Everything above this size must go through the matrix-free path; dense
// realizations (densify, dense eigendecompositions) refuse larger inputs.
inline constexpr index_t kSmallMatrixCap = 4096;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad sizes, malformed files, violated preconditions.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Non-convergence, loss of positive definiteness, unreachable tolerances.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

inline void require_numeric(bool cond, const std::string& what) {
  if (!cond) throw NumericalFailure(what);
}

inline bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

// Execution policy for the data-parallel kernels. Parallel variants
// distribute whole blocks or columns across threads while running the exact
// same per-block code as the serial schedule, so results are bit-identical
// for every thread count.
enum class Exec { Serial, Parallel };

}  // namespace hodlr
