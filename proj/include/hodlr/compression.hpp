#pragma once

// Randomized matrix-free compression. The low-rank kernel is the
// double-pass sketch (sample the column space, orthogonalize, sample the
// row space against the orthogonal basis, SVD the small compressed core).
// HODLR compression peels levels coarse to fine with structured random
// probes whose nonzero rows sit in the even sibling blocks, sampling the
// operator minus the already-captured levels; leaf diagonals are extracted
// last with one structured identity probe per leaf column.
//
// Fixed-rank mode consumes exactly
//   zeta = 2 (<r> + d) L + ceil(N / 2^L)
// operator applies, <r> the mean level rank and d the oversampling.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hodlr/hodlr_matrix.hpp"
#include "hodlr/linear_operator.hpp"
#include "hodlr/rng.hpp"

namespace hodlr {

struct CompressionBudget {
  enum class Mode { FixedRank, Adaptive };

  Mode mode = Mode::FixedRank;
  std::vector<index_t> level_ranks;  // fixed-rank mode, one entry per level
  index_t oversampling = 10;
  double tolerance = 0.0;             // adaptive mode
  bool tolerance_is_relative = true;  // relative to an operator norm estimate

  static CompressionBudget fixed_rank(std::vector<index_t> ranks, index_t d = 10);
  static CompressionBudget fixed_rank(int depth, index_t rank, index_t d = 10);
  static CompressionBudget adaptive(double tol, bool relative = true, index_t d = 10);

  void validate(int depth) const;
};

struct BlockReport {
  int level = 0;
  index_t pair = 0;
  index_t rank = 0;        // achieved rank after truncation
  Vector sketch_sigma;     // singular values of the sketched block (kept + tail)
  double error_estimate = 0.0;  // absolute spectral estimate for this block
  bool dense_fallback = false;  // block stored at full rank
};

struct CompressionReport {
  std::uint64_t applies_used = 0;  // operator counter delta over the call
  std::vector<index_t> level_ranks;
  std::vector<BlockReport> blocks;
  double op_norm_estimate = 0.0;        // adaptive mode: power-iteration estimate
  double block_error_bound_abs = 0.0;   // L * max per-block error estimate
  double error_estimate_rel = 0.0;      // block_error_bound_abs / op_norm_estimate
  std::uint64_t seed = 0;

  std::string to_json() const;

  // Spectra CSV rows: level, block, index, sigma.
  void write_spectra_csv(const std::string& path, const std::string& provenance) const;
};

// Number of operator applies fixed-rank HODLR compression consumes.
std::uint64_t zeta_applies(index_t n, int depth, const std::vector<index_t>& level_ranks,
                           index_t d);

// Double-pass randomized SVD of a symmetric operator, truncated to rank r;
// consumes exactly 2 (r + d) applies.
std::pair<LowRankFactor, CompressionReport> randomized_svd(const LinearOperator& op, index_t r,
                                                           index_t d, RngStream rng);

std::pair<HodlrMatrix, CompressionReport> hodlr_compress(const LinearOperator& op,
                                                         const HierPartition& partition,
                                                         const CompressionBudget& budget,
                                                         RngStream rng);

// Rank-adaptive variant: per-level ranks start at 8 and double (samples are
// accumulated, not redrawn) until the estimated error of every block at the
// level is below eps_rel * ||op|| / L, the per-block budget that makes the
// accumulated level errors meet eps_rel overall. Reports measured applies.
std::pair<HodlrMatrix, CompressionReport> hodlr_compress_adaptive(const LinearOperator& op,
                                                                  const HierPartition& partition,
                                                                  double eps_rel, index_t d,
                                                                  RngStream rng);

struct ErrorEstimate {
  double estimate = 0.0;  // relative spectral estimate of ||op - H|| / ||op||
  int iterations = 0;
};

// Power iteration on (op - H) scaled by a power-iteration estimate of
// ||op||; consumes 2*probes operator applies.
ErrorEstimate hodlr_error_estimate(const LinearOperator& op, const HodlrMatrix& h, int probes,
                                   RngStream rng);

struct CostCurvePoint {
  double target_error = 0.0;  // relative to the reference singular value
  bool lr_reachable = false;
  index_t lr_rank = 0;
  std::uint64_t lr_applies = 0;  // single-pass accounting: r + d
  bool hodlr_reachable = false;
  std::vector<index_t> hodlr_ranks;
  std::uint64_t hodlr_applies = 0;  // zeta
};

// Cost estimation from computed spectra: for each target relative error e,
// the global low-rank cost r(e) + d and the HODLR cost zeta with per-level
// ranks chosen so each block error is below e * sigma_ref / L. sigma_ref
// defaults to the largest global singular value. Targets below what the
// supplied spectra can certify are flagged unreachable.
std::vector<CostCurvePoint> estimate_costs(const Vector& global_sigma,
                                           const std::vector<Vector>& level_sigma, index_t n,
                                           int depth, index_t d,
                                           const std::vector<double>& error_grid,
                                           double sigma_ref = 0.0);

}  // namespace hodlr
