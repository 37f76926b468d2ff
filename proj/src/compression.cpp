#include "hodlr/compression.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hodlr/dense_kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hodlr {

using json = nlohmann::json;

CompressionBudget CompressionBudget::fixed_rank(std::vector<index_t> ranks, index_t d) {
  CompressionBudget b;
  b.mode = Mode::FixedRank;
  b.level_ranks = std::move(ranks);
  b.oversampling = d;
  return b;
}

CompressionBudget CompressionBudget::fixed_rank(int depth, index_t rank, index_t d) {
  return fixed_rank(std::vector<index_t>(std::size_t(depth), rank), d);
}

CompressionBudget CompressionBudget::adaptive(double tol, bool relative, index_t d) {
  CompressionBudget b;
  b.mode = Mode::Adaptive;
  b.tolerance = tol;
  b.tolerance_is_relative = relative;
  b.oversampling = d;
  return b;
}

void CompressionBudget::validate(int depth) const {
  require(oversampling >= 1, "CompressionBudget: oversampling must be >= 1");
  if (mode == Mode::FixedRank) {
    require(index_t(level_ranks.size()) == depth,
            "CompressionBudget: need one rank per level");
    for (index_t r : level_ranks) require(r >= 0, "CompressionBudget: ranks must be >= 0");
  } else {
    require(tolerance > 0.0, "CompressionBudget: adaptive mode requires tolerance > 0");
    if (tolerance_is_relative)
      require(tolerance < 1.0, "CompressionBudget: relative tolerance must be < 1");
  }
}

std::uint64_t zeta_applies(index_t n, int depth, const std::vector<index_t>& level_ranks,
                           index_t d) {
  require(int(level_ranks.size()) == depth, "zeta_applies: need one rank per level");
  std::uint64_t rank_sum = 0;
  for (index_t r : level_ranks) rank_sum += std::uint64_t(r);
  const std::uint64_t leaves = std::uint64_t(1) << depth;
  const std::uint64_t leaf_term = (std::uint64_t(n) + leaves - 1) / leaves;  // ceil
  return 2 * rank_sum + 2 * std::uint64_t(d) * std::uint64_t(depth) + leaf_term;
}

namespace {

// op - H, with H in its current (partially filled) state. Applies count
// against op, which is exactly what the reports meter.
class DeflatedOperator final : public LinearOperator {
 public:
  DeflatedOperator(const LinearOperator& op, const HodlrMatrix& h)
      : LinearOperator(op.size()), op_(op), h_(h) {}

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override {
    return op_.apply(x) - h_.apply(x);
  }
  const LinearOperator& op_;
  const HodlrMatrix& h_;
};

// Tail values at or below this relative threshold count as numerically zero
// and are always truncated away.
constexpr double kZeroTailRel = 1e-15;

struct PairState {
  index_t chosen_rank = -1;  // -1: not yet resolved (adaptive)
  bool dense_fallback = false;
  Vector sketch_sigma;
  LowRankFactor factor;
  double error_estimate = 0.0;
};

index_t min_block_dim(const HierPartition& p, int level, index_t pair) {
  return std::min(p.block(level, 2 * pair).size(), p.block(level, 2 * pair + 1).size());
}

// Rank cut: first index whose singular value is at or below the absolute
// tolerance (also drops numerically zero tails). Returns sigma.size() when
// nothing qualifies.
index_t rank_at_tolerance(const Vector& sigma, double abs_tol) {
  const double floor_tol =
      std::max(abs_tol, sigma.size() > 0 ? sigma(0) * kZeroTailRel : 0.0);
  index_t r = 0;
  while (r < sigma.size() && sigma(r) > floor_tol) ++r;
  return r;
}

// Finish one sibling pair from the accumulated two-pass samples:
// orthogonalized row samples, compressed core SVD, projection, truncation,
// and an error estimate from the sketch tail plus residual probes.
void finish_pair(const DenseMatrix& y_block, const DenseMatrix& q_y, const DenseMatrix& z_block,
                 const DenseMatrix& omega_block, double trunc_abs_tol, index_t max_rank,
                 PairState& out) {
  const index_t k = z_block.cols();
  const OrthogResult qz = orthog(z_block);
  const DenseMatrix r_z = qz.q.transpose() * z_block;  // k x k
  const SvdResult core = small_svd(r_z);
  // block ~= (q_y * core.v) * sigma * (qz.q * core.u)^T
  const DenseMatrix u_full = q_y * core.v;
  const DenseMatrix v_full = qz.q * core.u;

  index_t keep = rank_at_tolerance(core.sigma, trunc_abs_tol);
  keep = std::min(keep, max_rank);

  out.factor = LowRankFactor{u_full.leftCols(keep), core.sigma.head(keep), v_full.leftCols(keep)};
  out.sketch_sigma = core.sigma;
  out.chosen_rank = keep;

  // Sketch-tail part of the estimate.
  double est = keep < k ? core.sigma(keep) : 0.0;
  // Residual action on up to 10 of the drawn probe columns. The samples
  // y = A_b omega are already in hand, so this costs no applies.
  const index_t probes = std::min<index_t>(10, k);
  DenseMatrix t = out.factor.v.transpose() * omega_block.rightCols(probes);
  t.array().colwise() *= out.factor.sigma.array();
  const DenseMatrix rhs = out.factor.u * t;
  for (index_t c = 0; c < probes; ++c) {
    const double wn = omega_block.col(k - probes + c).norm();
    if (wn == 0.0) continue;
    est = std::max(est, (y_block.col(k - probes + c) - rhs.col(c)).norm() / wn);
  }
  out.error_estimate = est;
}

struct CompressOutcome {
  HodlrMatrix h;
  CompressionReport report;
};

CompressOutcome compress_impl(const LinearOperator& op, const HierPartition& partition,
                              const CompressionBudget& budget, RngStream rng) {
  budget.validate(partition.depth());
  require(partition.size() == op.size(), "hodlr_compress: partition size mismatch");
  const int depth = partition.depth();
  const index_t d = budget.oversampling;
  const bool adaptive = budget.mode == CompressionBudget::Mode::Adaptive;

  const std::uint64_t applies_before = op.apply_count();

  CompressionReport report;
  report.seed = rng.seed();

  double tol_abs_total = 0.0;
  if (adaptive) {
    if (budget.tolerance_is_relative) {
      report.op_norm_estimate =
          spectral_norm_estimate(op, 30, rng.substream(0xA0u));
      tol_abs_total = budget.tolerance * report.op_norm_estimate;
    } else {
      tol_abs_total = budget.tolerance;
    }
  }
  const double tol_block = adaptive ? tol_abs_total / double(depth) : 0.0;

  HodlrMatrix h(partition);
  const DeflatedOperator deflated(op, h);

  for (int level = 1; level <= depth; ++level) {
    const index_t pairs = partition.num_pairs(level);
    const index_t dim_cap = [&] {
      index_t m = 0;
      for (index_t j = 0; j < pairs; ++j) m = std::max(m, min_block_dim(partition, level, j));
      return m;
    }();

    index_t target_rank;
    if (adaptive) {
      target_rank = std::min<index_t>(8, dim_cap);
    } else {
      target_rank = std::min(budget.level_ranks[std::size_t(level - 1)], dim_cap);
    }

    DenseMatrix omega(partition.size(), 0);
    DenseMatrix y(partition.size(), 0);
    std::vector<PairState> states(static_cast<std::size_t>(pairs));
    RngStream level_rng = rng.substream(std::uint64_t(level));

    for (int round = 0;; ++round) {
      const index_t k_target = std::min(target_rank, dim_cap) + d;
      const index_t fresh = k_target - omega.cols();
      if (fresh > 0) {
        DenseMatrix omega_new = DenseMatrix::Zero(partition.size(), fresh);
        for (index_t j = 0; j < pairs; ++j) {
          const IndexRange right = partition.block(level, 2 * j + 1);
          RngStream pair_rng = level_rng.substream(std::uint64_t(j)).substream(std::uint64_t(round));
          omega_new.middleRows(right.begin, right.size()) = pair_rng.randn(right.size(), fresh);
        }
        const DenseMatrix y_new = deflated.apply(omega_new);
        omega.conservativeResize(Eigen::NoChange, k_target);
        omega.rightCols(fresh) = omega_new;
        y.conservativeResize(Eigen::NoChange, k_target);
        y.rightCols(fresh) = y_new;
      }
      const index_t k = omega.cols();

      // First-pass bases, one per pair, supported on the odd (left) blocks.
      std::vector<DenseMatrix> q_blocks(static_cast<std::size_t>(pairs));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (pairs > 1)
#endif
      for (index_t j = 0; j < pairs; ++j) {
        const IndexRange left = partition.block(level, 2 * j);
        q_blocks[std::size_t(j)] = orthog(y.middleRows(left.begin, left.size())).q;
      }

      DenseMatrix q_y = DenseMatrix::Zero(partition.size(), k);
      for (index_t j = 0; j < pairs; ++j) {
        const IndexRange left = partition.block(level, 2 * j);
        q_y.middleRows(left.begin, left.size()) = q_blocks[std::size_t(j)];
      }

      const DenseMatrix z = deflated.apply(q_y);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (pairs > 1)
#endif
      for (index_t j = 0; j < pairs; ++j) {
        const IndexRange left = partition.block(level, 2 * j);
        const IndexRange right = partition.block(level, 2 * j + 1);
        PairState& st = states[std::size_t(j)];
        const index_t block_dim = min_block_dim(partition, level, j);
        // Adaptive ranks may not eat into the d validation columns.
        const index_t max_rank = adaptive ? std::min(block_dim, k - d) : target_rank;
        finish_pair(y.middleRows(left.begin, left.size()), q_blocks[std::size_t(j)],
                    z.middleRows(right.begin, right.size()),
                    omega.middleRows(right.begin, right.size()), tol_block, max_rank, st);
        st.dense_fallback = st.chosen_rank >= block_dim;
      }

      if (!adaptive) break;

      bool all_resolved = true;
      for (index_t j = 0; j < pairs; ++j) {
        const PairState& st = states[std::size_t(j)];
        const index_t block_dim = min_block_dim(partition, level, j);
        const bool exact = k - d >= block_dim;
        if (!(st.error_estimate <= tol_block || exact)) {
          all_resolved = false;
          break;
        }
      }
      if (all_resolved || target_rank >= dim_cap) break;
      target_rank = std::min(target_rank * 2, dim_cap);
    }

    index_t level_rank = 0;
    for (index_t j = 0; j < pairs; ++j) {
      PairState& st = states[std::size_t(j)];
      level_rank = std::max(level_rank, st.chosen_rank);
      BlockReport br;
      br.level = level;
      br.pair = j;
      br.rank = st.chosen_rank;
      br.sketch_sigma = st.sketch_sigma;
      br.error_estimate = st.error_estimate;
      br.dense_fallback = st.dense_fallback;
      report.blocks.push_back(std::move(br));
      h.set_factor(level, j, std::move(st.factor));
    }
    report.level_ranks.push_back(level_rank);
  }

  // Leaf diagonal extraction: one structured identity probe per leaf-local
  // column index, hitting every leaf simultaneously.
  {
    const index_t m = partition.max_leaf_size();
    DenseMatrix probes = DenseMatrix::Zero(partition.size(), m);
    for (index_t j = 0; j < partition.num_leaves(); ++j) {
      const IndexRange r = partition.leaf(j);
      for (index_t c = 0; c < r.size(); ++c) probes(r.begin + c, c) = 1.0;
    }
    const DenseMatrix y = deflated.apply(probes);
    for (index_t j = 0; j < partition.num_leaves(); ++j) {
      const IndexRange r = partition.leaf(j);
      const DenseMatrix d_j = y.block(r.begin, 0, r.size(), r.size());
      h.set_leaf(j, 0.5 * (d_j + d_j.transpose()));
    }
  }

  double max_block_err = 0.0;
  for (const auto& b : report.blocks) max_block_err = std::max(max_block_err, b.error_estimate);
  report.block_error_bound_abs = double(depth) * max_block_err;
  if (report.op_norm_estimate > 0.0)
    report.error_estimate_rel = report.block_error_bound_abs / report.op_norm_estimate;

  report.applies_used = op.apply_count() - applies_before;
  return CompressOutcome{std::move(h), std::move(report)};
}

}  // namespace

std::pair<LowRankFactor, CompressionReport> randomized_svd(const LinearOperator& op, index_t r,
                                                           index_t d, RngStream rng) {
  require(r >= 0 && d >= 1, "randomized_svd: need r >= 0 and d >= 1");
  require(r + d <= op.size(), "randomized_svd: r + d must not exceed the operator size");
  const std::uint64_t applies_before = op.apply_count();
  const index_t k = r + d;

  const DenseMatrix omega = rng.randn(op.size(), k);
  const DenseMatrix y = op.apply(omega);
  const OrthogResult q_y = orthog(y);
  const DenseMatrix z = op.apply(q_y.q);  // symmetric operator: A^T Q = A Q
  const OrthogResult q_z = orthog(z);
  const DenseMatrix r_z = q_z.q.transpose() * z;
  const SvdResult core = small_svd(r_z);

  const index_t keep = std::min(r, rank_at_tolerance(core.sigma, 0.0));
  LowRankFactor f{q_y.q * core.v.leftCols(keep), core.sigma.head(keep),
                  q_z.q * core.u.leftCols(keep)};

  CompressionReport report;
  report.seed = rng.seed();
  report.level_ranks = {keep};
  BlockReport br;
  br.level = 0;
  br.pair = 0;
  br.rank = keep;
  br.sketch_sigma = core.sigma;
  br.error_estimate = keep < k ? core.sigma(keep) : 0.0;
  report.blocks.push_back(std::move(br));
  report.applies_used = op.apply_count() - applies_before;
  return {std::move(f), std::move(report)};
}

std::pair<HodlrMatrix, CompressionReport> hodlr_compress(const LinearOperator& op,
                                                         const HierPartition& partition,
                                                         const CompressionBudget& budget,
                                                         RngStream rng) {
  CompressOutcome out = compress_impl(op, partition, budget, rng);
  return {std::move(out.h), std::move(out.report)};
}

std::pair<HodlrMatrix, CompressionReport> hodlr_compress_adaptive(const LinearOperator& op,
                                                                  const HierPartition& partition,
                                                                  double eps_rel, index_t d,
                                                                  RngStream rng) {
  return hodlr_compress(op, partition, CompressionBudget::adaptive(eps_rel, true, d), rng);
}

ErrorEstimate hodlr_error_estimate(const LinearOperator& op, const HodlrMatrix& h, int probes,
                                   RngStream rng) {
  require(probes >= 2, "hodlr_error_estimate: need at least 2 probes");
  const DeflatedOperator diff(op, h);
  const double num = spectral_norm_estimate(diff, probes, rng.substream(1));
  const double den = spectral_norm_estimate(op, probes, rng.substream(2));
  ErrorEstimate est;
  est.iterations = probes;
  est.estimate = den > 0.0 ? num / den : 0.0;
  return est;
}

namespace {

struct RankLookup {
  bool reachable = false;
  index_t rank = 0;
};

RankLookup rank_for_tolerance(const Vector& sigma, double abs_tol) {
  for (index_t i = 0; i < sigma.size(); ++i) {
    if (sigma(i) <= abs_tol) return RankLookup{true, i};
  }
  if (sigma.size() == 0) return RankLookup{true, 0};
  return RankLookup{false, sigma.size()};
}

}  // namespace

std::vector<CostCurvePoint> estimate_costs(const Vector& global_sigma,
                                           const std::vector<Vector>& level_sigma, index_t n,
                                           int depth, index_t d,
                                           const std::vector<double>& error_grid,
                                           double sigma_ref) {
  require(int(level_sigma.size()) == depth, "estimate_costs: need one spectrum per level");
  auto check_sorted = [](const Vector& s) {
    for (index_t i = 1; i < s.size(); ++i)
      require(s(i) <= s(i - 1) * (1.0 + 1e-12) + 1e-300, "estimate_costs: spectra must be non-increasing");
  };
  check_sorted(global_sigma);
  for (const auto& s : level_sigma) check_sorted(s);

  const double ref = sigma_ref > 0.0 ? sigma_ref : (global_sigma.size() ? global_sigma(0) : 0.0);
  require(ref > 0.0, "estimate_costs: reference singular value must be positive");

  std::vector<CostCurvePoint> curve;
  curve.reserve(error_grid.size());
  for (double e : error_grid) {
    require(e > 0.0, "estimate_costs: error targets must be positive");
    CostCurvePoint pt;
    pt.target_error = e;

    const RankLookup lr = rank_for_tolerance(global_sigma, e * ref);
    pt.lr_reachable = lr.reachable;
    pt.lr_rank = lr.rank;
    pt.lr_applies = std::uint64_t(lr.rank + d);

    pt.hodlr_reachable = true;
    for (int l = 0; l < depth; ++l) {
      const RankLookup rl = rank_for_tolerance(level_sigma[std::size_t(l)], e * ref / double(depth));
      pt.hodlr_reachable = pt.hodlr_reachable && rl.reachable;
      pt.hodlr_ranks.push_back(rl.rank);
    }
    pt.hodlr_applies = zeta_applies(n, depth, pt.hodlr_ranks, d);
    curve.push_back(std::move(pt));
  }
  return curve;
}

std::string CompressionReport::to_json() const {
  json j;
  j["applies_used"] = applies_used;
  j["level_ranks"] = level_ranks;
  j["op_norm_estimate"] = op_norm_estimate;
  j["block_error_bound_abs"] = block_error_bound_abs;
  j["error_estimate_rel"] = error_estimate_rel;
  j["seed"] = seed;
  json blocks_json = json::array();
  for (const auto& b : blocks) {
    json bj;
    bj["level"] = b.level;
    bj["pair"] = b.pair;
    bj["rank"] = b.rank;
    bj["error_estimate"] = b.error_estimate;
    bj["dense_fallback"] = b.dense_fallback;
    blocks_json.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks_json);
  return j.dump(2);
}

void CompressionReport::write_spectra_csv(const std::string& path,
                                          const std::string& provenance) const {
  std::ofstream out(path);
  require(out.good(), "write_spectra_csv: cannot open " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "level,block,index,sigma\n";
  char buf[64];
  for (const auto& b : blocks) {
    for (index_t i = 0; i < b.sketch_sigma.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", b.sketch_sigma(i));
      out << b.level << "," << b.pair << "," << (i + 1) << "," << buf << "\n";
    }
  }
}

}  // namespace hodlr
