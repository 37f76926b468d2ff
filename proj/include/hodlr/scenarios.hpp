#pragma once

// Scripted benchmark scenarios behind the CLI verbs. Every runner is
// deterministic given (config, seed): numeric outputs are byte-identical
// across re-runs on one platform, and every CSV carries a provenance line
// with the config hash and seed. Bench CSVs report modeled apply counts
// (from exact dense spectra, single-pass accounting for LR) next to
// measured operator-counter deltas; the directional assertions evaluate
// the modeled columns.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hodlr/common.hpp"
#include "hodlr/compression.hpp"
#include "hodlr/toy_problem.hpp"

namespace hodlr {

struct ScenarioConfig {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string out_dir = ".";

  static ScenarioConfig from_file(const std::string& path);

  // FNV-1a over the canonical JSON dump plus the seed.
  std::string hash() const;
  std::string provenance() const;  // "config_hash=... seed=..."
};

struct BenchAssertion {
  std::string description;
  bool passed = false;
};

struct ScenarioResult {
  std::vector<std::string> files;
  std::vector<BenchAssertion> assertions;

  bool all_passed() const {
    for (const auto& a : assertions)
      if (!a.passed) return false;
    return true;
  }
};

ScenarioResult run_compress(const ScenarioConfig& cfg);
ScenarioResult run_bench_aspect(const ScenarioConfig& cfg);
ScenarioResult run_bench_dims(const ScenarioConfig& cfg);
ScenarioResult run_bench_order(const ScenarioConfig& cfg);
ScenarioResult run_sample(const ScenarioConfig& cfg);
ScenarioResult run_estimate(const ScenarioConfig& cfg);
ScenarioResult run_solve_map(const ScenarioConfig& cfg);

// Dense realization of a symmetric operator (oracle-scale sizes only).
DenseMatrix densify_operator(const LinearOperator& op);

// Global spectrum (descending |eigenvalue|) and per-level upper envelopes
// of the off-diagonal block singular values, the inputs to estimate_costs.
struct DenseSpectra {
  Vector global;
  std::vector<Vector> levels;
};
DenseSpectra dense_spectra(const DenseMatrix& a, const HierPartition& partition);

// The 2D analog of the toy misfit Hessian used by the ordering study:
// a five-point periodic smoother on an nx x ny grid, observed on a uniform
// subgrid. Dense-backed, desk scale.
struct Toy2d {
  PointCloud points;   // grid coordinates, row-major raster order
  DenseMatrix hessian; // S^T B^T Gamma^{-1} B S in raster order
};
Toy2d make_toy_2d(index_t nx, index_t ny, double width, double smoothing_length,
                  index_t obs_stride, double noise_std_abs);

}  // namespace hodlr
