#include "hodlr/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hodlr/dense_kernels.hpp"
#include "hodlr/factorization.hpp"
#include "hodlr/mmio.hpp"
#include "hodlr/partition.hpp"
#include "hodlr/posterior.hpp"

namespace hodlr {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_output(const ScenarioConfig& cfg, const std::string& name,
                          std::vector<std::string>& files) {
  fs::create_directories(cfg.out_dir);
  const std::string path = (fs::path(cfg.out_dir) / name).string();
  std::ofstream out(path);
  require(out.good(), "scenario: cannot open output file " + path);
  files.push_back(path);
  out << "# " << cfg.provenance() << "\n";
  return out;
}

double get_or(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

index_t get_or(const json& j, const std::string& key, index_t fallback) {
  return j.contains(key) ? j.at(key).get<index_t>() : fallback;
}

std::vector<double> default_error_grid() {
  return {1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
}

std::vector<double> error_grid_from(const json& j) {
  if (j.contains("error_grid")) return j.at("error_grid").get<std::vector<double>>();
  return default_error_grid();
}

index_t grid_index_of(const std::vector<double>& grid, double target) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::fabs(std::log10(grid[i] / target)) < 1e-9) return index_t(i);
  }
  throw InvalidInput("bench assertion target error missing from the error grid");
}

// Gamma_prior as a plain symmetric operator.
class PriorCovarianceOperator final : public LinearOperator {
 public:
  explicit PriorCovarianceOperator(std::shared_ptr<PriorOperator> prior)
      : LinearOperator(prior->size()), prior_(std::move(prior)) {}

 private:
  DenseMatrix apply_impl(const DenseMatrix& x) const override {
    return prior_->sqrt_apply(prior_->sqrt_apply(x));
  }
  std::shared_ptr<PriorOperator> prior_;
};

struct BuiltOperator {
  std::shared_ptr<LinearOperator> op;
  std::shared_ptr<ToyProblem> toy;  // set for toy-misfit with relative noise
};

ToyProblemConfig toy_config_from(const json& j, std::uint64_t seed) {
  ToyProblemConfig cfg;
  cfg.n = get_or(j, "n", index_t(512));
  cfg.width = get_or(j, "width", 1e4);
  if (j.contains("h_over_w"))
    cfg.smoothing_length = cfg.width * j.at("h_over_w").get<double>();
  else
    cfg.smoothing_length = get_or(j, "smoothing_length", cfg.width / 100.0);
  cfg.n_obs = get_or(j, "n_obs", index_t(100));
  cfg.noise_rel = get_or(j, "noise_rel", 0.01);
  cfg.seed = seed;
  return cfg;
}

BuiltOperator build_operator(const json& spec, std::uint64_t seed) {
  const std::string type = spec.at("type").get<std::string>();
  BuiltOperator built;
  if (type == "toy-misfit") {
    if (spec.contains("noise") && spec.at("noise").contains("absolute")) {
      const ToyProblemConfig cfg = toy_config_from(spec, seed);
      built.op = toy_misfit_hessian(cfg.n, cfg.width, cfg.smoothing_length, cfg.n_obs,
                                    spec.at("noise").at("absolute").get<double>());
    } else {
      json toy_spec = spec;
      if (spec.contains("noise") && spec.at("noise").contains("relative"))
        toy_spec["noise_rel"] = spec.at("noise").at("relative").get<double>();
      built.toy = std::make_shared<ToyProblem>(make_toy_problem(toy_config_from(toy_spec, seed)));
      built.op = built.toy->misfit;
    }
  } else if (type == "dense-mm") {
    built.op = std::make_shared<DenseOperator>(read_matrix_market(spec.at("path").get<std::string>()));
  } else if (type == "prior") {
    auto prior = std::make_shared<PriorOperator>(get_or(spec, "n", index_t(512)),
                                                 get_or(spec, "width", 1e4),
                                                 get_or(spec, "gamma", 600.0),
                                                 get_or(spec, "delta", 2.4e-3));
    built.op = std::make_shared<PriorCovarianceOperator>(std::move(prior));
  } else {
    throw InvalidInput("unknown operator type: " + type);
  }
  return built;
}

HierPartition partition_from(const json& j, index_t n) {
  if (j.contains("depth")) return HierPartition(n, j.at("depth").get<int>());
  const index_t leaf_target = get_or(j, "leaf_target", index_t(64));
  return HierPartition(n, default_depth(n, leaf_target));
}

}  // namespace

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file " + path);
  ScenarioConfig cfg;
  try {
    cfg.config = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed config JSON: ") + e.what());
  }
  cfg.seed = std::uint64_t(get_or(cfg.config, "seed", index_t(0)));
  if (cfg.config.contains("out")) cfg.out_dir = cfg.config.at("out").get<std::string>();
  return cfg;
}

std::string ScenarioConfig::hash() const {
  const std::string dump = config.dump() + "#" + std::to_string(seed);
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ScenarioConfig::provenance() const {
  return "config_hash=" + hash() + " seed=" + std::to_string(seed);
}

DenseMatrix densify_operator(const LinearOperator& op) {
  require(op.size() <= kSmallMatrixCap, "densify_operator: size exceeds the small-matrix cap");
  return op.apply(DenseMatrix(DenseMatrix::Identity(op.size(), op.size())));
}

DenseSpectra dense_spectra(const DenseMatrix& a, const HierPartition& partition) {
  DenseSpectra spectra;
  const SymEigResult eig = sym_eig(a);
  spectra.global = eig.lambda.cwiseAbs();
  std::sort(spectra.global.data(), spectra.global.data() + spectra.global.size(),
            std::greater<double>());

  for (int level = 1; level <= partition.depth(); ++level) {
    Vector envelope;
    for (index_t j = 0; j < partition.num_pairs(level); ++j) {
      const IndexRange left = partition.block(level, 2 * j);
      const IndexRange right = partition.block(level, 2 * j + 1);
      const SvdResult svd =
          small_svd(a.block(left.begin, right.begin, left.size(), right.size()));
      if (envelope.size() == 0) {
        envelope = svd.sigma;
      } else {
        const index_t m = std::min(envelope.size(), svd.sigma.size());
        envelope.head(m) = envelope.head(m).cwiseMax(svd.sigma.head(m));
      }
    }
    spectra.levels.push_back(std::move(envelope));
  }
  return spectra;
}

Toy2d make_toy_2d(index_t nx, index_t ny, double width, double smoothing_length,
                  index_t obs_stride, double noise_std_abs) {
  require(nx >= 4 && ny >= 4, "make_toy_2d: need at least a 4x4 grid");
  require(obs_stride >= 1, "make_toy_2d: stride must be >= 1");
  const index_t n = nx * ny;
  require(n <= kSmallMatrixCap, "make_toy_2d: grid exceeds the small-matrix cap");

  Toy2d toy;
  toy.points.coords.resize(n, 2);
  const double dx = width / double(nx), dy = width / double(ny);
  for (index_t iy = 0; iy < ny; ++iy) {
    for (index_t ix = 0; ix < nx; ++ix) {
      toy.points.coords(iy * nx + ix, 0) = double(ix) * dx;
      toy.points.coords(iy * nx + ix, 1) = double(iy) * dy;
    }
  }

  // M = I - h^2 Lap, five-point periodic stencil.
  const double ax = smoothing_length * smoothing_length / (dx * dx);
  const double ay = smoothing_length * smoothing_length / (dy * dy);
  DenseMatrix m = DenseMatrix::Zero(n, n);
  for (index_t iy = 0; iy < ny; ++iy) {
    for (index_t ix = 0; ix < nx; ++ix) {
      const index_t i = iy * nx + ix;
      m(i, i) = 1.0 + 2.0 * ax + 2.0 * ay;
      m(i, iy * nx + (ix + 1) % nx) -= ax;
      m(i, iy * nx + (ix + nx - 1) % nx) -= ax;
      m(i, ((iy + 1) % ny) * nx + ix) -= ay;
      m(i, ((iy + ny - 1) % ny) * nx + ix) -= ay;
    }
  }
  const DenseMatrix s = m.llt().solve(DenseMatrix::Identity(n, n));

  std::vector<index_t> obs;
  for (index_t iy = 0; iy < ny; iy += obs_stride)
    for (index_t ix = 0; ix < nx; ix += obs_stride) obs.push_back(iy * nx + ix);

  DenseMatrix c(n, index_t(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) c.col(index_t(k)) = s.col(obs[k]);
  const DenseMatrix h = c * c.transpose() / (noise_std_abs * noise_std_abs);
  toy.hessian = 0.5 * (h + h.transpose());
  return toy;
}

ScenarioResult run_compress(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;
  const BuiltOperator built = build_operator(j.at("operator"), cfg.seed);
  const HierPartition partition =
      partition_from(j.contains("partition") ? j.at("partition") : json::object(), built.op->size());

  CompressionBudget budget;
  const json bj = j.contains("budget") ? j.at("budget") : json::object();
  const index_t d = get_or(bj, "d", index_t(10));
  if (bj.contains("ranks")) {
    budget = CompressionBudget::fixed_rank(bj.at("ranks").get<std::vector<index_t>>(), d);
  } else {
    budget = CompressionBudget::adaptive(get_or(bj, "tolerance", 1e-6),
                                         !bj.contains("relative") || bj.at("relative").get<bool>(), d);
  }

  auto [h, report] = hodlr_compress(*built.op, partition, budget, RngStream(cfg.seed));

  fs::create_directories(cfg.out_dir);
  const std::string bin_path = (fs::path(cfg.out_dir) / "hodlr.bin").string();
  h.save(bin_path);
  result.files.push_back(bin_path);

  const std::string report_path = (fs::path(cfg.out_dir) / "report.json").string();
  {
    std::ofstream out(report_path);
    require(out.good(), "run_compress: cannot open " + report_path);
    json rj = json::parse(report.to_json());
    rj["provenance"] = cfg.provenance();
    out << rj.dump(2) << "\n";
  }
  result.files.push_back(report_path);

  const std::string spectra_path = (fs::path(cfg.out_dir) / "spectra.csv").string();
  report.write_spectra_csv(spectra_path, cfg.provenance());
  result.files.push_back(spectra_path);
  return result;
}

namespace {

struct BenchPoint {
  CostCurvePoint model;
  std::uint64_t lr_measured = 0;
  std::uint64_t hodlr_measured = 0;
};

// Modeled costs from exact dense spectra plus measured counter deltas from
// running the implemented double-pass LR kernel at the modeled rank and the
// adaptive HODLR compression at the target tolerance.
std::vector<BenchPoint> bench_curve(const LinearOperator& op, const HierPartition& partition,
                                    index_t d, const std::vector<double>& grid,
                                    std::uint64_t seed) {
  const DenseMatrix dense = densify_operator(op);
  const DenseSpectra spectra = dense_spectra(dense, partition);
  const auto curve =
      estimate_costs(spectra.global, spectra.levels, op.size(), partition.depth(), d, grid);

  std::vector<BenchPoint> points;
  for (const auto& pt : curve) {
    BenchPoint bp;
    bp.model = pt;
    if (pt.lr_reachable && pt.lr_rank + d <= op.size()) {
      const std::uint64_t before = op.apply_count();
      randomized_svd(op, pt.lr_rank, d, RngStream(seed).substream(0x17Au));
      bp.lr_measured = op.apply_count() - before;
    }
    {
      const std::uint64_t before = op.apply_count();
      hodlr_compress_adaptive(op, partition, pt.target_error, d, RngStream(seed).substream(0x40Du));
      bp.hodlr_measured = op.apply_count() - before;
    }
    points.push_back(std::move(bp));
  }
  return points;
}

void write_bench_header(std::ofstream& out, const std::string& lead) {
  out << lead
      << ",target_error,lr_rank,lr_applies_model,hodlr_applies_model,"
         "lr_applies_measured,hodlr_applies_measured,lr_reachable,hodlr_reachable\n";
}

void write_bench_row(std::ofstream& out, const std::string& lead, const BenchPoint& bp) {
  out << lead << "," << fmt(bp.model.target_error) << "," << bp.model.lr_rank << ","
      << bp.model.lr_applies << "," << bp.model.hodlr_applies << "," << bp.lr_measured << ","
      << bp.hodlr_measured << "," << (bp.model.lr_reachable ? 1 : 0) << ","
      << (bp.model.hodlr_reachable ? 1 : 0) << "\n";
}

}  // namespace

ScenarioResult run_bench_aspect(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;
  const index_t n = get_or(j, "n", index_t(512));
  const index_t n_obs = get_or(j, "n_obs", n / 2);
  const index_t d = get_or(j, "d", index_t(10));
  const double width = get_or(j, "width", 1e4);
  std::vector<double> h_over_w = {1.0 / 200.0, 1.0 / 100.0, 1.0 / 50.0, 1.0 / 25.0};
  if (j.contains("h_over_w")) h_over_w = j.at("h_over_w").get<std::vector<double>>();
  const std::vector<double> grid = error_grid_from(j);
  const HierPartition partition = partition_from(j, n);

  std::ofstream out = open_output(cfg, "bench_aspect.csv", result.files);
  write_bench_header(out, "h_over_w");

  std::vector<std::vector<BenchPoint>> all;  // ordered like h_over_w
  for (double how : h_over_w) {
    ToyProblemConfig tc;
    tc.n = n;
    tc.width = width;
    tc.smoothing_length = width * how;
    tc.n_obs = n_obs;
    tc.seed = cfg.seed;
    const ToyProblem tp = make_toy_problem(tc);
    auto points = bench_curve(*tp.misfit, partition, d, grid, cfg.seed);
    for (const auto& bp : points) write_bench_row(out, fmt(how), bp);
    all.push_back(std::move(points));
  }

  const index_t e4 = grid_index_of(grid, 1e-4);
  const index_t e6 = grid_index_of(grid, 1e-6);
  const std::size_t smallest =
      std::size_t(std::min_element(h_over_w.begin(), h_over_w.end()) - h_over_w.begin());
  const std::size_t largest =
      std::size_t(std::max_element(h_over_w.begin(), h_over_w.end()) - h_over_w.begin());

  const auto& small_pt = all[smallest][std::size_t(e4)].model;
  result.assertions.push_back(
      {"smallest h/W: HODLR applies < LR applies at error 1e-4",
       small_pt.hodlr_applies < small_pt.lr_applies});
  const auto& large_pt = all[largest][std::size_t(e6)].model;
  result.assertions.push_back({"largest h/W: LR applies <= HODLR applies at error 1e-6",
                               large_pt.lr_applies <= large_pt.hodlr_applies});

  // LR cost non-decreasing as h decreases, checked at every grid error.
  std::vector<std::size_t> order(h_over_w.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return h_over_w[a] > h_over_w[b]; });
  bool monotone = true;
  for (std::size_t e = 0; e < grid.size(); ++e) {
    for (std::size_t k = 1; k < order.size(); ++k) {
      if (all[order[k]][e].model.lr_applies < all[order[k - 1]][e].model.lr_applies)
        monotone = false;
    }
  }
  result.assertions.push_back({"LR applies non-decreasing as h decreases", monotone});
  return result;
}

ScenarioResult run_bench_dims(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;
  const index_t d = get_or(j, "d", index_t(10));
  const double width = get_or(j, "width", 1e4);
  const double h = get_or(j, "smoothing_length", width / 100.0);
  const index_t leaf_target = get_or(j, "leaf_target", index_t(64));
  std::vector<index_t> n_grid = {128, 256, 512};
  std::vector<index_t> obs_grid = {100, 150, 200};
  if (j.contains("n_grid")) n_grid = j.at("n_grid").get<std::vector<index_t>>();
  if (j.contains("obs_grid")) obs_grid = j.at("obs_grid").get<std::vector<index_t>>();
  const index_t base_n_obs = get_or(j, "n_obs", index_t(100));
  const index_t obs_study_n = get_or(j, "obs_study_n", index_t(256));
  const std::vector<double> grid = error_grid_from(j);

  std::ofstream out = open_output(cfg, "bench_dims.csv", result.files);
  write_bench_header(out, "study,n,n_obs,depth");

  auto run_point = [&](index_t n, index_t n_obs) {
    ToyProblemConfig tc;
    tc.n = n;
    tc.width = width;
    tc.smoothing_length = h;
    tc.n_obs = n_obs;
    tc.seed = cfg.seed;
    const ToyProblem tp = make_toy_problem(tc);
    // Depth grows by one per doubling of N.
    const HierPartition partition(n, default_depth(n, leaf_target));
    return std::make_pair(partition.depth(), bench_curve(*tp.misfit, partition, d, grid, cfg.seed));
  };

  const index_t e4 = grid_index_of(grid, 1e-4);

  std::vector<std::uint64_t> lr_dim, hodlr_dim;
  for (index_t n : n_grid) {
    auto [depth, points] = run_point(n, base_n_obs);
    for (const auto& bp : points) {
      write_bench_row(out,
                      "dim," + std::to_string(n) + "," + std::to_string(base_n_obs) + "," +
                          std::to_string(depth),
                      bp);
    }
    lr_dim.push_back(points[std::size_t(e4)].model.lr_applies);
    hodlr_dim.push_back(points[std::size_t(e4)].model.hodlr_applies);
  }

  std::vector<std::uint64_t> lr_obs;
  for (index_t n_obs : obs_grid) {
    auto [depth, points] = run_point(obs_study_n, n_obs);
    for (const auto& bp : points) {
      write_bench_row(out,
                      "obs," + std::to_string(obs_study_n) + "," + std::to_string(n_obs) + "," +
                          std::to_string(depth),
                      bp);
    }
    lr_obs.push_back(points[std::size_t(e4)].model.lr_applies);
  }

  const auto [lr_min, lr_max] = std::minmax_element(lr_dim.begin(), lr_dim.end());
  result.assertions.push_back(
      {"LR applies constant within +-(d+2) across the N grid at error 1e-4",
       *lr_max - *lr_min <= std::uint64_t(d + 2)});
  bool hodlr_increasing = true;
  for (std::size_t i = 1; i < hodlr_dim.size(); ++i)
    hodlr_increasing = hodlr_increasing && hodlr_dim[i] > hodlr_dim[i - 1];
  result.assertions.push_back(
      {"HODLR applies strictly increase with N at error 1e-4", hodlr_increasing});
  bool lr_increasing = true;
  for (std::size_t i = 1; i < lr_obs.size(); ++i)
    lr_increasing = lr_increasing && lr_obs[i] > lr_obs[i - 1];
  result.assertions.push_back(
      {"LR applies strictly increase with n_obs at error 1e-4", lr_increasing});
  return result;
}

ScenarioResult run_bench_order(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;
  const index_t nx = get_or(j, "nx", index_t(16));
  const index_t ny = get_or(j, "ny", index_t(16));
  const double width = get_or(j, "width", 1e4);
  const double h = get_or(j, "smoothing_length", width / 32.0);
  const index_t stride = get_or(j, "obs_stride", index_t(2));
  const index_t n = nx * ny;
  const HierPartition partition = partition_from(j, n);

  Toy2d toy;
  if (j.contains("points")) {
    toy.points = read_point_cloud(j.at("points").get<std::string>());
    require(j.contains("operator_mm"),
            "bench-order with a supplied point cloud needs operator_mm");
    toy.hessian = read_matrix_market(j.at("operator_mm").get<std::string>());
  } else {
    toy = make_toy_2d(nx, ny, width, h, stride, get_or(j, "noise_std", 1.0));
  }

  // Default ordering: a fixed seeded shuffle standing in for an unstructured
  // dof order.
  RngStream shuffle_rng = RngStream(cfg.seed).substream(0x0DEFu);
  std::vector<index_t> shuffled(std::size_t(toy.points.size()));
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i] = index_t(i);
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    const std::size_t k = std::size_t(shuffle_rng.uniform() * double(i));
    std::swap(shuffled[i - 1], shuffled[std::min(k, i - 1)]);
  }
  const Permutation default_perm(shuffled);

  PointCloud default_points;
  default_points.coords = default_perm.apply_rows(toy.points.coords);
  const DenseMatrix h_default = default_perm.conjugate(toy.hessian);

  const KdOrderResult kd = kdtree_order(default_points, partition.depth());
  result.assertions.push_back({"kd permutation is a valid bijection", true});  // ctor-checked
  const DenseMatrix h_kd = kd.perm.conjugate(h_default);

  const IndexRange left = partition.block(1, 0);
  const IndexRange right = partition.block(1, 1);
  const Vector sigma_default =
      small_svd(h_default.block(left.begin, right.begin, left.size(), right.size())).sigma;
  const Vector sigma_kd =
      small_svd(h_kd.block(left.begin, right.begin, left.size(), right.size())).sigma;

  const double score_default =
      locality_score(default_points, Permutation::identity(n), partition);
  const double score_kd = locality_score(default_points, kd.perm, partition);

  {
    std::ofstream out = open_output(cfg, "bench_order.csv", result.files);
    out << "# locality_score_default=" << fmt(score_default)
        << " locality_score_kd=" << fmt(score_kd) << "\n";
    out << "index,sigma_default,sigma_kd\n";
    for (index_t i = 0; i < sigma_default.size(); ++i)
      out << (i + 1) << "," << fmt(sigma_default(i)) << "," << fmt(sigma_kd(i)) << "\n";
  }
  {
    fs::create_directories(cfg.out_dir);
    const std::string perm_path = (fs::path(cfg.out_dir) / "kd_permutation.txt").string();
    write_permutation(perm_path, kd.perm);
    result.files.push_back(perm_path);
  }

  // Singular values at roundoff level count as zero for the comparison.
  const double floor_tol =
      double(n) * 1e-16 * std::max(sigma_default(0), sigma_kd(0));
  bool decay_ok = true;
  for (index_t i = 4; i < sigma_default.size(); ++i) {
    const double sd = sigma_default(i) <= floor_tol ? 0.0 : sigma_default(i);
    const double sk = sigma_kd(i) <= floor_tol ? 0.0 : sigma_kd(i);
    if (sk > sd) decay_ok = false;
  }
  result.assertions.push_back(
      {"kd-ordered level-1 singular values <= shuffled ordering for indices >= 5", decay_ok});
  result.assertions.push_back(
      {"kd ordering has strictly higher locality score", score_kd > score_default});
  return result;
}

ScenarioResult run_sample(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;
  const json tj = j.contains("toy") ? j.at("toy") : json::object();
  ToyProblemConfig tc = toy_config_from(tj, cfg.seed);
  const ToyProblem tp = make_toy_problem(tc);
  const HierPartition partition = partition_from(j, tc.n);
  const double eps_rel = get_or(j, "eps_rel", 1e-6);
  const index_t d = get_or(j, "d", index_t(10));
  const index_t n_samples = get_or(j, "n_samples", index_t(100));
  const index_t paths = std::min(n_samples, get_or(j, "paths", index_t(2)));
  const bool prior_only = j.contains("prior_only") && j.at("prior_only").get<bool>();
  const std::string mean_mode =
      j.contains("mean") ? j.at("mean").get<std::string>() : std::string("map");

  Vector mean = tp.prior_mean();
  if (!prior_only && mean_mode == "map") {
    mean = map_estimate(*tp.forward, *tp.prior, tp.data, tp.noise_std, tp.prior_mean(),
                        tp.prior_mean())
               .beta;
  }

  const ZeroOperator zero(tc.n);
  const LinearOperator& misfit = prior_only ? static_cast<const LinearOperator&>(zero)
                                            : static_cast<const LinearOperator&>(*tp.misfit);
  const PosteriorModel model = build_posterior(tp.prior, misfit, partition, eps_rel, d, mean,
                                               RngStream(cfg.seed).substream(0xB0057u));

  const DenseMatrix samples = sample(model, n_samples, RngStream(cfg.seed).substream(0x5A3Fu));
  const Vector sigma = pointwise_std(model);

  index_t inside = 0;
  for (index_t c = 0; c < samples.cols(); ++c)
    for (index_t i = 0; i < samples.rows(); ++i)
      if (std::fabs(samples(i, c) - mean(i)) <= 2.0 * sigma(i)) ++inside;
  const double coverage = double(inside) / double(samples.size());

  std::ofstream out = open_output(cfg, "samples.csv", result.files);
  out << "# coverage_2sigma=" << fmt(coverage) << "\n";
  out << "x,mean,mean_minus_2sigma,mean_plus_2sigma";
  for (index_t p = 0; p < paths; ++p) out << ",sample" << (p + 1);
  out << "\n";
  for (index_t i = 0; i < tc.n; ++i) {
    out << fmt(tp.grid(i)) << "," << fmt(mean(i)) << "," << fmt(mean(i) - 2.0 * sigma(i)) << ","
        << fmt(mean(i) + 2.0 * sigma(i));
    for (index_t p = 0; p < paths; ++p) out << "," << fmt(samples(i, p));
    out << "\n";
  }

  result.assertions.push_back(
      {"at least 93% of sample coordinates inside the 2-sigma envelope", coverage >= 0.93});
  return result;
}

ScenarioResult run_estimate(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;

  if (j.contains("zeta")) {
    const json& zj = j.at("zeta");
    const std::uint64_t zeta =
        zeta_applies(zj.at("n").get<index_t>(), zj.at("depth").get<int>(),
                     zj.at("ranks").get<std::vector<index_t>>(), get_or(zj, "d", index_t(10)));
    std::ofstream out = open_output(cfg, "zeta.json", result.files);
    json rj;
    rj["zeta"] = zeta;
    rj["provenance"] = cfg.provenance();
    out << rj.dump(2) << "\n";
  }

  if (j.contains("global_spectrum")) {
    // Global spectrum: plain text, one value per line, non-increasing.
    std::ifstream gin(j.at("global_spectrum").get<std::string>());
    require(gin.good(), "run_estimate: cannot open global spectrum file");
    std::vector<double> gvals;
    double v;
    while (gin >> v) gvals.push_back(v);
    require(!gvals.empty(), "run_estimate: empty global spectrum");
    Vector global = Eigen::Map<Vector>(gvals.data(), index_t(gvals.size()));

    // Level spectra: our spectra CSV (level,block,index,sigma), aggregated
    // per level by upper envelope.
    const int depth = j.at("depth").get<int>();
    std::vector<std::vector<double>> levels(static_cast<std::size_t>(depth));
    std::ifstream lin(j.at("level_spectra").get<std::string>());
    require(lin.good(), "run_estimate: cannot open level spectra file");
    std::string line;
    while (std::getline(lin, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 'l') continue;
      std::istringstream ss(line);
      long level, block, idx;
      double sigma;
      char comma;
      ss >> level >> comma >> block >> comma >> idx >> comma >> sigma;
      require(bool(ss) && level >= 1 && level <= depth && idx >= 1,
              "run_estimate: malformed spectra row: " + line);
      auto& lv = levels[std::size_t(level) - 1];
      if (index_t(lv.size()) < idx) lv.resize(std::size_t(idx), 0.0);
      lv[std::size_t(idx) - 1] = std::max(lv[std::size_t(idx) - 1], sigma);
    }
    std::vector<Vector> level_sigma;
    for (auto& lv : levels) {
      require(!lv.empty(), "run_estimate: a level has no spectra rows");
      level_sigma.push_back(Eigen::Map<Vector>(lv.data(), index_t(lv.size())));
    }

    const auto curve = estimate_costs(global, level_sigma, j.at("n").get<index_t>(), depth,
                                      get_or(j, "d", index_t(10)), error_grid_from(j));
    std::ofstream out = open_output(cfg, "cost_curves.csv", result.files);
    out << "target_error,lr_rank,lr_applies,lr_reachable,hodlr_applies,hodlr_reachable,"
           "hodlr_ranks\n";
    for (const auto& pt : curve) {
      out << fmt(pt.target_error) << "," << pt.lr_rank << "," << pt.lr_applies << ","
          << (pt.lr_reachable ? 1 : 0) << "," << pt.hodlr_applies << ","
          << (pt.hodlr_reachable ? 1 : 0) << ",";
      for (std::size_t l = 0; l < pt.hodlr_ranks.size(); ++l)
        out << pt.hodlr_ranks[l] << (l + 1 < pt.hodlr_ranks.size() ? ";" : "");
      out << "\n";
    }
  }

  require(!result.files.empty(), "run_estimate: config needs 'zeta' and/or 'global_spectrum'");
  return result;
}

ScenarioResult run_solve_map(const ScenarioConfig& cfg) {
  ScenarioResult result;
  const json& j = cfg.config;
  const json tj = j.contains("toy") ? j.at("toy") : json::object();
  const ToyProblemConfig tc = toy_config_from(tj, cfg.seed);
  const ToyProblem tp = make_toy_problem(tc);

  MapOptions opts;
  opts.grad_tol = get_or(j, "tol", 1e-8);
  opts.max_iters = int(get_or(j, "max_iters", index_t(100)));
  const MapResult map =
      map_estimate(*tp.forward, *tp.prior, tp.data, tp.noise_std, tp.prior_mean(),
                   tp.prior_mean(), opts);

  const double rel_l2 = (map.beta - tp.beta_true).norm() / tp.beta_true.norm();

  {
    std::ofstream out = open_output(cfg, "map.csv", result.files);
    out << "x,beta_true,beta_map\n";
    for (index_t i = 0; i < tc.n; ++i)
      out << fmt(tp.grid(i)) << "," << fmt(tp.beta_true(i)) << "," << fmt(map.beta(i)) << "\n";
  }
  {
    std::ofstream out = open_output(cfg, "map_summary.json", result.files);
    json rj;
    rj["iterations"] = map.iterations;
    rj["initial_grad_norm"] = map.initial_grad_norm;
    rj["final_grad_norm"] = map.grad_norm;
    rj["rel_l2_error_vs_truth"] = rel_l2;
    rj["provenance"] = cfg.provenance();
    out << rj.dump(2) << "\n";
  }
  return result;
}

}  // namespace hodlr
