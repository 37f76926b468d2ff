// Command-line driver: compress | bench-aspect | bench-dims | bench-order |
// sample | estimate | solve-map, each taking a single JSON config plus
// --seed / --out overrides. Exit codes: 0 success, 1 config error,
// 2 numerical failure, 3 bench assertion failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "hodlr/scenarios.hpp"

namespace {

int dispatch(const std::string& verb, const hodlr::ScenarioConfig& cfg) {
  using Runner = hodlr::ScenarioResult (*)(const hodlr::ScenarioConfig&);
  Runner runner = nullptr;
  if (verb == "compress") runner = hodlr::run_compress;
  else if (verb == "bench-aspect") runner = hodlr::run_bench_aspect;
  else if (verb == "bench-dims") runner = hodlr::run_bench_dims;
  else if (verb == "bench-order") runner = hodlr::run_bench_order;
  else if (verb == "sample") runner = hodlr::run_sample;
  else if (verb == "estimate") runner = hodlr::run_estimate;
  else if (verb == "solve-map") runner = hodlr::run_solve_map;
  if (runner == nullptr) {
    std::cerr << "unknown verb: " << verb << "\n";
    return 1;
  }

  const hodlr::ScenarioResult result = runner(cfg);
  for (const auto& f : result.files) std::cout << "wrote " << f << "\n";
  for (const auto& a : result.assertions)
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.description << "\n";
  return result.all_passed() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HODLR compression, factorization and posterior sampling toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::int64_t seed_override = -1;

  const std::vector<std::string> verbs = {"compress",  "bench-aspect", "bench-dims",
                                          "bench-order", "sample",     "estimate",
                                          "solve-map"};
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v);
    sub->add_option("config", config_path, "scenario config JSON")->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out", out_override, "override the output directory");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    hodlr::ScenarioConfig cfg = hodlr::ScenarioConfig::from_file(config_path);
    if (seed_override >= 0) {
      cfg.seed = std::uint64_t(seed_override);
      cfg.config["seed"] = cfg.seed;
    }
    if (!out_override.empty()) {
      cfg.out_dir = out_override;
      cfg.config["out"] = out_override;
    }
    return dispatch(verb, cfg);
  } catch (const hodlr::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const hodlr::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
