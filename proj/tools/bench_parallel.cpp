// Timing comparison of the serial and OpenMP execution policies for the
// block kernels: HODLR apply, factor solve, and the batched toy operator
// apply. Prints a CSV table to stdout. The two policies are bit-identical
// by contract; this tool measures wall clock only.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hodlr/compression.hpp"
#include "hodlr/dense_kernels.hpp"
#include "hodlr/factorization.hpp"
#include "hodlr/toy_problem.hpp"

using namespace hodlr;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

HodlrMatrix random_spd_hodlr(index_t n, int depth, index_t rank, RngStream rng) {
  HodlrMatrix h{HierPartition(n, depth)};
  const HierPartition& p = h.partition();
  for (int l = 1; l <= depth; ++l) {
    for (index_t j = 0; j < p.num_pairs(l); ++j) {
      const index_t nl = p.block(l, 2 * j).size(), nr = p.block(l, 2 * j + 1).size();
      const index_t r = std::min({rank, nl, nr});
      LowRankFactor f;
      f.u = orthog(rng.substream(101 * l + j).randn(nl, r)).q;
      f.v = orthog(rng.substream(733 * l + j).randn(nr, r)).q;
      f.sigma = Vector::LinSpaced(r, 1.0, 0.1);
      h.set_factor(l, j, std::move(f));
    }
  }
  for (index_t j = 0; j < p.num_leaves(); ++j) {
    const index_t m = p.leaf(j).size();
    DenseMatrix g = rng.substream(997 + j).randn(m, m);
    h.set_leaf(j, DenseMatrix(0.1 * (g + g.transpose())));
  }
  // Shift well into SPD territory.
  return h.add_scaled_identity(4.0 + h.frob_norm());
}

}  // namespace

int main() {
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
#else
  const int threads = 1;
#endif
  std::printf("# threads=%d\n", threads);
  std::printf("kernel,n,serial_ms,parallel_ms,speedup\n");

  RngStream rng(2024);
  for (index_t n : {1024, 4096, 8192}) {
    const int depth = default_depth(n, 64);
    const HodlrMatrix h = random_spd_hodlr(n, depth, 16, rng.substream(n));
    const DenseMatrix x = rng.substream(7 * n).randn(n, 16);

    const double apply_serial = time_ms(20, [&] { h.apply(x, Exec::Serial); });
    const double apply_parallel = time_ms(20, [&] { h.apply(x, Exec::Parallel); });
    std::printf("hodlr_apply,%lld,%.3f,%.3f,%.2f\n", static_cast<long long>(n), apply_serial,
                apply_parallel, apply_serial / apply_parallel);

    const HodlrFactorization f = HodlrFactorization::factorize_spd(h);
    const Vector b = rng.substream(9 * n).randn(n, 1).col(0);
    const double solve_serial = time_ms(20, [&] { f.solve(b, Exec::Serial); });
    const double solve_parallel = time_ms(20, [&] { f.solve(b, Exec::Parallel); });
    std::printf("factor_solve,%lld,%.3f,%.3f,%.2f\n", static_cast<long long>(n), solve_serial,
                solve_parallel, solve_serial / solve_parallel);

    const PeriodicSmoother s(n, 1e4, 100.0);
    const double smoother_serial = time_ms(20, [&] { s.apply(x, Exec::Serial); });
    const double smoother_parallel = time_ms(20, [&] { s.apply(x, Exec::Parallel); });
    std::printf("smoother_apply,%lld,%.3f,%.3f,%.2f\n", static_cast<long long>(n),
                smoother_serial, smoother_parallel, smoother_serial / smoother_parallel);
  }
  return 0;
}
