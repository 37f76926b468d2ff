#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hodlr/hodlr_matrix.hpp"
#include "support.hpp"

using namespace hodlr;
using hodlr::testing::oracle_spectral_norm;
using hodlr::testing::random_hodlr;

TEST(HodlrApply, IdentityLeavesZeroBlocksIsIdentity) {
  const HodlrMatrix h = HodlrMatrix::identity(HierPartition(16, 2));
  RngStream rng(1);
  const Vector x = rng.randn(16, 1).col(0);
  EXPECT_EQ((h.apply(x) - x).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HodlrApply, HandComputedRankOneCase) {
  // N=4, L=1: off-diagonal block u * 2 * v^T with u = e1, v = (0.6, 0.8).
  HodlrMatrix h{HierPartition(4, 1)};
  LowRankFactor f;
  f.u = DenseMatrix::Zero(2, 1);
  f.u(0, 0) = 1.0;
  f.v = DenseMatrix(2, 1);
  f.v << 0.6, 0.8;
  f.sigma = Vector::Constant(1, 2.0);
  h.set_factor(1, 0, f);
  DenseMatrix d1(2, 2), d2(2, 2);
  d1 << 1, 0, 0, 2;
  d2 << 3, 1, 1, 4;
  h.set_leaf(0, d1);
  h.set_leaf(1, d2);

  DenseMatrix expected(4, 4);
  expected << 1, 0, 1.2, 1.6,  //
      0, 2, 0, 0,              //
      1.2, 0, 3, 1,            //
      1.6, 0, 1, 4;
  Vector x(4);
  x << 1, -1, 2, 0.5;
  EXPECT_LE((h.apply(x) - expected * x).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((h.densify() - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HodlrApply, MatchesDensifyOracleOnRandomInstance) {
  const HierPartition p(256, 3);
  const HodlrMatrix h = random_hodlr(p, 6, RngStream(2));
  const DenseMatrix dense = h.densify();
  RngStream rng(3);
  const DenseMatrix x = rng.randn(256, 5);
  const DenseMatrix y = h.apply(x);
  const double scale = oracle_spectral_norm(dense) * x.norm();
  EXPECT_LE((y - dense * x).cwiseAbs().maxCoeff(), 1e-12 * scale);
}

TEST(HodlrApply, MatchesNaiveReferenceKernel) {
  const HierPartition p(100, 2);  // uneven leaf sizes
  const HodlrMatrix h = random_hodlr(p, 4, RngStream(4));
  RngStream rng(5);
  const DenseMatrix x = rng.randn(100, 3);
  const DenseMatrix fast = h.apply(x);
  const DenseMatrix ref = hodlr_apply_reference(h, x);
  EXPECT_LE((fast - ref).cwiseAbs().maxCoeff(), 1e-13 * fast.cwiseAbs().maxCoeff());
}

TEST(HodlrApply, ParallelScheduleIsBitIdenticalToSerial) {
  const HierPartition p(512, 3);
  const HodlrMatrix h = random_hodlr(p, 8, RngStream(6));
  RngStream rng(7);
  const DenseMatrix x = rng.randn(512, 8);
  const DenseMatrix serial = h.apply(x, Exec::Serial);
#ifdef _OPENMP
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4, 7}) {
    omp_set_num_threads(threads);
    const DenseMatrix parallel = h.apply(x, Exec::Parallel);
    ASSERT_EQ(0, std::memcmp(serial.data(), parallel.data(),
                             sizeof(double) * std::size_t(serial.size())))
        << "thread count " << threads;
  }
  omp_set_num_threads(saved);
#else
  const DenseMatrix parallel = h.apply(x, Exec::Parallel);
  EXPECT_EQ(0, std::memcmp(serial.data(), parallel.data(),
                           sizeof(double) * std::size_t(serial.size())));
#endif
}

TEST(HodlrApply, SymmetryHoldsOnRandomProbes) {
  const HierPartition p(128, 2);
  const HodlrMatrix h = random_hodlr(p, 5, RngStream(8));
  RngStream rng(9);
  const double norm = h.frob_norm();
  for (int t = 0; t < 20; ++t) {
    const Vector x = rng.randn(128, 1).col(0);
    const Vector y = rng.randn(128, 1).col(0);
    const double lhs = x.dot(h.apply(y));
    const double rhs = y.dot(h.apply(x));
    EXPECT_LE(std::fabs(lhs - rhs), 1e-12 * norm * x.norm() * y.norm());
  }
}

TEST(HodlrDensify, IdentityCase) {
  const HodlrMatrix h = HodlrMatrix::identity(HierPartition(8, 2));
  EXPECT_EQ((h.densify() - DenseMatrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HodlrFromDense, FullRankRoundTripIsExact) {
  const DenseMatrix a = hodlr::testing::random_symmetric(64, RngStream(10));
  const HierPartition p(64, 2);
  const HodlrMatrix h = HodlrMatrix::from_dense(a, p);
  EXPECT_LE((h.densify() - a).cwiseAbs().maxCoeff(), 1e-12 * a.cwiseAbs().maxCoeff());
}

TEST(HodlrStorage, HandComputedLayout) {
  // N=8, L=2, all ranks 1, leaf 2: level-1 factor 2*4+1 = 9, level-2
  // factors 2*(2*2+1) = 10, leaves 4*4 = 16.
  HodlrMatrix h{HierPartition(8, 2)};
  RngStream rng(11);
  for (int l = 1; l <= 2; ++l) {
    for (index_t j = 0; j < h.partition().num_pairs(l); ++j) {
      const index_t nl = h.partition().block(l, 2 * j).size();
      const index_t nr = h.partition().block(l, 2 * j + 1).size();
      LowRankFactor f;
      f.u = orthog(rng.randn(nl, 1)).q;
      f.v = orthog(rng.randn(nr, 1)).q;
      f.sigma = Vector::Ones(1);
      h.set_factor(l, j, f);
    }
  }
  EXPECT_EQ(h.storage_count(), 35u);
}

TEST(HodlrStorage, ZeroRanksLeaveOnlyLeaves) {
  const HodlrMatrix h{HierPartition(128, 1)};
  EXPECT_EQ(h.storage_count(), 2u * 64u * 64u);
}

TEST(HodlrStorage, BoundedByNlogNBudget) {
  for (index_t n : {128, 256, 512, 1024, 2048, 4096}) {
    const index_t rank = 8;
    const int depth = default_depth(n, 64);
    const HodlrMatrix h = random_hodlr(HierPartition(n, depth), rank, RngStream(12));
    const std::uint64_t budget =
        3u * std::uint64_t(n) * (std::uint64_t(rank) * std::uint64_t(depth) + 64u);
    EXPECT_LE(h.storage_count(), budget) << "n=" << n;
  }
}

TEST(HodlrStorage, ClosedFormLayoutFormula) {
  const index_t rank = 3;
  for (index_t n : {96, 256}) {
    const int depth = 2;
    const HierPartition p(n, depth);
    const HodlrMatrix h = random_hodlr(p, rank, RngStream(13));
    std::uint64_t expected = 0;
    for (int l = 1; l <= depth; ++l)
      for (index_t j = 0; j < p.num_pairs(l); ++j)
        expected += std::uint64_t(rank) *
                    std::uint64_t(p.block(l, 2 * j).size() + p.block(l, 2 * j + 1).size() + 1);
    for (index_t j = 0; j < p.num_leaves(); ++j)
      expected += std::uint64_t(p.leaf(j).size()) * std::uint64_t(p.leaf(j).size());
    EXPECT_EQ(h.storage_count(), expected);
  }
}

TEST(HodlrFrobNorm, IdentityOfSize16IsFour) {
  const HodlrMatrix h = HodlrMatrix::identity(HierPartition(16, 2));
  EXPECT_NEAR(h.frob_norm(), 4.0, 1e-14);
}

TEST(HodlrFrobNorm, MatchesDenseOracle) {
  const HodlrMatrix h = random_hodlr(HierPartition(128, 2), 6, RngStream(14));
  EXPECT_NEAR(h.frob_norm(), h.densify().norm(), 1e-12 * h.frob_norm());
}

TEST(HodlrFrobNorm, ScalesLinearlyInSigmaWithZeroLeaves) {
  HodlrMatrix h = random_hodlr(HierPartition(64, 2), 4, RngStream(15), 0.5, 0.0);
  HodlrMatrix doubled = h;
  for (int l = 1; l <= 2; ++l) {
    for (index_t j = 0; j < h.partition().num_pairs(l); ++j) {
      LowRankFactor f = h.factor(l, j);
      f.sigma *= 2.0;
      doubled.set_factor(l, j, f);
    }
  }
  EXPECT_NEAR(doubled.frob_norm(), 2.0 * h.frob_norm(), 1e-12 * h.frob_norm());
}

TEST(HodlrShift, ZeroShiftLeavesMatrixUnchanged) {
  const HodlrMatrix h = random_hodlr(HierPartition(64, 2), 4, RngStream(16));
  const HodlrMatrix shifted = h.add_scaled_identity(0.0);
  EXPECT_EQ((shifted.densify() - h.densify()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HodlrShift, ZeroMatrixPlusOneIsIdentity) {
  const HodlrMatrix h{HierPartition(32, 2)};
  const HodlrMatrix shifted = h.add_scaled_identity(1.0);
  EXPECT_EQ((shifted.densify() - DenseMatrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HodlrShift, MatchesDenseOracle) {
  const HodlrMatrix h = random_hodlr(HierPartition(96, 2), 4, RngStream(17));
  const HodlrMatrix shifted = h.add_scaled_identity(3.5);
  const DenseMatrix expected = h.densify() + 3.5 * DenseMatrix::Identity(96, 96);
  EXPECT_EQ((shifted.densify() - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HodlrSerialization, RoundTripIsByteExact) {
  const auto path = std::filesystem::temp_directory_path() / "hodlr_container_test.bin";
  const HodlrMatrix h = random_hodlr(HierPartition(100, 2), 5, RngStream(18));
  h.save(path.string());
  const HodlrMatrix back = HodlrMatrix::load(path.string());
  const DenseMatrix a = h.densify(), b = back.densify();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())));
  EXPECT_EQ(h.storage_count(), back.storage_count());
  std::filesystem::remove(path);
}

TEST(HodlrSerialization, RejectsForeignFiles) {
  const auto path = std::filesystem::temp_directory_path() / "hodlr_bad_magic.bin";
  {
    std::ofstream out(path);
    out << "not a container";
  }
  EXPECT_THROW(HodlrMatrix::load(path.string()), InvalidInput);
  std::filesystem::remove(path);
}

TEST(HodlrCost, ApplyMaddsFitNlogN) {
  // Fixed rank, leaf 64: madds per column should track c * N log2 N within
  // +-20% across N = 2^7 .. 2^13.
  const index_t rank = 8;
  std::vector<double> ratios;
  for (index_t n = 128; n <= 8192; n *= 2) {
    const int depth = default_depth(n, 64);
    const HodlrMatrix h = random_hodlr(HierPartition(n, depth), rank, RngStream(19));
    const double madds = double(h.apply_madds_per_column());
    ratios.push_back(madds / (double(n) * std::log2(double(n))));
  }
  const double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / double(ratios.size());
  for (double r : ratios) {
    EXPECT_LE(std::fabs(r - mean), 0.20 * mean);
  }
}
