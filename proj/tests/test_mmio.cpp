#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "hodlr/mmio.hpp"
#include "hodlr/rng.hpp"

using namespace hodlr;

TEST(MatrixMarket, RoundTripIsExact) {
  RngStream rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const index_t rows = 1 + index_t(rng.uniform() * 20);
    const index_t cols = 1 + index_t(rng.uniform() * 20);
    const DenseMatrix m = rng.randn(rows, cols) * std::pow(10.0, trial - 2);
    std::stringstream buffer;
    write_matrix_market(buffer, m);
    const DenseMatrix back = read_matrix_market(buffer);
    ASSERT_EQ(back.rows(), rows);
    ASSERT_EQ(back.cols(), cols);
    EXPECT_EQ(0, std::memcmp(m.data(), back.data(), sizeof(double) * std::size_t(m.size())));
  }
}

TEST(MatrixMarket, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "hodlr_mmio_test.mtx";
  RngStream rng(78);
  const DenseMatrix m = rng.randn(7, 3);
  write_matrix_market(path.string(), m);
  const DenseMatrix back = read_matrix_market(path.string());
  EXPECT_EQ(0, std::memcmp(m.data(), back.data(), sizeof(double) * std::size_t(m.size())));
  std::filesystem::remove(path);
}

TEST(MatrixMarket, SkipsCommentLines) {
  std::stringstream in("%%MatrixMarket matrix array real general\n% a comment\n2 1\n1.5\n-2\n");
  const DenseMatrix m = read_matrix_market(in);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m(0, 0), 1.5);
  EXPECT_EQ(m(1, 0), -2.0);
}

TEST(MatrixMarket, RejectsWrongHeaderAndTruncation) {
  std::stringstream bad_header("%%MatrixMarket matrix coordinate real general\n2 2\n");
  EXPECT_THROW(read_matrix_market(bad_header), InvalidInput);
  std::stringstream truncated("%%MatrixMarket matrix array real general\n2 2\n1.0\n");
  EXPECT_THROW(read_matrix_market(truncated), InvalidInput);
  std::stringstream empty("");
  EXPECT_THROW(read_matrix_market(empty), InvalidInput);
}
