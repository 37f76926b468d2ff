#pragma once

// Counter-based random stream (Philox4x32-10) with Box-Muller normal
// sampling. A draw is a pure function of (seed, stream id, position), so
// streams can be split into independent substreams for parallel work and
// replayed exactly. Seeds are always explicit inputs; nothing here reads
// the clock.

#include <array>
#include <cstdint>

#include "hodlr/common.hpp"

namespace hodlr {

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {}

  // Independent stream addressed by index; safe to call concurrently on a
  // const stream. Nested splits stay independent (the id is remixed).
  RngStream substream(std::uint64_t index) const;

  double normal();
  double uniform();  // in (0,1)
  void fill_normal(double* dst, index_t n);
  DenseMatrix randn(index_t rows, index_t cols);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return position_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t position_ = 0;  // count of variates drawn so far
  std::array<double, 4> normals_{};
  std::array<double, 4> uniforms_{};
  std::uint64_t buffered_block_ = ~std::uint64_t(0);
};

inline DenseMatrix randn(index_t rows, index_t cols, RngStream& rng) {
  return rng.randn(rows, cols);
}

}  // namespace hodlr
