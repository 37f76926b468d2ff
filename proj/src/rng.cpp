#include "hodlr/rng.hpp"

#include <cmath>

namespace hodlr {

namespace {

// Philox4x32-10 round constants (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3").
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

struct Words4 {
  std::uint32_t v[4];
};

inline void philox_round(Words4& ctr, std::uint32_t k0, std::uint32_t k1) {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * ctr.v[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * ctr.v[2];
  const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  ctr = Words4{{hi1 ^ ctr.v[1] ^ k0, lo1, hi0 ^ ctr.v[3] ^ k1, lo0}};
}

Words4 philox4x32_10(Words4 ctr, std::uint32_t k0, std::uint32_t k1) {
  for (int round = 0; round < 10; ++round) {
    philox_round(ctr, k0, k1);
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in (0,1), never hitting the endpoints.
inline double to_unit(std::uint32_t x) {
  return (double(x) + 0.5) * 0x1p-32;
}

}  // namespace

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, splitmix64(stream_id_ * 0x9E3779B97F4A7C15ull ^ (index + 1)));
}

void RngStream::refill() {
  const std::uint64_t block = position_ / 4;
  if (block == buffered_block_) return;
  Words4 ctr{{std::uint32_t(block), std::uint32_t(block >> 32),
              std::uint32_t(stream_id_), std::uint32_t(stream_id_ >> 32)}};
  const Words4 r = philox4x32_10(ctr, std::uint32_t(seed_), std::uint32_t(seed_ >> 32));
  const double u0 = to_unit(r.v[0]), u1 = to_unit(r.v[1]);
  const double u2 = to_unit(r.v[2]), u3 = to_unit(r.v[3]);
  uniforms_ = {u0, u1, u2, u3};
  const double r0 = std::sqrt(-2.0 * std::log(u0));
  const double r1 = std::sqrt(-2.0 * std::log(u2));
  constexpr double two_pi = 6.283185307179586476925286766559;
  normals_[0] = r0 * std::cos(two_pi * u1);
  normals_[1] = r0 * std::sin(two_pi * u1);
  normals_[2] = r1 * std::cos(two_pi * u3);
  normals_[3] = r1 * std::sin(two_pi * u3);
  buffered_block_ = block;
}

double RngStream::normal() {
  refill();
  const int slot = int(position_ % 4);
  ++position_;
  return normals_[std::size_t(slot)];
}

double RngStream::uniform() {
  refill();
  const int slot = int(position_ % 4);
  ++position_;
  return uniforms_[std::size_t(slot)];
}

void RngStream::fill_normal(double* dst, index_t n) {
  for (index_t i = 0; i < n; ++i) dst[i] = normal();
}

DenseMatrix RngStream::randn(index_t rows, index_t cols) {
  require(rows >= 1 && cols >= 1, "randn: rows and cols must be >= 1");
  DenseMatrix m(rows, cols);
  fill_normal(m.data(), rows * cols);  // column-major order
  return m;
}

}  // namespace hodlr
