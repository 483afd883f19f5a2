#ifndef MVAE_NUMERICS_RNG_HPP
#define MVAE_NUMERICS_RNG_HPP

#include "mvae/numerics/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mvae {

// Counter-based generator: draw i of a stream is a pure function of
// (seed, stream_id, i), so identical (seed, stream_id) pairs replay exactly
// on any platform and child streams never share state with their parent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Independent stream keyed by (seed, stream_id, child).
  RngStream split(std::uint64_t child) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  // Box-Muller on two uniform draws; the second variate is cached.
  double standard_normal();
  // Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

Tensor standard_normal(RngStream& stream, Shape shape);
Tensor uniform01(RngStream& stream, Shape shape);

// Uniform subset of `size` distinct elements of `ground`, returned sorted.
std::vector<Index> draw_subset(RngStream& stream, std::span<const Index> ground, Index size);

// Uniform permutation of 0..n-1 (Fisher-Yates).
std::vector<Index> permutation(RngStream& stream, Index n);

}  // namespace mvae

#endif  // MVAE_NUMERICS_RNG_HPP
