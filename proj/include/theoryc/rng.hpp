#pragma once

#include <array>
#include <cstdint>

namespace theoryc {

/// Philox4x32-10 block: a keyed bijection on 128-bit counters.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Stateless draws addressed by (seed, stream, index). Any evaluation order
/// yields the same values.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform(std::uint64_t stream, std::uint64_t index) const;
  double normal(std::uint64_t stream, std::uint64_t index) const;
  std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t stream, std::uint64_t index) const;

  std::uint64_t seed_;
};

/// SplitMix64 finaliser over (seed, index); used for per-sample seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace theoryc
