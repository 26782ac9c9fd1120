#pragma once

#include <cstdint>

namespace cflab {

/// Deterministic PRNG: PCG32 (XSH-RR 64/32, "setseq" variant).
///
/// A (seed, stream) pair fully determines the output sequence, on every
/// platform. Distinct stream ids select distinct LCG increments, which is
/// the generator family's documented mechanism for independent substreams;
/// parallel consumers should take their own stream rather than reseeding.
///
/// Derived draws are pinned conventions, relied on by golden tests:
///   - next_u64(): hi = next_u32(), lo = next_u32(), (hi << 32) | lo
///   - uniform(): next_u64() >> 11, scaled by 2^-53 -> [0, 1)
///   - gaussian(): Box-Muller, cosine branch, exactly two uniforms per call:
///       z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
///   - uniform_int(n): multiply-shift on one next_u32()
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// mean + std_dev * z with z a standard normal deviate. std_dev >= 0;
  /// std_dev == 0 returns mean exactly (the two uniforms are still consumed).
  double gaussian(double mean, double std_dev);

  /// Uniform integer in [0, n), n >= 1.
  int uniform_int(int n);

  bool bernoulli(double p);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace cflab
