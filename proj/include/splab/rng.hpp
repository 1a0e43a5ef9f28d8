#pragma once

#include <cstdint>

#include "splab/tensor.hpp"

namespace splab {

// SplitMix64: 64-bit state stepped by the golden-ratio increment.  Used on its
// own for seed expansion and as the seeding stage for Xoshiro256.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

// xoshiro256**: 256-bit-state generator; the four state words are filled from
// a SplitMix64 stream so a single 64-bit seed reproduces the whole stream.
class Prng {
 public:
  explicit Prng(std::uint64_t seed);

  // Construct with the four state words set directly (test vectors).
  static Prng from_state(std::uint64_t s0, std::uint64_t s1, std::uint64_t s2,
                         std::uint64_t s3);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; second value is cached.
  double normal();
  double normal(double mean, double stddev);

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  Tensor uniform_tensor(const std::vector<std::size_t>& shape, double lo,
                        double hi);
  Tensor normal_tensor(const std::vector<std::size_t>& shape, double mean,
                       double stddev);
  // U(-b, b) with b = sqrt(6 / fan_in).
  Tensor kaiming_uniform_tensor(const std::vector<std::size_t>& shape,
                                std::size_t fan_in);

 private:
  Prng() = default;
  std::uint64_t s_[4] = {0, 0, 0, 0};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace splab
