#include "splab/rng.hpp"

#include <cmath>
#include <numbers>

#include "splab/errors.hpp"

namespace splab {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Prng::Prng(std::uint64_t seed) {
  SplitMix64 sm(seed);
  for (auto& w : s_) w = sm.next();
}

Prng Prng::from_state(std::uint64_t s0, std::uint64_t s1, std::uint64_t s2,
                      std::uint64_t s3) {
  Prng p;
  p.s_[0] = s0;
  p.s_[1] = s1;
  p.s_[2] = s2;
  p.s_[3] = s3;
  return p;
}

std::uint64_t Prng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Prng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Prng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double Prng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on two fresh uniforms; guard against log(0).
  double u1 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Prng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

std::size_t Prng::index(std::size_t n) {
  if (n == 0) throw config_error("prng index: empty range");
  return static_cast<std::size_t>(next_u64() % n);
}

Tensor Prng::uniform_tensor(const std::vector<std::size_t>& shape, double lo,
                            double hi) {
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = uniform(lo, hi);
  return t;
}

Tensor Prng::normal_tensor(const std::vector<std::size_t>& shape, double mean,
                           double stddev) {
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = normal(mean, stddev);
  return t;
}

Tensor Prng::kaiming_uniform_tensor(const std::vector<std::size_t>& shape,
                                    std::size_t fan_in) {
  if (fan_in == 0) throw config_error("kaiming init: fan_in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return uniform_tensor(shape, -bound, bound);
}

}  // namespace splab
