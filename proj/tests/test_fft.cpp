#include <doctest.h>

#include <cmath>
#include <vector>

#include "splab/errors.hpp"
#include "splab/fft.hpp"
#include "splab/rng.hpp"

using namespace splab;

namespace {

double spectral_energy(const SpectralTensor& s) {
  // Two-sided energy with conjugate-pair doubling on the halved axis.
  const std::size_t n_last = s.source_shape.back();
  const std::size_t half = n_last / 2 + 1;
  const std::size_t rows = s.real.size() / half;
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < half; ++j) {
      const std::size_t idx = r * half + j;
      const double e = s.real.data[idx] * s.real.data[idx] +
                       s.imag.data[idx] * s.imag.data[idx];
      const double mult = (j == 0 || j == n_last / 2) ? 1.0 : 2.0;
      acc += mult * e;
    }
  }
  return acc;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  }
  return worst;
}

}  // namespace

TEST_SUITE("fft") {

// ----------------------------------------------------------------- oracles

TEST_CASE("unit impulse spreads flat at 1/sqrt(n)") {
  Tensor x = Tensor::zeros({8});
  x.data[0] = 1.0;
  SpectralTensor s = rfftn(x, {0});
  CHECK(s.real.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s.real.data[i] == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(1e-15));
    CHECK(s.imag.data[i] == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("constant field concentrates at the zero mode") {
  Tensor x = Tensor::full({4}, 1.0);
  SpectralTensor s = rfftn(x, {0});
  CHECK(s.real.data[0] == doctest::Approx(2.0).epsilon(1e-15));  // sqrt(4)
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(std::abs(s.real.data[i]) < 1e-14);
    CHECK(std::abs(s.imag.data[i]) < 1e-14);
  }
}

TEST_CASE("pure cosine lands in one bin") {
  const std::size_t n = 16;
  Tensor x = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    x.data[i] = std::cos(2.0 * M_PI * 3.0 * i / n);
  }
  SpectralTensor s = rfftn(x, {0});
  // cos(2 pi 3 x) = (e^{i3x} + e^{-i3x})/2: bin 3 carries sqrt(n)/2.
  CHECK(s.real.data[3] == doctest::Approx(std::sqrt(16.0) / 2).epsilon(1e-12));
  for (std::size_t i = 0; i < s.real.size(); ++i) {
    if (i == 3) continue;
    CHECK(std::abs(s.real.data[i]) < 1e-12);
  }
}

// -------------------------------------------------------------- round trips

TEST_CASE("irfftn inverts rfftn") {
  Prng rng(1);
  for (std::size_t n : {2u, 8u, 32u}) {
    Tensor x = rng.normal_tensor({n}, 0.0, 1.0);
    Tensor y = irfftn(rfftn(x, {0}));
    CHECK(max_diff(x, y) < 1e-12);
  }
  Tensor x2 = rng.normal_tensor({8, 16}, 0.0, 1.0);
  Tensor y2 = irfftn(rfftn(x2, {0, 1}));
  CHECK(max_diff(x2, y2) < 1e-12);
}

TEST_CASE("batched leading axes transform independently") {
  Prng rng(2);
  Tensor x = rng.normal_tensor({3, 16}, 0.0, 1.0);
  SpectralTensor batched = rfftn(x, {1});
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor row = Tensor::zeros({16});
    for (std::size_t i = 0; i < 16; ++i) row.data[i] = x.data[b * 16 + i];
    SpectralTensor single = rfftn(row, {0});
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(batched.real.data[b * 9 + i] ==
            doctest::Approx(single.real.data[i]).epsilon(1e-14));
      CHECK(batched.imag.data[b * 9 + i] ==
            doctest::Approx(single.imag.data[i]).epsilon(1e-14));
    }
  }
}

// ------------------------------------------------------------ verification

TEST_CASE("fft matches direct summation up to 1e-9") {
  Prng rng(3);
  for (std::size_t n : {2u, 4u, 8u, 16u, 32u}) {
    Tensor x = rng.normal_tensor({n}, 0.0, 1.0);
    SpectralTensor fast = rfftn(x, {0});
    SpectralTensor slow = naive_dft(x, {0});
    CHECK(max_diff(fast.real, slow.real) < 1e-9);
    CHECK(max_diff(fast.imag, slow.imag) < 1e-9);
  }
  Tensor x2 = rng.normal_tensor({8, 32}, 0.0, 1.0);
  SpectralTensor fast2 = rfftn(x2, {0, 1});
  SpectralTensor slow2 = naive_dft(x2, {0, 1});
  CHECK(max_diff(fast2.real, slow2.real) < 1e-9);
  CHECK(max_diff(fast2.imag, slow2.imag) < 1e-9);
}

TEST_CASE("energy is conserved to 1e-10") {
  Prng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = rng.normal_tensor({64}, 0.0, 1.0);
    const double phys = dot(x, x);
    const double spec = spectral_energy(rfftn(x, {0}));
    CHECK(std::abs(phys - spec) < 1e-10);
  }
  Tensor x2 = rng.normal_tensor({16, 16}, 0.0, 1.0);
  CHECK(std::abs(dot(x2, x2) - spectral_energy(rfftn(x2, {0, 1}))) < 1e-10);
}

TEST_CASE("power-of-two guard") {
  CHECK(is_power_of_two(1));
  CHECK(is_power_of_two(64));
  CHECK(!is_power_of_two(0));
  CHECK(!is_power_of_two(12));
  Tensor x = Tensor::zeros({12});
  CHECK_THROWS_AS(rfftn(x, {0}), config_error);
}

// ------------------------------------------------------------- shell binning

TEST_CASE("shell binning accounts for every bin") {
  Tensor x = Tensor::full({8}, 2.0);
  ShellSpectrum s = shell_bin(rfftn(x, {0}), 5);
  // Constant field: all energy (1/2)*sum(x^2) = 16 in shell 0.
  CHECK(s.energy[0] == doctest::Approx(16.0).epsilon(1e-12));
  for (std::size_t i = 1; i < 5; ++i) CHECK(s.energy[i] == 0.0);
  CHECK(s.residual == 0.0);
}

TEST_CASE("single mode lands in its shell with pair doubling") {
  const std::size_t n = 16;
  Tensor x = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    x.data[i] = std::cos(2.0 * M_PI * 5.0 * i / n);
  }
  ShellSpectrum s = shell_bin(rfftn(x, {0}), 9);
  // Total energy (1/2)||x||^2 = n/4 = 4, all in shell 5.
  CHECK(s.energy[5] == doctest::Approx(4.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 9; ++i) {
    if (i != 5) CHECK(std::abs(s.energy[i]) < 1e-12);
  }
}

TEST_CASE("energy beyond the last shell goes to the residual") {
  const std::size_t n = 16;
  Tensor x = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    x.data[i] = std::cos(2.0 * M_PI * 7.0 * i / n);
  }
  ShellSpectrum s = shell_bin(rfftn(x, {0}), 4);
  CHECK(s.residual == doctest::Approx(4.0).epsilon(1e-12));
}

}  // TEST_SUITE
