#pragma once

#include <vector>

#include "splab/tensor.hpp"

namespace splab {

// Output of the real n-D FFT: paired real/imaginary planes with the last
// transformed axis halved to floor(n/2)+1 bins, plus enough bookkeeping to
// invert the transform.
struct SpectralTensor {
  Tensor real;
  Tensor imag;
  std::vector<std::size_t> source_shape;  // spatial shape before halving
  std::vector<std::size_t> axes;          // transformed axes, ascending
};

// Real n-D FFT with unitary normalization (1/sqrt(n) per axis per direction).
// Transformed axis lengths must be powers of two.
SpectralTensor rfftn(const Tensor& x, const std::vector<std::size_t>& axes);

// Inverse of rfftn; reconstructs the Hermitian full spectrum and returns the
// real field with the original source shape.
Tensor irfftn(const SpectralTensor& s);

// Direct-summation DFT with the same normalization and half-spectrum layout
// as rfftn.  Any axis lengths.  O(n^2) per axis: the oracle for rfftn.
SpectralTensor naive_dft(const Tensor& x, const std::vector<std::size_t>& axes);

// Per-shell spectral energy: shell j accumulates (1/2)|x_hat(k)|^2 over bins
// with round(||k||) == j.  Bins at 0 < k_last < n/2 on the halved axis stand
// for a conjugate pair and count twice.  `residual` collects energy at shells
// >= num_shells, so energy total + residual equals half the Parseval energy.
struct ShellSpectrum {
  std::vector<double> energy;
  double residual = 0.0;
};
ShellSpectrum shell_bin(const SpectralTensor& s, std::size_t num_shells);

// --- building blocks shared with the reverse-mode sweep -------------------

// In-place unitary complex FFT along `axes`; sign -1 is the forward
// transform, +1 the inverse.
void cfftn(Tensor& re, Tensor& im, const std::vector<std::size_t>& axes,
           int sign);

// Keep bins 0..n/2 of the last transformed axis.
SpectralTensor half_slice(const Tensor& re, const Tensor& im,
                          const std::vector<std::size_t>& axes,
                          const std::vector<std::size_t>& source_shape);

// Rebuild the full spectrum from the half layout via Hermitian symmetry
// (mirror bins conjugated across every transformed axis).
void hermitian_extend(const SpectralTensor& s, Tensor& re, Tensor& im);

bool is_power_of_two(std::size_t n);

}  // namespace splab
