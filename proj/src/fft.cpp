#include "splab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "splab/errors.hpp"

namespace splab {

namespace {

// Iterative radix-2 complex FFT on contiguous scratch; unitary scaling.
void fft_line(std::vector<double>& re, std::vector<double>& im, int sign) {
  const std::size_t n = re.size();
  if (n == 1) return;
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::size_t a = i + j, b = i + j + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    re[i] *= scale;
    im[i] *= scale;
  }
}

// Direct-summation DFT of one line, same unitary normalization.
void dft_line(std::vector<double>& re, std::vector<double>& im, int sign) {
  const std::size_t n = re.size();
  std::vector<double> or_(n, 0.0), oi(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * std::numbers::pi *
                         static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
      const double c = std::cos(ang), s = std::sin(ang);
      or_[k] += re[j] * c - im[j] * s;
      oi[k] += re[j] * s + im[j] * c;
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = or_[i] * scale;
    im[i] = oi[i] * scale;
  }
}

template <typename LineFn>
void transform_axis(Tensor& re, Tensor& im, std::size_t axis, int sign,
                    LineFn&& line_fn) {
  const std::size_t n = re.shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= re.shape[a];
  for (std::size_t a = axis + 1; a < re.rank(); ++a) inner *= re.shape[a];
  std::vector<double> lr(n), li(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      for (std::size_t k = 0; k < n; ++k) {
        lr[k] = re.data[base + k * inner];
        li[k] = im.data[base + k * inner];
      }
      line_fn(lr, li, sign);
      for (std::size_t k = 0; k < n; ++k) {
        re.data[base + k * inner] = lr[k];
        im.data[base + k * inner] = li[k];
      }
    }
  }
}

std::vector<std::size_t> normalize_axes(const std::vector<std::size_t>& axes,
                                        std::size_t rank) {
  if (axes.empty()) throw config_error("fft: no transform axes given");
  std::vector<std::size_t> out = axes;
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw config_error("fft: duplicate transform axis");
  }
  if (out.back() >= rank) throw config_error("fft: axis out of range");
  return out;
}

void decode_index(std::size_t flat, const std::vector<std::size_t>& shape,
                  std::vector<std::size_t>& index) {
  for (std::size_t a = shape.size(); a-- > 0;) {
    index[a] = flat % shape[a];
    flat /= shape[a];
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

void cfftn(Tensor& re, Tensor& im, const std::vector<std::size_t>& axes,
           int sign) {
  if (!same_shape(re, im)) throw config_error("cfftn: re/im shape mismatch");
  const auto ax = normalize_axes(axes, re.rank());
  for (std::size_t a : ax) {
    if (!is_power_of_two(re.shape[a])) {
      throw config_error("cfftn: axis length must be a power of two");
    }
  }
  for (std::size_t a : ax) {
    transform_axis(re, im, a, sign,
                   [](std::vector<double>& r, std::vector<double>& i,
                      int s) { fft_line(r, i, s); });
  }
}

SpectralTensor half_slice(const Tensor& re, const Tensor& im,
                          const std::vector<std::size_t>& axes,
                          const std::vector<std::size_t>& source_shape) {
  const auto ax = normalize_axes(axes, re.rank());
  const std::size_t last = ax.back();
  std::vector<std::size_t> out_shape = re.shape;
  out_shape[last] = re.shape[last] / 2 + 1;
  SpectralTensor s;
  s.real = Tensor::zeros(out_shape);
  s.imag = Tensor::zeros(out_shape);
  s.source_shape = source_shape;
  s.axes = ax;
  std::vector<std::size_t> idx(out_shape.size());
  for (std::size_t f = 0; f < s.real.size(); ++f) {
    decode_index(f, out_shape, idx);
    const std::size_t src = re.offset(idx);
    s.real.data[f] = re.data[src];
    s.imag.data[f] = im.data[src];
  }
  return s;
}

void hermitian_extend(const SpectralTensor& s, Tensor& re, Tensor& im) {
  re = Tensor::zeros(s.source_shape);
  im = Tensor::zeros(s.source_shape);
  const std::size_t last = s.axes.back();
  const std::size_t n_last = s.source_shape[last];
  const std::size_t half = n_last / 2;
  std::vector<std::size_t> idx(s.source_shape.size());
  std::vector<std::size_t> mirror(s.source_shape.size());
  for (std::size_t f = 0; f < re.size(); ++f) {
    decode_index(f, s.source_shape, idx);
    if (idx[last] <= half) {
      const std::size_t src = s.real.offset(idx);
      re.data[f] = s.real.data[src];
      im.data[f] = s.imag.data[src];
    } else {
      mirror = idx;
      for (std::size_t a : s.axes) {
        mirror[a] = (s.source_shape[a] - idx[a]) % s.source_shape[a];
      }
      const std::size_t src = s.real.offset(mirror);
      re.data[f] = s.real.data[src];
      im.data[f] = -s.imag.data[src];
    }
  }
}

SpectralTensor rfftn(const Tensor& x, const std::vector<std::size_t>& axes) {
  const auto ax = normalize_axes(axes, x.rank());
  for (std::size_t a : ax) {
    if (!is_power_of_two(x.shape[a])) {
      throw config_error("rfftn: axis length must be a power of two");
    }
  }
  Tensor re = x;
  Tensor im = Tensor::zeros(x.shape);
  cfftn(re, im, ax, -1);
  return half_slice(re, im, ax, x.shape);
}

Tensor irfftn(const SpectralTensor& s) {
  if (!same_shape(s.real, s.imag)) {
    throw config_error("irfftn: re/im shape mismatch");
  }
  if (s.axes.empty() || s.source_shape.size() != s.real.rank()) {
    throw config_error("irfftn: inconsistent source shape");
  }
  const std::size_t last = s.axes.back();
  for (std::size_t a = 0; a < s.real.rank(); ++a) {
    const std::size_t want =
        (a == last) ? s.source_shape[a] / 2 + 1 : s.source_shape[a];
    if (s.real.shape[a] != want) {
      throw config_error("irfftn: spectrum shape inconsistent with source");
    }
  }
  Tensor re, im;
  hermitian_extend(s, re, im);
  cfftn(re, im, s.axes, +1);
  return re;
}

SpectralTensor naive_dft(const Tensor& x, const std::vector<std::size_t>& axes) {
  const auto ax = normalize_axes(axes, x.rank());
  Tensor re = x;
  Tensor im = Tensor::zeros(x.shape);
  for (std::size_t a : ax) {
    transform_axis(re, im, a, -1,
                   [](std::vector<double>& r, std::vector<double>& i,
                      int s) { dft_line(r, i, s); });
  }
  return half_slice(re, im, ax, x.shape);
}

ShellSpectrum shell_bin(const SpectralTensor& s, std::size_t num_shells) {
  ShellSpectrum out;
  out.energy.assign(num_shells, 0.0);
  const std::size_t last = s.axes.back();
  const std::size_t n_last = s.source_shape[last];
  std::vector<std::size_t> idx(s.real.rank());
  for (std::size_t f = 0; f < s.real.size(); ++f) {
    decode_index(f, s.real.shape, idx);
    double k2 = 0.0;
    for (std::size_t a : s.axes) {
      const std::size_t n = s.source_shape[a];
      double k = static_cast<double>(idx[a]);
      if (a != last && idx[a] > n / 2) k -= static_cast<double>(n);
      k2 += k * k;
    }
    // Bins strictly inside the halved axis stand for a conjugate pair.
    const bool doubled = idx[last] > 0 && idx[last] < n_last - n_last / 2;
    const double w = doubled ? 2.0 : 1.0;
    const double e = 0.5 * w *
                     (s.real.data[f] * s.real.data[f] +
                      s.imag.data[f] * s.imag.data[f]);
    const auto shell = static_cast<std::size_t>(std::lround(std::sqrt(k2)));
    if (shell < num_shells) {
      out.energy[shell] += e;
    } else {
      out.residual += e;
    }
  }
  return out;
}

}  // namespace splab
