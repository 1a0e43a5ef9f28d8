#include "splab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include "splab/errors.hpp"
#include "splab/fft.hpp"
#include "splab/linalg.hpp"
#include "splab/peft.hpp"

namespace splab {

// ------------------------------------------------------------------ metrics

double l2re(const Tensor& pred, const Tensor& truth) {
  if (!same_shape(pred, truth)) {
    throw config_error("l2re: prediction and target shapes differ");
  }
  if (pred.rank() < 1 || pred.shape[0] == 0) {
    throw config_error("l2re: need at least one sample");
  }
  const std::size_t samples = pred.shape[0];
  const std::size_t stride = pred.size() / samples;
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    double err_sq = 0.0, ref_sq = 0.0;
    for (std::size_t j = 0; j < stride; ++j) {
      const double p = pred.data[i * stride + j];
      const double t = truth.data[i * stride + j];
      err_sq += (p - t) * (p - t);
      ref_sq += t * t;
    }
    if (ref_sq == 0.0) {
      throw config_error("l2re: target sample " + std::to_string(i) +
                         " has zero norm");
    }
    acc += std::sqrt(err_sq) / std::sqrt(ref_sq);
  }
  return acc / static_cast<double>(samples);
}

std::size_t effective_rank(const Tensor& w, double tau) {
  if (w.rank() != 2) {
    throw config_error("effective_rank: need a matrix");
  }
  SvdResult svd = jacobi_svd(w);
  if (svd.sigma.empty() || svd.sigma[0] == 0.0) {
    std::cerr << "warning: effective_rank of an all-zero matrix\n";
    return 0;
  }
  const double cut = tau * svd.sigma[0];
  std::size_t count = 0;
  for (double s : svd.sigma) {
    if (s >= cut) ++count;
  }
  return count;
}

std::size_t modes_to_energy(const Tensor& w, double zeta) {
  if (w.rank() != 2) {
    throw config_error("modes_to_energy: need a matrix");
  }
  SvdResult svd = jacobi_svd(w);
  double total = 0.0;
  for (double s : svd.sigma) total += s * s;
  if (total == 0.0) return 0;
  double cum = 0.0;
  for (std::size_t i = 0; i < svd.sigma.size(); ++i) {
    cum += svd.sigma[i] * svd.sigma[i];
    if (cum >= zeta * total) return i + 1;
  }
  return svd.sigma.size();
}

Tensor flatten_delta_w(const Tensor& delta) {
  if (delta.rank() < 2) {
    throw config_error("flatten_delta_w: need rank >= 2");
  }
  std::size_t rows = 1;
  for (std::size_t a = 0; a + 1 < delta.rank(); ++a) rows *= delta.shape[a];
  return delta.reshaped({rows, delta.shape.back()});
}

// ------------------------------------------------------ weight-delta report

std::vector<DeltaWEntry> diagnose_delta_w(const ParamStore& before,
                                          const ParamStore& after) {
  std::vector<DeltaWEntry> out;
  for (std::size_t i = 0; i < after.size(); ++i) {
    const std::size_t j = before.find(after.name(i));
    if (j == ParamStore::npos) continue;
    const Tensor& b = before.value(j);
    const Tensor& a = after.value(i);
    if (!same_shape(a, b) || a.rank() < 2) continue;
    Tensor delta = a - b;
    if (max_abs(delta) == 0.0) continue;
    Tensor flat = flatten_delta_w(delta);
    DeltaWEntry entry;
    entry.name = after.name(i);
    SvdResult svd = jacobi_svd(flat);
    entry.singular_values = svd.sigma;
    entry.effective_rank = effective_rank(flat);
    entry.modes_to_energy = modes_to_energy(flat);
    out.push_back(std::move(entry));
  }
  return out;
}

nlohmann::json delta_w_report_json(const std::vector<DeltaWEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const DeltaWEntry& e : entries) {
    arr.push_back({{"name", e.name},
                   {"singular_values", e.singular_values},
                   {"effective_rank", e.effective_rank},
                   {"modes_to_energy", e.modes_to_energy}});
  }
  return arr;
}

// ------------------------------------------------------------ drop-high

namespace {

// Zero every coefficient whose max-per-axis uniform band index is >= keep.
Tensor low_pass(const Tensor& inputs, std::size_t spatial_dims,
                std::size_t num_bands, std::size_t keep) {
  std::vector<std::size_t> axes(spatial_dims);
  for (std::size_t a = 0; a < spatial_dims; ++a) axes[a] = a + 1;
  SpectralTensor spec = rfftn(inputs, axes);

  // Uniform bands over the signed magnitude range [0, n/2] of each axis.
  std::vector<std::vector<std::size_t>> bounds(spatial_dims);
  for (std::size_t a = 0; a < spatial_dims; ++a) {
    const std::size_t half = inputs.shape[axes[a]] / 2 + 1;
    bounds[a] = band_boundaries(half, num_bands);
  }
  auto band_of = [&](std::size_t a, std::size_t mag) {
    const std::vector<std::size_t>& b = bounds[a];
    std::size_t band = num_bands - 1;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
      if (mag >= b[i] && mag < b[i + 1]) {
        band = i;
        break;
      }
    }
    return band;
  };

  const std::vector<std::size_t>& shape = spec.real.shape;
  std::vector<std::size_t> coord(shape.size(), 0);
  for (std::size_t idx = 0; idx < spec.real.size(); ++idx) {
    std::size_t band = 0;
    for (std::size_t a = 0; a < spatial_dims; ++a) {
      const std::size_t i = coord[axes[a]];
      const std::size_t n = inputs.shape[axes[a]];
      const std::size_t mag = (a + 1 == spatial_dims) ? i : std::min(i, n - i);
      band = std::max(band, band_of(a, mag));
    }
    if (band >= keep) {
      spec.real.data[idx] = 0.0;
      spec.imag.data[idx] = 0.0;
    }
    for (std::size_t a = shape.size(); a-- > 0;) {
      if (++coord[a] < shape[a]) break;
      coord[a] = 0;
    }
  }
  return irfftn(spec);
}

}  // namespace

std::vector<std::pair<std::size_t, double>> drop_high_curve(
    const Model& model, const Tensor& inputs, const Tensor& targets,
    std::size_t num_bands) {
  if (num_bands < 1) {
    throw config_error("drop_high_curve: need at least one band");
  }
  const std::size_t dims = model.config.spatial_dims;
  if (inputs.rank() != dims + 2) {
    throw config_error("drop_high_curve: input rank does not match model");
  }
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t keep = 0; keep <= num_bands; ++keep) {
    // keep == num_bands bypasses the transform so the baseline error is the
    // unfiltered forward pass, bit for bit.
    Tensor filtered = keep == num_bands
                          ? inputs
                          : low_pass(inputs, dims, num_bands, keep);
    Tensor pred = forward_field(model, filtered);
    curve.emplace_back(keep, l2re(pred, targets));
  }
  return curve;
}

// -------------------------------------------------------- energy spectra

SpectrumProfile energy_spectrum(const std::vector<Tensor>& components) {
  if (components.empty()) {
    throw config_error("energy_spectrum: no components");
  }
  for (const Tensor& c : components) {
    if (!same_shape(c, components.front())) {
      throw config_error("energy_spectrum: component shapes differ");
    }
  }
  const Tensor& first = components.front();
  std::vector<std::size_t> axes(first.rank());
  for (std::size_t a = 0; a < axes.size(); ++a) axes[a] = a;
  double max_k_sq = 0.0;
  for (std::size_t n : first.shape) {
    max_k_sq += static_cast<double>(n / 2) * static_cast<double>(n / 2);
  }
  const std::size_t num_shells =
      static_cast<std::size_t>(std::llround(std::sqrt(max_k_sq))) + 1;

  SpectrumProfile profile;
  profile.energy.assign(num_shells, 0.0);
  for (const Tensor& c : components) {
    ShellSpectrum shells = shell_bin(rfftn(c, axes), num_shells);
    for (std::size_t i = 0; i < num_shells; ++i) {
      profile.energy[i] += shells.energy[i];
    }
    profile.residual += shells.residual;
  }
  return profile;
}

double rmsle_spectrum(const SpectrumProfile& pred, const SpectrumProfile& ref,
                      std::size_t* excluded) {
  if (pred.energy.size() != ref.energy.size()) {
    throw config_error("rmsle_spectrum: shell counts differ");
  }
  constexpr double kFloor = 1e-300;
  std::size_t skipped = 0;
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pred.energy.size(); ++i) {
    if (pred.energy[i] < kFloor || ref.energy[i] < kFloor) {
      ++skipped;
      continue;
    }
    const double d = std::log10(pred.energy[i]) - std::log10(ref.energy[i]);
    acc += d * d;
    ++used;
  }
  if (excluded != nullptr) *excluded = skipped;
  if (used == 0) {
    throw config_error("rmsle_spectrum: no comparable shells");
  }
  return std::sqrt(acc / static_cast<double>(used));
}

namespace {

double trapezoid(const std::vector<double>& e) {
  if (e.size() == 1) return e[0];
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    acc += 0.5 * (e[i] + e[i + 1]);
  }
  return acc;
}

}  // namespace

double relerr_energy(const SpectrumProfile& pred, const SpectrumProfile& ref) {
  if (pred.energy.size() != ref.energy.size()) {
    throw config_error("relerr_energy: shell counts differ");
  }
  if (pred.energy.empty()) {
    throw config_error("relerr_energy: empty spectra");
  }
  const double ref_total = trapezoid(ref.energy);
  if (ref_total == 0.0) {
    throw config_error("relerr_energy: reference energy integrates to zero");
  }
  return std::abs(trapezoid(pred.energy) - ref_total) / ref_total * 100.0;
}

// ------------------------------------------------------------------ output

void write_csv(const std::string& path,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw config_error("write_csv: cannot open " + path);
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << (i == 0 ? "" : ",") << columns[i];
  }
  out << "\n";
  for (const std::vector<double>& row : rows) {
    if (row.size() != columns.size()) {
      throw config_error("write_csv: row width does not match header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i == 0 ? "" : ",") << row[i];
    }
    out << "\n";
  }
  if (!out.good()) {
    throw config_error("write_csv: write failed for " + path);
  }
}

std::string csv_name(const std::string& dir, const std::string& experiment,
                     std::uint64_t seed) {
  return dir + "/" + experiment + "_" + std::to_string(seed) + ".csv";
}

}  // namespace splab
