#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "splab/backbone.hpp"
#include "splab/tensor.hpp"

namespace splab {

// ------------------------------------------------------------------ metrics

// Mean over samples (axis 0) of ||pred_i - truth_i|| / ||truth_i||.
// Zero-norm target rows are a config_error naming the sample.
double l2re(const Tensor& pred, const Tensor& truth);

// Number of singular values >= tau * sigma_1.  Zero matrix: 0 plus a
// warning on stderr.
std::size_t effective_rank(const Tensor& w, double tau = 0.01);

// Smallest n with sum_{i<=n} sigma_i^2 >= zeta * sum sigma_i^2.
std::size_t modes_to_energy(const Tensor& w, double zeta = 0.9);

// Merge all axes but the last: {a, b, ..., z} -> {a*b*..., z}.  Requires
// rank >= 2.
Tensor flatten_delta_w(const Tensor& delta);

// ------------------------------------------------------ weight-delta report

struct DeltaWEntry {
  std::string name;
  std::vector<double> singular_values;
  std::size_t effective_rank = 0;
  std::size_t modes_to_energy = 0;
};

// Per-tensor SVD diagnostics of (after - before) for every parameter that
// exists in both stores with matching shape, rank >= 2, and a nonzero
// difference.
std::vector<DeltaWEntry> diagnose_delta_w(const ParamStore& before,
                                          const ParamStore& after);
nlohmann::json delta_w_report_json(const std::vector<DeltaWEntry>& entries);

// ------------------------------------------------------------ drop-high

// For k = 0..num_bands: low-pass the batch inputs by zeroing every spectral
// coefficient whose (max-per-axis) uniform band index is >= k, run the
// model, and record the mean relative error.  k = num_bands skips the
// filter entirely so the baseline is reproduced bit-exactly.
std::vector<std::pair<std::size_t, double>> drop_high_curve(
    const Model& model, const Tensor& inputs, const Tensor& targets,
    std::size_t num_bands);

// -------------------------------------------------------- energy spectra

struct SpectrumProfile {
  std::vector<double> energy;  // E(k) for integer shells k = 0..size-1
  double residual = 0.0;       // energy beyond the last shell (zero here)
};

// Shell-averaged spectrum summed over field components (each a full spatial
// tensor on a common grid); shell count covers round(max ||k||) so no
// energy is left in the residual.
SpectrumProfile energy_spectrum(const std::vector<Tensor>& components);

// Root-mean-square log10 discrepancy over shells where both spectra are
// numerically positive; `excluded` (optional) receives the skipped-shell
// count.  No comparable shells is a config_error.
double rmsle_spectrum(const SpectrumProfile& pred, const SpectrumProfile& ref,
                      std::size_t* excluded = nullptr);

// |integral(pred) - integral(ref)| / integral(ref) * 100, trapezoidal over
// the shell index.  Zero reference energy is a config_error.
double relerr_energy(const SpectrumProfile& pred, const SpectrumProfile& ref);

// ------------------------------------------------------------------ output

// Minimal CSV writer shared by curves and training traces.
void write_csv(const std::string& path,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

// "{experiment}_{seed}.csv" under dir.
std::string csv_name(const std::string& dir, const std::string& experiment,
                     std::uint64_t seed);

}  // namespace splab
