#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "splab/tensor.hpp"

namespace splab {

// ---------------------------------------------------------------- reporting

struct TheoryConfig {
  std::size_t trials = 100;
  double alpha = 2.0;      // coefficient decay exponent
  double sobolev_s = 2.0;  // smoothness order for the energy split
  double sobolev_m = 1.0;  // envelope magnitude
  std::size_t dim = 1;     // spatial dimension (1 or 2)
  std::size_t k_cut = 16;  // cutoff radius for the error decomposition
  std::uint64_t seed = 0;
};

struct TrialRecord {
  double observed = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // slack in the direction that makes the claim pass
  bool pass = false;
};

struct BoundReport {
  std::string name;
  std::vector<TrialRecord> trials;
  nlohmann::json details;  // fitted slopes, constants, caveats
  bool pass = false;

  nlohmann::json to_json() const;
};

// ----------------------------------------------------------- rank truncation

// Best rank-r approximation (via jacobi_svd) together with the spectral norm
// of the residual, estimated by power iteration warm-started at the leading
// discarded right singular vector.
std::pair<Tensor, double> eckart_young_truncate(const Tensor& w, std::size_t r);

// ---------------------------------------------------------------- verifiers

// Low-rank limits of blockwise updates: per-trial random block-diagonal
// targets; checks (i) the per-input error identity for the optimal per-block
// truncation, (ii) the operator-norm floor sigma_{K*r+1} for arbitrary
// factors, (iii) that optimal truncation attains max_k sigma_{k,r+1}.
BoundReport verify_blockwise_lora_bound(const TheoryConfig& cfg);

// Coefficient-decay envelope |g_k| <= C (1+k^2)^(-alpha/2) for a constructed
// function with the prescribed smoothness, plus a log-log slope fit.
BoundReport verify_spectral_decay(const TheoryConfig& cfg);

// Tail-energy law: tails of (1+|k|^2)^(-s) envelopes decay like K^(d-2s);
// slope within +-0.3 and monotone decrease, with exact M^2 scaling.
BoundReport verify_tail_energy_split(const TheoryConfig& cfg);

// Error decomposition: (i) lattice tail sums against the explicit
// integral-comparison constant, (ii) measured width-m approximation error
// eps(m) with fitted exponential rate, (iii) the K^{d/2} spatial-norm
// control with its equality case.
BoundReport verify_adapter_error_decomposition(const TheoryConfig& cfg);

// --------------------------------------- adapter vs truncation experiment

struct RmseTable {
  std::vector<std::size_t> ranks;
  std::vector<double> truncation_rmse;  // closed-form residual per rank
  std::vector<std::size_t> widths;
  std::vector<double> adapter_rmse;     // trained bottleneck MLP per width
  bool degenerate = false;              // zero delta-w input

  nlohmann::json to_json() const;
};

// Frozen activation rows h (N x d) and a weight update delta_w (d x d):
// truncation baseline uses the exact rank-r residual on the validation
// split; the adapter side trains a width-m MLP (AdamW, 2000 steps, lr 1e-3)
// on the train split.  90/10 split by row index.
RmseTable adapter_vs_truncation_experiment(const Tensor& h,
                                           const Tensor& delta_w,
                                           const std::vector<std::size_t>& ranks,
                                           const std::vector<std::size_t>& widths,
                                           std::uint64_t seed);

// Synthetic stand-in for harvested activations: rows with power-law
// covariance in a random orthogonal basis, and a full-rank delta_w with
// singular values 1/sqrt(i).
struct SyntheticActivations {
  Tensor h;        // n x d
  Tensor delta_w;  // d x d
};
SyntheticActivations make_synthetic_activation_problem(std::size_t n,
                                                       std::size_t d,
                                                       std::uint64_t seed);

}  // namespace splab
