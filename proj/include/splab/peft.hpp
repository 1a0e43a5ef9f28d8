#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "splab/rng.hpp"
#include "splab/tensor.hpp"

namespace splab {

struct Model;  // defined in backbone.hpp

// ------------------------------------------------------------------ schedule

// Per-band bottleneck allocation: contiguous index bands over the retained
// modes, wide bottlenecks for low bands (or the reverse when `inverse`).
struct BandSchedule {
  std::size_t modes = 0;                // M
  std::size_t bands = 0;                // B
  std::size_t r_min = 0;
  std::size_t r_max = 0;
  double p = 1.0;
  bool inverse = false;
  std::vector<std::size_t> boundaries;  // b_0=0 < ... < b_B=M
  std::vector<double> centers;          // f_b = (b_{b-1}+b_b)/2
  std::vector<std::size_t> widths;      // r_b
};

// boundaries[b] = floor(b*M/B); strictly increasing, ends at M.
std::vector<std::size_t> band_boundaries(std::size_t modes, std::size_t bands);

// r_b = floor(r_min + (r_max-r_min)*(1 - f_b/M)^p): non-increasing widths.
std::vector<std::size_t> allocate_widths(std::size_t r_min, std::size_t r_max,
                                         double p,
                                         const std::vector<std::size_t>& boundaries,
                                         std::size_t modes);

// Reversed allocation r_b = floor(r_min + (r_max-r_min)*(f_b/M)^p):
// non-decreasing widths (the ablation schedule).
std::vector<std::size_t> inverse_widths(std::size_t r_min, std::size_t r_max,
                                        double p,
                                        const std::vector<std::size_t>& boundaries,
                                        std::size_t modes);

BandSchedule make_band_schedule(std::size_t modes, std::size_t bands,
                                std::size_t r_min, std::size_t r_max, double p,
                                bool inverse);

// ------------------------------------------------------------ param counting

struct ParamCounts {
  long long formula = 0;  // closed-form (2d+1)*K*(2+h_t)*sum(r_b), one layer
  long long actual = 0;   // enumeration of every tensor in a full attachment
};

// Closed-form budget for one layer of banded bottleneck triples alongside the
// exact enumerated count (the enumeration additionally carries the
// up-projection biases).
ParamCounts count_params_eq13(std::size_t d, std::size_t k_blocks,
                              std::size_t h_t,
                              const std::vector<std::size_t>& widths);

// ------------------------------------------------------- bottleneck adapters

struct AdapterParams {
  Tensor w_down;  // r x D
  Tensor b_down;  // r
  Tensor w_up;    // D x r  (zero at creation)
  Tensor b_up;    // D      (zero at creation)
  double scale = 1.0;
};

// Kaiming-uniform down projection (bound sqrt(6/D)), zero up projection so
// the residual path is an exact identity at creation.
AdapterParams make_adapter_params(std::size_t dim, std::size_t bottleneck,
                                  double scale, Prng& rng);

// z + s * (W_up @ gelu(W_down @ z + b_down) + b_up), applied along the last
// axis of z.
Tensor adapter_forward(const Tensor& z, const AdapterParams& params);

// ------------------------------------------------------------------- LoRA

struct LoraParams {
  Tensor a;            // r x d
  Tensor b;            // d x r (zero at creation)
  double alpha = 1.0;  // lambda / r
};

LoraParams make_lora_params(std::size_t dim, std::size_t rank, double lambda,
                            Prng& rng);

// w0 @ x + alpha * (b @ (a @ x)) with x a column vector or column-stacked
// matrix.
Tensor lora_forward(const Tensor& x, const Tensor& w0, const LoraParams& params);

// --------------------------------------------------------- variant adapters

struct ChebyshevParams {
  Tensor w_down;  // r x D
  Tensor b_down;  // r
  Tensor coeff;   // D x r x (N+1), zero at creation
  double alpha = 1.0;
};

ChebyshevParams make_chebyshev_params(std::size_t dim, std::size_t bottleneck,
                                      std::size_t order, Prng& rng);

// z = tanh(W_down x + b_down); y_k = sum_{i,n} C[k,i,n] T_n(z_i) by the
// three-term recurrence; output alpha*y + x.
Tensor chebyshev_adapter_forward(const Tensor& x, const ChebyshevParams& params);

struct FourierKanParams {
  Tensor w_down;   // r x D
  Tensor b_down;   // r
  Tensor a_coeff;  // D x r x order (cosine bank)
  Tensor b_coeff;  // D x r x order (sine bank)
  Tensor ln_gamma; // D
  Tensor ln_beta;  // D
  double alpha = 0.0;  // residual gate, zero at creation
  double ln_eps = 1e-5;
};

FourierKanParams make_fourierkan_params(std::size_t dim, std::size_t bottleneck,
                                        std::size_t order, Prng& rng);

// z = gelu(W_down x + b_down); y_k = sum_{i,n} A[k,i,n] cos((n+1) z_i) +
// B[k,i,n] sin((n+1) z_i); output alpha * layer_norm(y) + x.
Tensor fourierkan_adapter_forward(const Tensor& x, const FourierKanParams& params);

struct WaveActParams {
  Tensor w_down;  // r x D
  Tensor b_down;  // r
  Tensor w_up;    // D x r (zero at creation)
  Tensor b_up;    // D     (zero at creation)
  double wave_a = 1.0;
  double wave_b = 1.0;
  double alpha = 1.0;
};

WaveActParams make_waveact_params(std::size_t dim, std::size_t bottleneck,
                                  Prng& rng);

// z = W_down x + b_down; ztilde = a*sin(z) + b*cos(z);
// output x + alpha * (W_up ztilde + b_up).
Tensor waveact_adapter_forward(const Tensor& x, const WaveActParams& params);

// ------------------------------------------------------------- attachments

enum class PeftKind {
  none,
  full,
  lora,
  blockwise_lora,
  adapter,
  fadapter,
  finverse_adapter,
  chebyshev,
  fourierkan,
  waveact,
};

// Parses the CLI spelling ("f-adapter", "blockwise-lora", ...); throws
// config_error listing the valid kinds.
PeftKind peft_kind_from_string(const std::string& name);
std::string to_string(PeftKind kind);

struct PeftConfig {
  PeftKind kind = PeftKind::none;
  // band-scheduled families (adapter, f-adapter, f-inverse-adapter, variants)
  std::size_t bands = 4;
  std::size_t r_min = 4;
  std::size_t r_max = 16;
  double p = 2.0;
  double adapter_scale = 1.0;
  bool annulus_bands = false;
  std::size_t series_order = 4;  // Chebyshev degree N / Fourier series order
  // low-rank family
  std::size_t rank = 4;
  double lora_lambda = 0.0;  // 0 selects lambda = rank, i.e. alpha = 1
};

// True for kinds that carry a band schedule and per-(block, band) sites.
bool is_band_kind(PeftKind kind);

// Parameter-name prefixes shared by attachment creation, the forward pass,
// and checkpoint manifests.
std::string peft_site_prefix(std::size_t layer, std::size_t block,
                             std::size_t band, const char* stage);
std::string lora_param_prefix(std::size_t layer, const char* matrix);
std::string blockwise_lora_param_prefix(std::size_t layer, const char* matrix,
                                        std::size_t block);

// Adds attachment parameters to the model's store, marks the backbone frozen
// (except kind "full"), and records the schedule on the model.
void attach_peft(Model& model, const PeftConfig& config, Prng& rng);

// Trainable / total parameter census over a model's store.
struct TrainableReport {
  long long trainable = 0;
  long long total = 0;
  long long formula = 0;  // closed-form count for band kinds (0 otherwise)
};
TrainableReport census_params(const Model& model);

}  // namespace splab
