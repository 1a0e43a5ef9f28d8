#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "splab/autodiff.hpp"
#include "splab/peft.hpp"
#include "splab/rng.hpp"
#include "splab/tensor.hpp"

namespace splab {

// ---------------------------------------------------------------- parameters

// Named, ordered parameter container: the single source of truth for weights,
// the freeze mask, and checkpoint layout.
class ParamStore {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t add(std::string name, Tensor value, bool trainable);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  bool trainable(std::size_t i) const { return trainable_[i] != 0; }
  void set_trainable(std::size_t i, bool flag) { trainable_[i] = flag ? 1 : 0; }

  // Index of `name`, or npos.
  std::size_t find(const std::string& name) const;
  // Index of `name`; throws config_error when absent.
  std::size_t at(const std::string& name) const;

  std::vector<std::size_t> trainable_indices() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<char> trainable_;
  std::map<std::string, std::size_t> index_;
};

// -------------------------------------------------------------------- config

struct BackboneConfig {
  std::size_t spatial_dims = 1;        // 1 or 2
  std::vector<std::size_t> grid;       // one power-of-two size per axis
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t width = 16;              // C
  std::size_t blocks = 4;              // K channel blocks
  std::size_t layers = 2;              // L
  std::size_t modes = 8;               // retained modes M per axis
  std::size_t temporal_modes = 1;      // h_t (kept symbolic for counting)
  bool use_mlp = true;                 // pointwise MLP inside the residual
  bool identity_gelu = false;          // test hook: nonlinearity -> identity

  std::size_t block_width() const { return width / blocks; }
  // Throws config_error on any inconsistency (divisibility, grid sizes,
  // retained modes beyond the half spectrum).
  void validate() const;
};

// ---------------------------------------------------------------- the model

struct Model {
  BackboneConfig config;
  PeftConfig peft;        // kind == none until attach_peft
  BandSchedule schedule;  // valid for band kinds
  ParamStore store;
};

// Fresh backbone: lift/project affine maps, per-layer per-block complex
// mixing pairs, pointwise MLPs.  Everything trainable.
Model make_model(const BackboneConfig& config, Prng& rng);

// ------------------------------------------------------------------ regions

// A rectangular index region of the retained spectral corner, tagged with the
// band whose adapters act on it (-1: mixing only).
struct SpectralRegion {
  AxisRanges ranges;  // one half-open range per spatial axis
  int band = -1;
};

// Partition of the corner [0,M)^dims.  Without a schedule: one untagged
// region.  With one: per-band diagonal squares plus untagged remainder
// rectangles, or full L-inf annuli when `annulus` is set.
std::vector<SpectralRegion> make_regions(std::size_t spatial_dims,
                                         std::size_t modes,
                                         const BandSchedule* schedule,
                                         bool annulus);

// ------------------------------------------------------------------ forward

struct ForwardResult {
  NodeId output = 0;                  // {batch, grid..., out_channels}
  std::vector<NodeId> param_nodes;    // parallel to store indices
};

// Builds the full differentiable forward pass on `tape` for a batched input
// {batch, grid..., in_channels}.  Every store parameter becomes a tape input
// so callers can request gradients for any subset.
ForwardResult model_forward(Tape& tape, const Model& model,
                            const Tensor& batch_input);

// Convenience inference: forward without keeping the tape.
Tensor forward_field(const Model& model, const Tensor& batch_input);

}  // namespace splab
