#include "splab/backbone.hpp"

#include <numeric>
#include <sstream>
#include <string>

#include "splab/errors.hpp"
#include "splab/fft.hpp"

namespace splab {

// ---------------------------------------------------------------- parameters

std::size_t ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name) != 0) {
    throw config_error("param store: duplicate name '" + name + "'");
  }
  const std::size_t i = names_.size();
  index_[name] = i;
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  trainable_.push_back(trainable ? 1 : 0);
  return i;
}

std::size_t ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? npos : it->second;
}

std::size_t ParamStore::at(const std::string& name) const {
  const std::size_t i = find(name);
  if (i == npos) throw config_error("param store: no parameter '" + name + "'");
  return i;
}

std::vector<std::size_t> ParamStore::trainable_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trainable_.size(); ++i) {
    if (trainable_[i]) out.push_back(i);
  }
  return out;
}

// -------------------------------------------------------------------- config

void BackboneConfig::validate() const {
  if (spatial_dims != 1 && spatial_dims != 2) {
    throw config_error("backbone: spatial_dims must be 1 or 2");
  }
  if (grid.size() != spatial_dims) {
    throw config_error("backbone: grid must list one size per spatial axis");
  }
  for (std::size_t n : grid) {
    if (n < 2 || !is_power_of_two(n)) {
      throw config_error("backbone: grid sizes must be powers of two >= 2");
    }
  }
  if (in_channels == 0 || out_channels == 0 || width == 0 || blocks == 0 ||
      layers == 0 || modes == 0 || temporal_modes == 0) {
    throw config_error("backbone: all sizes must be positive");
  }
  if (width % blocks != 0) {
    throw config_error("backbone: width must be divisible by blocks");
  }
  for (std::size_t a = 0; a < spatial_dims; ++a) {
    const bool last = a + 1 == spatial_dims;
    const std::size_t limit = last ? grid[a] / 2 + 1 : grid[a];
    if (modes > limit) {
      throw config_error("backbone: retained modes exceed the spectrum");
    }
  }
}

// ---------------------------------------------------------------- the model

namespace {

std::string layer_prefix(std::size_t l) {
  std::ostringstream os;
  os << "layer" << l << ".";
  return os.str();
}

std::string mix_name(std::size_t l, const char* which, std::size_t k,
                     const char* part) {
  std::ostringstream os;
  os << "layer" << l << "." << which << ".k" << k << "." << part;
  return os.str();
}

}  // namespace

Model make_model(const BackboneConfig& config, Prng& rng) {
  config.validate();
  Model model;
  model.config = config;
  ParamStore& st = model.store;

  const std::size_t c = config.width;
  const std::size_t d = config.block_width();
  const std::size_t h = config.temporal_modes;
  // Spectral mixing pairs follow the usual 1/(fan_in*fan_out) scale so the
  // kernel starts near-contractive regardless of the block split.
  const double mix_std =
      1.0 / (static_cast<double>(d) * static_cast<double>(d) *
             static_cast<double>(h));

  st.add("lift.w", rng.kaiming_uniform_tensor({config.in_channels, c},
                                              config.in_channels),
         true);
  st.add("lift.b", Tensor::zeros({c}), true);
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (std::size_t k = 0; k < config.blocks; ++k) {
      st.add(mix_name(l, "w1", k, "re"),
             rng.normal_tensor({d, d * h}, 0.0, mix_std), true);
      st.add(mix_name(l, "w1", k, "im"),
             rng.normal_tensor({d, d * h}, 0.0, mix_std), true);
      st.add(mix_name(l, "w2", k, "re"),
             rng.normal_tensor({d * h, d}, 0.0, mix_std), true);
      st.add(mix_name(l, "w2", k, "im"),
             rng.normal_tensor({d * h, d}, 0.0, mix_std), true);
    }
    if (config.use_mlp) {
      const std::string lp = layer_prefix(l);
      st.add(lp + "mlp.w1", rng.kaiming_uniform_tensor({c, c}, c), true);
      st.add(lp + "mlp.b1", Tensor::zeros({c}), true);
      st.add(lp + "mlp.w2", rng.kaiming_uniform_tensor({c, c}, c), true);
      st.add(lp + "mlp.b2", Tensor::zeros({c}), true);
    }
  }
  st.add("proj.w", rng.kaiming_uniform_tensor({c, config.out_channels}, c),
         true);
  st.add("proj.b", Tensor::zeros({config.out_channels}), true);
  return model;
}

// ------------------------------------------------------------------ regions

std::vector<SpectralRegion> make_regions(std::size_t spatial_dims,
                                         std::size_t modes,
                                         const BandSchedule* schedule,
                                         bool annulus) {
  if (spatial_dims != 1 && spatial_dims != 2) {
    throw config_error("make_regions: spatial_dims must be 1 or 2");
  }
  std::vector<SpectralRegion> out;
  auto push = [&](AxisRanges ranges, int band) {
    for (const auto& r : ranges) {
      if (r.first >= r.second) return;  // empty region, skip
    }
    SpectralRegion reg;
    reg.ranges = std::move(ranges);
    reg.band = band;
    out.push_back(std::move(reg));
  };

  if (schedule == nullptr) {
    AxisRanges full(spatial_dims, {0, modes});
    push(std::move(full), -1);
    return out;
  }
  if (schedule->modes != modes) {
    throw config_error("make_regions: schedule was built for different modes");
  }
  const auto& b = schedule->boundaries;
  for (std::size_t j = 0; j + 1 < b.size(); ++j) {
    const std::size_t lo = b[j];
    const std::size_t hi = b[j + 1];
    const int band = static_cast<int>(j);
    if (spatial_dims == 1) {
      push({{lo, hi}}, band);
      continue;
    }
    if (annulus) {
      // L-infinity shell max(kx, ky) in [lo, hi): everything adapted.
      push({{lo, hi}, {0, hi}}, band);
      push({{0, lo}, {lo, hi}}, band);
    } else {
      // Diagonal square adapted; the off-diagonal rest of the shell is
      // mixed by the kernel but carries no adapter.
      push({{lo, hi}, {lo, hi}}, band);
      push({{lo, hi}, {0, lo}}, -1);
      push({{0, lo}, {lo, hi}}, -1);
    }
  }
  return out;
}

// ------------------------------------------------------------------ forward

namespace {

// Per-call context: tape, parameter lookup, and the global nonlinearity
// switch used by the translation-equivariance harness.
struct ForwardCtx {
  Tape& tape;
  const Model& model;
  const std::vector<NodeId>& params;

  NodeId pnode(const std::string& name) const {
    return params[model.store.at(name)];
  }
  NodeId act(NodeId x) const {
    return model.config.identity_gelu ? x : tape.gelu(x);
  }
};

// x @ w^T + b for a stored (out x in) weight.
NodeId affine_t(ForwardCtx& cx, NodeId x, const std::string& w_name,
                const std::string& b_name) {
  NodeId h = cx.tape.matmul(x, cx.tape.transpose(cx.pnode(w_name)));
  return cx.tape.add_bias(h, cx.pnode(b_name));
}

// Slice coefficient tensor {D, r, terms} down to term n as an {r, D} matrix
// ready for rows @ it.
NodeId term_matrix(ForwardCtx& cx, NodeId coeff, std::size_t n) {
  const Tensor& v = cx.tape.value(coeff);
  const std::size_t dim = v.shape[0];
  const std::size_t r = v.shape[1];
  NodeId sl = cx.tape.slice(coeff, {{0, dim}, {0, r}, {n, n + 1}});
  return cx.tape.transpose(cx.tape.reshape(sl, {dim, r}));
}

// One bottleneck/variant site applied to {rows, dim} coefficients.
NodeId apply_site(ForwardCtx& cx, NodeId x, const std::string& prefix,
                  std::size_t dim) {
  Tape& t = cx.tape;
  if (t.value(x).shape[1] != dim) {
    throw config_error("apply_site: stage width mismatch");
  }
  const PeftConfig& pc = cx.model.peft;
  switch (pc.kind) {
    case PeftKind::adapter:
    case PeftKind::fadapter:
    case PeftKind::finverse_adapter: {
      NodeId h = affine_t(cx, x, prefix + "w_down", prefix + "b_down");
      h = cx.act(h);
      NodeId up = affine_t(cx, h, prefix + "w_up", prefix + "b_up");
      return t.add(x, t.scale(up, pc.adapter_scale));
    }
    case PeftKind::chebyshev: {
      NodeId z = t.tanh_op(
          affine_t(cx, x, prefix + "w_down", prefix + "b_down"));
      NodeId coeff = cx.pnode(prefix + "coeff");
      const std::size_t terms = t.value(coeff).shape[2];
      const Tensor& zv = t.value(z);
      NodeId prev = t.input(Tensor::full(zv.shape, 1.0));  // T_0
      NodeId curr = z;                                     // T_1
      NodeId y = t.matmul(prev, term_matrix(cx, coeff, 0));
      for (std::size_t n = 1; n < terms; ++n) {
        y = t.add(y, t.matmul(curr, term_matrix(cx, coeff, n)));
        if (n + 1 < terms) {
          NodeId next = t.sub(t.scale(t.mul(z, curr), 2.0), prev);
          prev = curr;
          curr = next;
        }
      }
      return t.add(x, t.scale_by(y, cx.pnode(prefix + "alpha")));
    }
    case PeftKind::fourierkan: {
      NodeId z =
          cx.act(affine_t(cx, x, prefix + "w_down", prefix + "b_down"));
      NodeId a_coeff = cx.pnode(prefix + "a_coeff");
      NodeId b_coeff = cx.pnode(prefix + "b_coeff");
      const std::size_t order = t.value(a_coeff).shape[2];
      NodeId y = 0;
      bool first = true;
      for (std::size_t n = 0; n < order; ++n) {
        NodeId arg = t.scale(z, static_cast<double>(n + 1));
        NodeId part =
            t.add(t.matmul(t.cos_op(arg), term_matrix(cx, a_coeff, n)),
                  t.matmul(t.sin_op(arg), term_matrix(cx, b_coeff, n)));
        y = first ? part : t.add(y, part);
        first = false;
      }
      NodeId ln = t.layer_norm(y, cx.pnode(prefix + "ln_gamma"),
                               cx.pnode(prefix + "ln_beta"));
      return t.add(x, t.scale_by(ln, cx.pnode(prefix + "alpha")));
    }
    case PeftKind::waveact: {
      NodeId z = affine_t(cx, x, prefix + "w_down", prefix + "b_down");
      NodeId zt = t.add(t.scale_by(t.sin_op(z), cx.pnode(prefix + "wave_a")),
                        t.scale_by(t.cos_op(z), cx.pnode(prefix + "wave_b")));
      NodeId up = affine_t(cx, zt, prefix + "w_up", prefix + "b_up");
      return t.add(x, t.scale_by(up, cx.pnode(prefix + "alpha")));
    }
    default:
      throw config_error("apply_site: not a band-adapted kind");
  }
}

// Per-block adaptation of one stage: slice each channel block of the
// {rows, blocks*dim} matrix, run its site, stitch the blocks back together.
NodeId apply_stage(ForwardCtx& cx, NodeId x, std::size_t layer, int band,
                   const char* stage, std::size_t dim) {
  Tape& t = cx.tape;
  const std::size_t rows = t.value(x).shape[0];
  const std::size_t blocks = cx.model.config.blocks;
  NodeId out = 0;
  for (std::size_t k = 0; k < blocks; ++k) {
    NodeId sl = t.slice(x, {{0, rows}, {k * dim, (k + 1) * dim}});
    NodeId ad = apply_site(
        cx, sl,
        peft_site_prefix(layer, k, static_cast<std::size_t>(band), stage),
        dim);
    out = k == 0 ? ad : t.concat(out, ad, 1);
  }
  return out;
}

// Assemble the layer's effective complex mixing matrix: the block-diagonal
// embedding of every per-block pair, plus any low-rank delta, all on-tape so
// gradients flow back to the pieces.
VarPair build_effective_mix(ForwardCtx& cx, std::size_t layer, bool first) {
  Tape& t = cx.tape;
  const BackboneConfig& bc = cx.model.config;
  const std::size_t d = bc.block_width();
  const std::size_t h = bc.temporal_modes;
  const std::size_t block_rows = first ? d : d * h;
  const std::size_t block_cols = first ? d * h : d;
  const std::size_t rows = bc.blocks * block_rows;
  const std::size_t cols = bc.blocks * block_cols;
  const char* which = first ? "w1" : "w2";

  NodeId acc_re = t.input(Tensor::zeros({rows, cols}));
  NodeId acc_im = t.input(Tensor::zeros({rows, cols}));
  for (std::size_t k = 0; k < bc.blocks; ++k) {
    const AxisRanges at = {{k * block_rows, (k + 1) * block_rows},
                           {k * block_cols, (k + 1) * block_cols}};
    acc_re = t.add(acc_re, t.scatter(cx.pnode(mix_name(layer, which, k, "re")),
                                     {rows, cols}, at));
    acc_im = t.add(acc_im, t.scatter(cx.pnode(mix_name(layer, which, k, "im")),
                                     {rows, cols}, at));
  }

  const PeftConfig& pc = cx.model.peft;
  const double alpha =
      pc.lora_lambda <= 0.0 ? 1.0
                            : pc.lora_lambda / static_cast<double>(pc.rank);
  if (pc.kind == PeftKind::lora) {
    const std::string prefix = lora_param_prefix(layer, which);
    VarPair b = {cx.pnode(prefix + "b.re"), cx.pnode(prefix + "b.im")};
    VarPair a = {cx.pnode(prefix + "a.re"), cx.pnode(prefix + "a.im")};
    VarPair delta = t.complex_matmul(b, a);
    acc_re = t.add(acc_re, t.scale(delta.re, alpha));
    acc_im = t.add(acc_im, t.scale(delta.im, alpha));
  } else if (pc.kind == PeftKind::blockwise_lora) {
    for (std::size_t k = 0; k < bc.blocks; ++k) {
      const std::string prefix = blockwise_lora_param_prefix(layer, which, k);
      VarPair b = {cx.pnode(prefix + "b.re"), cx.pnode(prefix + "b.im")};
      VarPair a = {cx.pnode(prefix + "a.re"), cx.pnode(prefix + "a.im")};
      VarPair delta = t.complex_matmul(b, a);
      const AxisRanges at = {{k * block_rows, (k + 1) * block_rows},
                             {k * block_cols, (k + 1) * block_cols}};
      acc_re = t.add(acc_re,
                     t.scale(t.scatter(delta.re, {rows, cols}, at), alpha));
      acc_im = t.add(acc_im,
                     t.scale(t.scatter(delta.im, {rows, cols}, at), alpha));
    }
  }
  return {acc_re, acc_im};
}

}  // namespace

ForwardResult model_forward(Tape& tape, const Model& model,
                            const Tensor& batch_input) {
  const BackboneConfig& bc = model.config;
  bc.validate();
  const std::size_t dims = bc.spatial_dims;
  if (batch_input.rank() != dims + 2) {
    throw config_error("model_forward: input must be {batch, grid..., ch}");
  }
  const std::size_t batch = batch_input.shape[0];
  if (batch == 0) throw config_error("model_forward: empty batch");
  for (std::size_t a = 0; a < dims; ++a) {
    if (batch_input.shape[1 + a] != bc.grid[a]) {
      throw config_error("model_forward: input grid does not match config");
    }
  }
  if (batch_input.shape.back() != bc.in_channels) {
    throw config_error("model_forward: input channels do not match config");
  }
  const bool banded = is_band_kind(model.peft.kind);
  if (banded && model.schedule.bands == 0) {
    throw config_error("model_forward: band kind without a schedule");
  }

  ForwardResult res;
  res.param_nodes.resize(model.store.size());
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    res.param_nodes[i] = tape.input(model.store.value(i));
  }
  ForwardCtx cx{tape, model, res.param_nodes};

  const std::size_t c = bc.width;
  const std::size_t d = bc.block_width();
  const std::size_t h = bc.temporal_modes;
  std::size_t cells = 1;
  for (std::size_t n : bc.grid) cells *= n;

  // Lift to width-C channels.
  NodeId x = tape.input(batch_input);
  NodeId z = tape.reshape(x, {batch * cells, bc.in_channels});
  z = tape.add_bias(tape.matmul(z, cx.pnode("lift.w")), cx.pnode("lift.b"));
  std::vector<std::size_t> field_shape;
  field_shape.push_back(batch);
  for (std::size_t n : bc.grid) field_shape.push_back(n);
  field_shape.push_back(c);
  z = tape.reshape(z, field_shape);

  std::vector<std::size_t> axes(dims);
  std::iota(axes.begin(), axes.end(), 1);
  std::vector<std::size_t> half_shape = field_shape;
  half_shape[axes.back()] = bc.grid.back() / 2 + 1;

  const std::vector<SpectralRegion> regions =
      make_regions(dims, bc.modes, banded ? &model.schedule : nullptr,
                   model.peft.annulus_bands);

  for (std::size_t l = 0; l < bc.layers; ++l) {
    VarPair spec = tape.rfft(z, axes);
    VarPair w1 = build_effective_mix(cx, l, true);
    VarPair w2 = build_effective_mix(cx, l, false);
    NodeId acc_re = tape.input(Tensor::zeros(half_shape));
    NodeId acc_im = tape.input(Tensor::zeros(half_shape));

    for (const SpectralRegion& region : regions) {
      AxisRanges at;
      at.reserve(dims + 2);
      at.push_back({0, batch});
      std::size_t rows = batch;
      for (const auto& r : region.ranges) {
        at.push_back(r);
        rows *= r.second - r.first;
      }
      at.push_back({0, c});

      NodeId rs_re = tape.reshape(tape.slice(spec.re, at), {rows, c});
      NodeId rs_im = tape.reshape(tape.slice(spec.im, at), {rows, c});
      const bool adapt = banded && region.band >= 0;
      if (adapt) {
        rs_re = apply_stage(cx, rs_re, l, region.band, "in", d);
        rs_im = apply_stage(cx, rs_im, l, region.band, "in", d);
      }
      VarPair mixed = tape.complex_matmul({rs_re, rs_im}, w1);
      NodeId mid_re = cx.act(mixed.re);
      NodeId mid_im = cx.act(mixed.im);
      if (adapt) {
        mid_re = apply_stage(cx, mid_re, l, region.band, "mid", d * h);
        mid_im = apply_stage(cx, mid_im, l, region.band, "mid", d * h);
      }
      VarPair out = tape.complex_matmul({mid_re, mid_im}, w2);
      NodeId out_re = out.re;
      NodeId out_im = out.im;
      if (adapt) {
        out_re = apply_stage(cx, out_re, l, region.band, "out", d);
        out_im = apply_stage(cx, out_im, l, region.band, "out", d);
      }

      std::vector<std::size_t> block_shape;
      block_shape.push_back(batch);
      for (const auto& r : region.ranges) {
        block_shape.push_back(r.second - r.first);
      }
      block_shape.push_back(c);
      out_re = tape.reshape(out_re, block_shape);
      out_im = tape.reshape(out_im, block_shape);
      acc_re = tape.add(acc_re, tape.scatter(out_re, half_shape, at));
      acc_im = tape.add(acc_im, tape.scatter(out_im, half_shape, at));
    }

    NodeId spatial = tape.irfft({acc_re, acc_im}, axes, field_shape);
    NodeId branch = spatial;
    if (bc.use_mlp) {
      const std::string lp = layer_prefix(l);
      NodeId m = tape.reshape(spatial, {batch * cells, c});
      m = tape.add_bias(tape.matmul(m, cx.pnode(lp + "mlp.w1")),
                        cx.pnode(lp + "mlp.b1"));
      m = cx.act(m);
      m = tape.add_bias(tape.matmul(m, cx.pnode(lp + "mlp.w2")),
                        cx.pnode(lp + "mlp.b2"));
      branch = tape.reshape(m, field_shape);
    }
    z = tape.add(z, branch);
  }

  NodeId o = tape.reshape(z, {batch * cells, c});
  o = tape.add_bias(tape.matmul(o, cx.pnode("proj.w")), cx.pnode("proj.b"));
  std::vector<std::size_t> out_shape = field_shape;
  out_shape.back() = bc.out_channels;
  res.output = tape.reshape(o, out_shape);
  return res;
}

Tensor forward_field(const Model& model, const Tensor& batch_input) {
  Tape tape;
  ForwardResult r = model_forward(tape, model, batch_input);
  return tape.value(r.output);
}

}  // namespace splab
