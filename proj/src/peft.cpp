#include "splab/peft.hpp"

#include <cmath>
#include <sstream>

#include "splab/autodiff.hpp"
#include "splab/backbone.hpp"
#include "splab/errors.hpp"

namespace splab {

namespace {

// Flattens z to rows x D, applies f, restores the shape.
template <typename Fn>
Tensor over_last_axis(const Tensor& z, std::size_t dim, Fn&& fn) {
  if (z.rank() < 1 || z.shape.back() != dim) {
    throw config_error("adapter: last axis does not match adapter dimension");
  }
  Tensor rows = z.reshaped({z.size() / dim, dim});
  Tensor out = fn(rows);
  return out.reshaped(z.shape);
}

Tensor affine_rows(const Tensor& rows, const Tensor& w, const Tensor& b) {
  Tensor out = matmul(rows, transpose2d(w));
  const std::size_t d = b.shape[0];
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i % d];
  return out;
}

void gelu_inplace(Tensor& t) {
  for (double& v : t.data) v = gelu_scalar(v);
}

}  // namespace

// ------------------------------------------------------------------ schedule

std::vector<std::size_t> band_boundaries(std::size_t modes, std::size_t bands) {
  if (bands < 1) throw config_error("band_boundaries: need at least one band");
  if (bands > modes) {
    throw config_error("band_boundaries: more bands than retained modes");
  }
  std::vector<std::size_t> out(bands + 1);
  for (std::size_t b = 0; b <= bands; ++b) out[b] = b * modes / bands;
  return out;
}

namespace {

std::vector<std::size_t> widths_from_centers(std::size_t r_min,
                                             std::size_t r_max, double p,
                                             const std::vector<std::size_t>& boundaries,
                                             std::size_t modes,
                                             bool inverse) {
  if (r_min > r_max) throw config_error("width schedule: r_min > r_max");
  if (r_min == 0) throw config_error("width schedule: zero minimum width");
  if (!(p > 0.0)) throw config_error("width schedule: exponent must be > 0");
  if (boundaries.size() < 2) {
    throw config_error("width schedule: missing band boundaries");
  }
  std::vector<std::size_t> widths(boundaries.size() - 1);
  const double span = static_cast<double>(r_max - r_min);
  for (std::size_t b = 0; b + 1 < boundaries.size(); ++b) {
    const double center =
        0.5 * (static_cast<double>(boundaries[b]) +
               static_cast<double>(boundaries[b + 1]));
    const double frac = center / static_cast<double>(modes);
    const double t = inverse ? frac : 1.0 - frac;
    const double raw = static_cast<double>(r_min) + span * std::pow(t, p);
    widths[b] = static_cast<std::size_t>(std::floor(raw));
  }
  return widths;
}

}  // namespace

std::vector<std::size_t> allocate_widths(std::size_t r_min, std::size_t r_max,
                                         double p,
                                         const std::vector<std::size_t>& boundaries,
                                         std::size_t modes) {
  return widths_from_centers(r_min, r_max, p, boundaries, modes, false);
}

std::vector<std::size_t> inverse_widths(std::size_t r_min, std::size_t r_max,
                                        double p,
                                        const std::vector<std::size_t>& boundaries,
                                        std::size_t modes) {
  return widths_from_centers(r_min, r_max, p, boundaries, modes, true);
}

BandSchedule make_band_schedule(std::size_t modes, std::size_t bands,
                                std::size_t r_min, std::size_t r_max, double p,
                                bool inverse) {
  BandSchedule s;
  s.modes = modes;
  s.bands = bands;
  s.r_min = r_min;
  s.r_max = r_max;
  s.p = p;
  s.inverse = inverse;
  s.boundaries = band_boundaries(modes, bands);
  s.centers.resize(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    s.centers[b] = 0.5 * (static_cast<double>(s.boundaries[b]) +
                          static_cast<double>(s.boundaries[b + 1]));
  }
  s.widths = inverse ? inverse_widths(r_min, r_max, p, s.boundaries, modes)
                     : allocate_widths(r_min, r_max, p, s.boundaries, modes);
  return s;
}

// ------------------------------------------------------------ param counting

ParamCounts count_params_eq13(std::size_t d, std::size_t k_blocks,
                              std::size_t h_t,
                              const std::vector<std::size_t>& widths) {
  if (d == 0 || k_blocks == 0 || h_t == 0) {
    throw config_error("count_params_eq13: zero dimension");
  }
  long long sum_r = 0;
  for (std::size_t r : widths) sum_r += static_cast<long long>(r);
  ParamCounts out;
  const long long dd = static_cast<long long>(d);
  const long long kk = static_cast<long long>(k_blocks);
  const long long hh = static_cast<long long>(h_t);
  out.formula = (2 * dd + 1) * kk * (2 + hh) * sum_r;
  // One bottleneck adapter of input size D and width r holds
  // 2*D*r + r + D parameters (both projections plus both biases).
  auto one = [](long long D, long long r) { return 2 * D * r + r + D; };
  long long actual = 0;
  for (std::size_t r : widths) {
    const long long rr = static_cast<long long>(r);
    actual += one(dd, rr) + one(dd * hh, rr) + one(dd, rr);
  }
  out.actual = kk * actual;
  return out;
}

// ------------------------------------------------------- bottleneck adapters

AdapterParams make_adapter_params(std::size_t dim, std::size_t bottleneck,
                                  double scale, Prng& rng) {
  if (dim == 0 || bottleneck == 0) {
    throw config_error("adapter: zero dimension");
  }
  AdapterParams p;
  p.w_down = rng.kaiming_uniform_tensor({bottleneck, dim}, dim);
  p.b_down = Tensor::zeros({bottleneck});
  p.w_up = Tensor::zeros({dim, bottleneck});
  p.b_up = Tensor::zeros({dim});
  p.scale = scale;
  return p;
}

Tensor adapter_forward(const Tensor& z, const AdapterParams& params) {
  const std::size_t dim = params.w_up.shape[0];
  return over_last_axis(z, dim, [&](const Tensor& rows) {
    Tensor h = affine_rows(rows, params.w_down, params.b_down);
    gelu_inplace(h);
    Tensor up = affine_rows(h, params.w_up, params.b_up);
    Tensor out = rows;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.data[i] += params.scale * up.data[i];
    }
    return out;
  });
}

// -------------------------------------------------------------------- LoRA

LoraParams make_lora_params(std::size_t dim, std::size_t rank, double lambda,
                            Prng& rng) {
  if (rank == 0 || rank > dim) {
    throw config_error("lora: rank must lie in [1, dim]");
  }
  LoraParams p;
  p.a = rng.kaiming_uniform_tensor({rank, dim}, dim);
  p.b = Tensor::zeros({dim, rank});
  p.alpha = (lambda <= 0.0 ? static_cast<double>(rank) : lambda) /
            static_cast<double>(rank);
  return p;
}

Tensor lora_forward(const Tensor& x, const Tensor& w0,
                    const LoraParams& params) {
  if (w0.rank() != 2) throw config_error("lora_forward: w0 must be a matrix");
  const std::size_t r = params.a.shape[0];
  if (params.a.shape[1] != w0.shape[1] || params.b.shape[0] != w0.shape[0] ||
      params.b.shape[1] != r) {
    throw config_error("lora_forward: factor shapes do not match w0");
  }
  Tensor xc = x.rank() == 1 ? x.reshaped({x.shape[0], 1}) : x;
  Tensor base = matmul(w0, xc);
  Tensor low = matmul(params.b, matmul(params.a, xc));
  Tensor out = base + params.alpha * low;
  return x.rank() == 1 ? out.reshaped({out.shape[0]}) : out;
}

// --------------------------------------------------------- variant adapters

ChebyshevParams make_chebyshev_params(std::size_t dim, std::size_t bottleneck,
                                      std::size_t order, Prng& rng) {
  ChebyshevParams p;
  p.w_down = rng.kaiming_uniform_tensor({bottleneck, dim}, dim);
  p.b_down = Tensor::zeros({bottleneck});
  p.coeff = Tensor::zeros({dim, bottleneck, order + 1});
  p.alpha = 1.0;
  return p;
}

Tensor chebyshev_adapter_forward(const Tensor& x,
                                 const ChebyshevParams& params) {
  const std::size_t dim = params.coeff.shape[0];
  const std::size_t r = params.coeff.shape[1];
  const std::size_t terms = params.coeff.shape[2];
  return over_last_axis(x, dim, [&](const Tensor& rows) {
    Tensor z = affine_rows(rows, params.w_down, params.b_down);
    for (double& v : z.data) v = std::tanh(v);
    const std::size_t n_rows = z.shape[0];
    Tensor prev = Tensor::full({n_rows, r}, 1.0);  // T_0
    Tensor curr = z;                               // T_1
    Tensor out = rows;
    for (std::size_t n = 0; n < terms; ++n) {
      const Tensor& tn = (n == 0) ? prev : curr;
      for (std::size_t row = 0; row < n_rows; ++row) {
        for (std::size_t k = 0; k < dim; ++k) {
          double acc = 0.0;
          for (std::size_t i = 0; i < r; ++i) {
            acc += params.coeff.data[(k * r + i) * terms + n] *
                   tn.data[row * r + i];
          }
          out.data[row * dim + k] += params.alpha * acc;
        }
      }
      if (n >= 1 && n + 1 < terms) {
        Tensor next = Tensor::zeros({n_rows, r});
        for (std::size_t i = 0; i < next.size(); ++i) {
          next.data[i] = 2.0 * z.data[i] * curr.data[i] - prev.data[i];
        }
        prev = std::move(curr);
        curr = std::move(next);
      }
    }
    return out;
  });
}

FourierKanParams make_fourierkan_params(std::size_t dim, std::size_t bottleneck,
                                        std::size_t order, Prng& rng) {
  if (order == 0) throw config_error("fourierkan: series order must be >= 1");
  FourierKanParams p;
  p.w_down = rng.kaiming_uniform_tensor({bottleneck, dim}, dim);
  p.b_down = Tensor::zeros({bottleneck});
  p.a_coeff = Tensor::zeros({dim, bottleneck, order});
  p.b_coeff = Tensor::zeros({dim, bottleneck, order});
  // Random coefficient banks attenuated as (n+1)^-2 in the series frequency
  // n; the zero residual gate alpha alone guarantees identity at creation and
  // leaves the banks trainable from step one.
  const double base = 1.0 / std::sqrt(static_cast<double>(bottleneck));
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < bottleneck; ++i) {
      for (std::size_t j = 0; j < order; ++j) {
        const double n = static_cast<double>(j + 1);
        const double std_n = base / ((n + 1.0) * (n + 1.0));
        p.a_coeff.data[(k * bottleneck + i) * order + j] =
            rng.normal(0.0, std_n);
        p.b_coeff.data[(k * bottleneck + i) * order + j] =
            rng.normal(0.0, std_n);
      }
    }
  }
  p.ln_gamma = Tensor::full({dim}, 1.0);
  p.ln_beta = Tensor::zeros({dim});
  p.alpha = 0.0;
  return p;
}

Tensor fourierkan_adapter_forward(const Tensor& x,
                                  const FourierKanParams& params) {
  const std::size_t dim = params.a_coeff.shape[0];
  const std::size_t r = params.a_coeff.shape[1];
  const std::size_t order = params.a_coeff.shape[2];
  return over_last_axis(x, dim, [&](const Tensor& rows) {
    Tensor z = affine_rows(rows, params.w_down, params.b_down);
    gelu_inplace(z);
    const std::size_t n_rows = z.shape[0];
    Tensor y = Tensor::zeros({n_rows, dim});
    for (std::size_t row = 0; row < n_rows; ++row) {
      for (std::size_t k = 0; k < dim; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
          const double zi = z.data[row * r + i];
          for (std::size_t j = 0; j < order; ++j) {
            const double nz = static_cast<double>(j + 1) * zi;
            acc += params.a_coeff.data[(k * r + i) * order + j] * std::cos(nz) +
                   params.b_coeff.data[(k * r + i) * order + j] * std::sin(nz);
          }
        }
        y.data[row * dim + k] = acc;
      }
    }
    Tensor out = rows;
    const double dn = static_cast<double>(dim);
    for (std::size_t row = 0; row < n_rows; ++row) {
      double mean = 0.0;
      for (std::size_t k = 0; k < dim; ++k) mean += y.data[row * dim + k];
      mean /= dn;
      double var = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double c = y.data[row * dim + k] - mean;
        var += c * c;
      }
      var /= dn;
      const double inv = 1.0 / std::sqrt(var + params.ln_eps);
      for (std::size_t k = 0; k < dim; ++k) {
        const double xhat = (y.data[row * dim + k] - mean) * inv;
        out.data[row * dim + k] +=
            params.alpha *
            (params.ln_gamma.data[k] * xhat + params.ln_beta.data[k]);
      }
    }
    return out;
  });
}

WaveActParams make_waveact_params(std::size_t dim, std::size_t bottleneck,
                                  Prng& rng) {
  WaveActParams p;
  p.w_down = rng.kaiming_uniform_tensor({bottleneck, dim}, dim);
  p.b_down = Tensor::zeros({bottleneck});
  p.w_up = Tensor::zeros({dim, bottleneck});
  p.b_up = Tensor::zeros({dim});
  p.wave_a = 1.0;
  p.wave_b = 1.0;
  p.alpha = 1.0;
  return p;
}

Tensor waveact_adapter_forward(const Tensor& x, const WaveActParams& params) {
  const std::size_t dim = params.w_up.shape[0];
  return over_last_axis(x, dim, [&](const Tensor& rows) {
    Tensor z = affine_rows(rows, params.w_down, params.b_down);
    for (double& v : z.data) {
      v = params.wave_a * std::sin(v) + params.wave_b * std::cos(v);
    }
    Tensor up = affine_rows(z, params.w_up, params.b_up);
    Tensor out = rows;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.data[i] += params.alpha * up.data[i];
    }
    return out;
  });
}

// ------------------------------------------------------------- attachments

PeftKind peft_kind_from_string(const std::string& name) {
  if (name == "full") return PeftKind::full;
  if (name == "lora") return PeftKind::lora;
  if (name == "blockwise-lora") return PeftKind::blockwise_lora;
  if (name == "adapter") return PeftKind::adapter;
  if (name == "f-adapter") return PeftKind::fadapter;
  if (name == "f-inverse-adapter") return PeftKind::finverse_adapter;
  if (name == "chebyshev") return PeftKind::chebyshev;
  if (name == "fourierkan") return PeftKind::fourierkan;
  if (name == "waveact") return PeftKind::waveact;
  throw config_error(
      "unknown fine-tune kind '" + name +
      "'; valid kinds: lora, blockwise-lora, adapter, f-adapter, "
      "f-inverse-adapter, chebyshev, fourierkan, waveact, full");
}

std::string to_string(PeftKind kind) {
  switch (kind) {
    case PeftKind::none: return "none";
    case PeftKind::full: return "full";
    case PeftKind::lora: return "lora";
    case PeftKind::blockwise_lora: return "blockwise-lora";
    case PeftKind::adapter: return "adapter";
    case PeftKind::fadapter: return "f-adapter";
    case PeftKind::finverse_adapter: return "f-inverse-adapter";
    case PeftKind::chebyshev: return "chebyshev";
    case PeftKind::fourierkan: return "fourierkan";
    case PeftKind::waveact: return "waveact";
  }
  return "none";
}

bool is_band_kind(PeftKind kind) {
  switch (kind) {
    case PeftKind::adapter:
    case PeftKind::fadapter:
    case PeftKind::finverse_adapter:
    case PeftKind::chebyshev:
    case PeftKind::fourierkan:
    case PeftKind::waveact:
      return true;
    default:
      return false;
  }
}

std::string peft_site_prefix(std::size_t layer, std::size_t block,
                             std::size_t band, const char* stage) {
  std::ostringstream os;
  os << "peft.l" << layer << ".k" << block << ".b" << band << "." << stage
     << ".";
  return os.str();
}

std::string lora_param_prefix(std::size_t layer, const char* matrix) {
  std::ostringstream os;
  os << "peft.l" << layer << "." << matrix << ".lora.";
  return os.str();
}

std::string blockwise_lora_param_prefix(std::size_t layer, const char* matrix,
                                        std::size_t block) {
  std::ostringstream os;
  os << "peft.l" << layer << "." << matrix << ".k" << block << ".lora.";
  return os.str();
}

namespace {

void add_adapter_site(ParamStore& store, const std::string& prefix,
                      std::size_t dim, std::size_t width, double scale,
                      Prng& rng) {
  AdapterParams p = make_adapter_params(dim, width, scale, rng);
  store.add(prefix + "w_down", std::move(p.w_down), true);
  store.add(prefix + "b_down", std::move(p.b_down), true);
  store.add(prefix + "w_up", std::move(p.w_up), true);
  store.add(prefix + "b_up", std::move(p.b_up), true);
}

void add_chebyshev_site(ParamStore& store, const std::string& prefix,
                        std::size_t dim, std::size_t width, std::size_t order,
                        Prng& rng) {
  ChebyshevParams p = make_chebyshev_params(dim, width, order, rng);
  store.add(prefix + "w_down", std::move(p.w_down), true);
  store.add(prefix + "b_down", std::move(p.b_down), true);
  store.add(prefix + "coeff", std::move(p.coeff), true);
  store.add(prefix + "alpha", Tensor::full({1}, p.alpha), true);
}

void add_fourierkan_site(ParamStore& store, const std::string& prefix,
                         std::size_t dim, std::size_t width, std::size_t order,
                         Prng& rng) {
  FourierKanParams p = make_fourierkan_params(dim, width, order, rng);
  store.add(prefix + "w_down", std::move(p.w_down), true);
  store.add(prefix + "b_down", std::move(p.b_down), true);
  store.add(prefix + "a_coeff", std::move(p.a_coeff), true);
  store.add(prefix + "b_coeff", std::move(p.b_coeff), true);
  store.add(prefix + "ln_gamma", std::move(p.ln_gamma), true);
  store.add(prefix + "ln_beta", std::move(p.ln_beta), true);
  store.add(prefix + "alpha", Tensor::full({1}, p.alpha), true);
}

void add_waveact_site(ParamStore& store, const std::string& prefix,
                      std::size_t dim, std::size_t width, Prng& rng) {
  WaveActParams p = make_waveact_params(dim, width, rng);
  store.add(prefix + "w_down", std::move(p.w_down), true);
  store.add(prefix + "b_down", std::move(p.b_down), true);
  store.add(prefix + "w_up", std::move(p.w_up), true);
  store.add(prefix + "b_up", std::move(p.b_up), true);
  store.add(prefix + "wave_a", Tensor::full({1}, p.wave_a), true);
  store.add(prefix + "wave_b", Tensor::full({1}, p.wave_b), true);
  store.add(prefix + "alpha", Tensor::full({1}, p.alpha), true);
}

// One complex low-rank pair targeting a (rows x cols) mixing matrix:
// a: rank x cols (Kaiming), b: rows x rank (zero).
void add_complex_lora_pair(ParamStore& store, const std::string& prefix,
                           std::size_t rows, std::size_t cols,
                           std::size_t rank, Prng& rng) {
  store.add(prefix + "a.re", rng.kaiming_uniform_tensor({rank, cols}, cols),
            true);
  store.add(prefix + "a.im", rng.kaiming_uniform_tensor({rank, cols}, cols),
            true);
  store.add(prefix + "b.re", Tensor::zeros({rows, rank}), true);
  store.add(prefix + "b.im", Tensor::zeros({rows, rank}), true);
}

}  // namespace

void attach_peft(Model& model, const PeftConfig& config, Prng& rng) {
  if (model.peft.kind != PeftKind::none) {
    throw config_error("attach_peft: model already has an attachment");
  }
  if (config.kind == PeftKind::none) {
    throw config_error("attach_peft: no fine-tune kind selected");
  }
  const BackboneConfig& bc = model.config;
  if (bc.width % bc.blocks != 0) {
    throw config_error("attach_peft: width not divisible by block count");
  }
  const std::size_t d = bc.block_width();
  const std::size_t d_mid = d * bc.temporal_modes;

  // Backbone freezes for every kind except full fine-tuning.
  const bool freeze = config.kind != PeftKind::full;
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    model.store.set_trainable(i, !freeze);
  }

  model.peft = config;
  if (config.kind == PeftKind::full) return;

  if (config.kind == PeftKind::lora || config.kind == PeftKind::blockwise_lora) {
    const std::size_t dim =
        config.kind == PeftKind::lora ? bc.width : d;
    if (config.rank == 0 || config.rank > dim) {
      throw config_error("attach_peft: lora rank must lie in [1, target dim]");
    }
    for (std::size_t l = 0; l < bc.layers; ++l) {
      for (const char* matrix : {"w1", "w2"}) {
        // The first mix maps dim -> dim*h_t, the second maps back.
        const bool first = std::string(matrix) == "w1";
        const std::size_t rows = first ? dim : dim * bc.temporal_modes;
        const std::size_t cols = first ? dim * bc.temporal_modes : dim;
        if (config.kind == PeftKind::lora) {
          add_complex_lora_pair(model.store, lora_param_prefix(l, matrix),
                                rows, cols, config.rank, rng);
        } else {
          for (std::size_t k = 0; k < bc.blocks; ++k) {
            add_complex_lora_pair(
                model.store, blockwise_lora_param_prefix(l, matrix, k), rows,
                cols, config.rank, rng);
          }
        }
      }
    }
    return;
  }

  // Band-scheduled families; the flat "adapter" kind pins every band to
  // the minimum width, the frequency-aware kinds grade widths by band.
  const bool uniform = config.kind == PeftKind::adapter;
  const bool inverse = config.kind == PeftKind::finverse_adapter;
  model.schedule = make_band_schedule(
      bc.modes, config.bands, config.r_min,
      uniform ? config.r_min : config.r_max, config.p, inverse);
  for (std::size_t l = 0; l < bc.layers; ++l) {
    for (std::size_t k = 0; k < bc.blocks; ++k) {
      for (std::size_t b = 0; b < config.bands; ++b) {
        const std::size_t r = model.schedule.widths[b];
        for (const char* stage : {"in", "mid", "out"}) {
          const std::size_t dim =
              std::string(stage) == "mid" ? d_mid : d;
          const std::string prefix = peft_site_prefix(l, k, b, stage);
          switch (config.kind) {
            case PeftKind::adapter:
            case PeftKind::fadapter:
            case PeftKind::finverse_adapter:
              add_adapter_site(model.store, prefix, dim, r,
                               config.adapter_scale, rng);
              break;
            case PeftKind::chebyshev:
              add_chebyshev_site(model.store, prefix, dim, r,
                                 config.series_order, rng);
              break;
            case PeftKind::fourierkan:
              add_fourierkan_site(model.store, prefix, dim, r,
                                  config.series_order, rng);
              break;
            case PeftKind::waveact:
              add_waveact_site(model.store, prefix, dim, r, rng);
              break;
            default:
              throw config_error("attach_peft: unsupported kind");
          }
        }
      }
    }
  }
}

TrainableReport census_params(const Model& model) {
  TrainableReport rep;
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    const long long n = static_cast<long long>(model.store.value(i).size());
    rep.total += n;
    if (model.store.trainable(i)) rep.trainable += n;
  }
  if (model.peft.kind == PeftKind::adapter ||
      model.peft.kind == PeftKind::fadapter ||
      model.peft.kind == PeftKind::finverse_adapter) {
    const ParamCounts c = count_params_eq13(
        model.config.block_width(), model.config.blocks,
        model.config.temporal_modes, model.schedule.widths);
    rep.formula = c.formula * static_cast<long long>(model.config.layers);
  }
  return rep;
}

}  // namespace splab
