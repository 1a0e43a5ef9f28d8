#include "splab/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "splab/errors.hpp"

namespace splab {

namespace {

const double kGeluA = std::sqrt(2.0 / std::numbers::pi);
constexpr double kGeluB = 0.044715;

void decode_index(std::size_t flat, const std::vector<std::size_t>& shape,
                  std::vector<std::size_t>& index) {
  for (std::size_t a = shape.size(); a-- > 0;) {
    index[a] = flat % shape[a];
    flat /= shape[a];
  }
}

void validate_ranges(const AxisRanges& ranges,
                     const std::vector<std::size_t>& shape) {
  if (ranges.size() != shape.size()) {
    throw config_error("slice/scatter: range rank mismatch");
  }
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (ranges[a].first >= ranges[a].second ||
        ranges[a].second > shape[a]) {
      throw config_error("slice/scatter: range out of bounds");
    }
  }
}

// Copy between a full tensor and the sub-block described by `ranges`.
// forward=true reads full into block; otherwise adds block into full.
void move_block(Tensor& full, Tensor& block, const AxisRanges& ranges,
                bool into_block) {
  std::vector<std::size_t> bidx(block.rank());
  std::vector<std::size_t> fidx(block.rank());
  for (std::size_t f = 0; f < block.size(); ++f) {
    decode_index(f, block.shape, bidx);
    for (std::size_t a = 0; a < bidx.size(); ++a) {
      fidx[a] = ranges[a].first + bidx[a];
    }
    const std::size_t off = full.offset(fidx);
    if (into_block) {
      block.data[f] = full.data[off];
    } else {
      full.data[off] += block.data[f];
    }
  }
}

}  // namespace

double gelu_scalar(double x) {
  const double u = kGeluA * (x + kGeluB * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
  const double u = kGeluA * (x + kGeluB * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluA * (1.0 + 3.0 * kGeluB * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

NodeId Tape::emplace(Tensor value, std::function<void(Tape&)> backward) {
  nodes_.push_back(Node{std::move(value), std::move(backward)});
  grads_.emplace_back();
  grad_set_.push_back(0);
  return nodes_.size() - 1;
}

NodeId Tape::input(Tensor value) { return emplace(std::move(value), {}); }

const Tensor& Tape::value(NodeId id) const {
  if (id >= nodes_.size()) throw config_error("tape: node id out of range");
  return nodes_[id].value;
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  if (!grad_set_[id]) {
    grads_[id] = g;
    grad_set_[id] = 1;
  } else {
    Tensor& acc = grads_[id];
    for (std::size_t i = 0; i < acc.data.size(); ++i) {
      acc.data[i] += g.data[i];
    }
  }
}

Tensor& Tape::grad_ref(NodeId id) { return grads_[id]; }

bool Tape::has_grad(NodeId id) const { return grad_set_[id] != 0; }

NodeId Tape::add(NodeId a, NodeId b) {
  Tensor out = value(a) + value(b);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, a, b](Tape& t) {
    t.accumulate(a, t.grad_ref(id));
    t.accumulate(b, t.grad_ref(id));
  };
  return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
  Tensor out = value(a) - value(b);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, a, b](Tape& t) {
    t.accumulate(a, t.grad_ref(id));
    t.accumulate(b, -1.0 * t.grad_ref(id));
  };
  return id;
}

NodeId Tape::scale(NodeId a, double s) {
  Tensor out = s * value(a);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, a, s](Tape& t) {
    t.accumulate(a, s * t.grad_ref(id));
  };
  return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
  Tensor out = value(a) * value(b);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, a, b](Tape& t) {
    t.accumulate(a, t.grad_ref(id) * t.value(b));
    t.accumulate(b, t.grad_ref(id) * t.value(a));
  };
  return id;
}

NodeId Tape::scale_by(NodeId x, NodeId s) {
  if (value(s).size() != 1) {
    throw config_error("scale_by: scale must be a scalar node");
  }
  const double sv = value(s).data[0];
  Tensor out = sv * value(x);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x, s, sv](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    t.accumulate(x, sv * g);
    Tensor gs = Tensor::zeros({1});
    gs.data[0] = dot(g, t.value(x));
    t.accumulate(s, gs);
  };
  return id;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  Tensor out = splab::matmul(value(a), value(b));
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, a, b](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    t.accumulate(a, splab::matmul(g, transpose2d(t.value(b))));
    t.accumulate(b, splab::matmul(transpose2d(t.value(a)), g));
  };
  return id;
}

NodeId Tape::add_bias(NodeId x, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  if (bv.rank() != 1 || bv.shape[0] != xv.shape.back()) {
    throw config_error("add_bias: bias must match the last axis");
  }
  const std::size_t d = bv.shape[0];
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i % d];
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x, b, d](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    t.accumulate(x, g);
    Tensor gb = Tensor::zeros({d});
    for (std::size_t i = 0; i < g.size(); ++i) gb.data[i % d] += g.data[i];
    t.accumulate(b, gb);
  };
  return id;
}

NodeId Tape::gelu(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = gelu_scalar(v);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    const Tensor& xv = t.value(x);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx.data[i] *= gelu_grad_scalar(xv.data[i]);
    }
    t.accumulate(x, gx);
  };
  return id;
}

NodeId Tape::tanh_op(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    const Tensor& y = t.value(id);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx.data[i] *= 1.0 - y.data[i] * y.data[i];
    }
    t.accumulate(x, gx);
  };
  return id;
}

NodeId Tape::sin_op(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::sin(v);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    const Tensor& xv = t.value(x);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx.data[i] *= std::cos(xv.data[i]);
    }
    t.accumulate(x, gx);
  };
  return id;
}

NodeId Tape::cos_op(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::cos(v);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    const Tensor& xv = t.value(x);
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx.data[i] *= -std::sin(xv.data[i]);
    }
    t.accumulate(x, gx);
  };
  return id;
}

NodeId Tape::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
  const Tensor& xv = value(x);
  const std::size_t d = xv.shape.back();
  const std::size_t rows = xv.size() / d;
  const Tensor& gv = value(gamma);
  const Tensor& bv = value(beta);
  if (gv.shape != std::vector<std::size_t>{d} || bv.shape != gv.shape) {
    throw config_error("layer_norm: gain/shift must match the last axis");
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv.data[r * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv.data[r * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat = (xv.data[r * d + j] - mean) * inv;
      out.data[r * d + j] = gv.data[j] * xhat + bv.data[j];
    }
  }
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x, gamma, beta, eps, d, rows](Tape& t) {
    const Tensor& g = t.grad_ref(id);
    const Tensor& xv2 = t.value(x);
    const Tensor& gv2 = t.value(gamma);
    Tensor gx = Tensor::zeros(xv2.shape);
    Tensor gg = Tensor::zeros({d});
    Tensor gb = Tensor::zeros({d});
    const double dn = static_cast<double>(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double mean = 0.0;
      for (std::size_t j = 0; j < d; ++j) mean += xv2.data[r * d + j];
      mean /= dn;
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double c = xv2.data[r * d + j] - mean;
        var += c * c;
      }
      var /= dn;
      const double inv = 1.0 / std::sqrt(var + eps);
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double xhat = (xv2.data[r * d + j] - mean) * inv;
        const double dxhat = g.data[r * d + j] * gv2.data[j];
        gg.data[j] += g.data[r * d + j] * xhat;
        gb.data[j] += g.data[r * d + j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
      }
      for (std::size_t j = 0; j < d; ++j) {
        const double xhat = (xv2.data[r * d + j] - mean) * inv;
        const double dxhat = g.data[r * d + j] * gv2.data[j];
        gx.data[r * d + j] =
            inv * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
      }
    }
    t.accumulate(x, gx);
    t.accumulate(gamma, gg);
    t.accumulate(beta, gb);
  };
  return id;
}

NodeId Tape::reshape(NodeId x, std::vector<std::size_t> shape) {
  Tensor out = value(x).reshaped(shape);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    t.accumulate(x, t.grad_ref(id).reshaped(t.value(x).shape));
  };
  return id;
}

NodeId Tape::transpose(NodeId x) {
  Tensor out = transpose2d(value(x));
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    t.accumulate(x, transpose2d(t.grad_ref(id)));
  };
  return id;
}

NodeId Tape::slice(NodeId x, AxisRanges ranges) {
  const Tensor& xv = value(x);
  validate_ranges(ranges, xv.shape);
  std::vector<std::size_t> out_shape(ranges.size());
  for (std::size_t a = 0; a < ranges.size(); ++a) {
    out_shape[a] = ranges[a].second - ranges[a].first;
  }
  Tensor out = Tensor::zeros(out_shape);
  Tensor full = xv;  // copy only for uniform move_block interface
  move_block(full, out, ranges, /*into_block=*/true);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x, ranges](Tape& t) {
    Tensor gx = Tensor::zeros(t.value(x).shape);
    Tensor g = t.grad_ref(id);
    move_block(gx, g, ranges, /*into_block=*/false);
    t.accumulate(x, gx);
  };
  return id;
}

NodeId Tape::scatter(NodeId x, std::vector<std::size_t> full_shape,
                     AxisRanges ranges) {
  const Tensor& xv = value(x);
  validate_ranges(ranges, full_shape);
  for (std::size_t a = 0; a < ranges.size(); ++a) {
    if (ranges[a].second - ranges[a].first != xv.shape[a]) {
      throw config_error("scatter: block shape does not match ranges");
    }
  }
  Tensor out = Tensor::zeros(full_shape);
  Tensor block = xv;
  move_block(out, block, ranges, /*into_block=*/false);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x, ranges](Tape& t) {
    Tensor g = t.grad_ref(id);
    Tensor gx = Tensor::zeros(t.value(x).shape);
    move_block(g, gx, ranges, /*into_block=*/true);
    t.accumulate(x, gx);
  };
  return id;
}

NodeId Tape::concat(NodeId a, NodeId b, std::size_t axis) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != bv.rank() || axis >= av.rank()) {
    throw config_error("concat: rank mismatch or bad axis");
  }
  for (std::size_t i = 0; i < av.rank(); ++i) {
    if (i != axis && av.shape[i] != bv.shape[i]) {
      throw config_error("concat: shapes differ off the concat axis");
    }
  }
  std::vector<std::size_t> out_shape = av.shape;
  out_shape[axis] += bv.shape[axis];
  Tensor out = Tensor::zeros(out_shape);
  AxisRanges ra(av.rank()), rb(av.rank());
  for (std::size_t i = 0; i < av.rank(); ++i) {
    ra[i] = {0, av.shape[i]};
    rb[i] = {0, bv.shape[i]};
  }
  rb[axis] = {av.shape[axis], out_shape[axis]};
  ra[axis] = {0, av.shape[axis]};
  Tensor ta = av, tb = bv;
  move_block(out, ta, ra, false);
  move_block(out, tb, rb, false);
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, a, b, ra, rb](Tape& t) {
    Tensor g = t.grad_ref(id);
    Tensor ga = Tensor::zeros(t.value(a).shape);
    Tensor gb = Tensor::zeros(t.value(b).shape);
    move_block(g, ga, ra, true);
    move_block(g, gb, rb, true);
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  };
  return id;
}

NodeId Tape::reduce_sum(NodeId x) {
  double s = 0.0;
  for (double v : value(x).data) s += v;
  Tensor out({1}, {s});
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x](Tape& t) {
    const double g = t.grad_ref(id).data[0];
    t.accumulate(x, Tensor::full(t.value(x).shape, g));
  };
  return id;
}

NodeId Tape::reduce_mean(NodeId x) {
  const double n = static_cast<double>(value(x).size());
  double s = 0.0;
  for (double v : value(x).data) s += v;
  Tensor out({1}, {s / n});
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, x, n](Tape& t) {
    const double g = t.grad_ref(id).data[0] / n;
    t.accumulate(x, Tensor::full(t.value(x).shape, g));
  };
  return id;
}

NodeId Tape::mse_loss(NodeId pred, const Tensor& target) {
  const Tensor& pv = value(pred);
  if (!same_shape(pv, target)) throw config_error("mse_loss: shape mismatch");
  const double n = static_cast<double>(pv.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv.data[i] - target.data[i];
    s += d * d;
  }
  Tensor out({1}, {s / n});
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, pred, target, n](Tape& t) {
    const double g = t.grad_ref(id).data[0];
    const Tensor& pv2 = t.value(pred);
    Tensor gp = Tensor::zeros(pv2.shape);
    for (std::size_t i = 0; i < gp.size(); ++i) {
      gp.data[i] = g * 2.0 * (pv2.data[i] - target.data[i]) / n;
    }
    t.accumulate(pred, gp);
  };
  return id;
}

NodeId Tape::l2re_loss(NodeId pred, const Tensor& target) {
  const Tensor& pv = value(pred);
  if (!same_shape(pv, target)) throw config_error("l2re_loss: shape mismatch");
  if (pv.rank() < 1) throw config_error("l2re_loss: need a batch axis");
  const std::size_t rows = pv.shape[0];
  const std::size_t cols = pv.size() / rows;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double en = 0.0, et = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = pv.data[r * cols + j] - target.data[r * cols + j];
      en += d * d;
      et += target.data[r * cols + j] * target.data[r * cols + j];
    }
    if (et == 0.0) {
      throw config_error("l2re: zero-norm target at sample " +
                         std::to_string(r));
    }
    total += std::sqrt(en) / std::sqrt(et);
  }
  Tensor out({1}, {total / static_cast<double>(rows)});
  const NodeId id = emplace(std::move(out), {});
  nodes_[id].backward = [id, pred, target, rows, cols](Tape& t) {
    const double g = t.grad_ref(id).data[0];
    const Tensor& pv2 = t.value(pred);
    Tensor gp = Tensor::zeros(pv2.shape);
    for (std::size_t r = 0; r < rows; ++r) {
      double en = 0.0, et = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = pv2.data[r * cols + j] - target.data[r * cols + j];
        en += d * d;
        et += target.data[r * cols + j] * target.data[r * cols + j];
      }
      const double norm_e = std::sqrt(en), norm_t = std::sqrt(et);
      if (norm_e == 0.0) continue;  // flat spot: zero subgradient
      const double c = g / (static_cast<double>(rows) * norm_e * norm_t);
      for (std::size_t j = 0; j < cols; ++j) {
        gp.data[r * cols + j] =
            c * (pv2.data[r * cols + j] - target.data[r * cols + j]);
      }
    }
    t.accumulate(pred, gp);
  };
  return id;
}

VarPair Tape::rfft(NodeId x, std::vector<std::size_t> axes) {
  const SpectralTensor sp = splab::rfftn(value(x), axes);
  const auto src_shape = value(x).shape;
  const auto ax = sp.axes;

  // Shared pull-back: embed the half-spectrum cotangent at its own indices,
  // inverse-transform, and keep the real part.
  auto embed_pull = [src_shape, ax](Tape& t, NodeId xid, const Tensor& g,
                                    bool imag_part) {
    Tensor fr = Tensor::zeros(src_shape);
    Tensor fi = Tensor::zeros(src_shape);
    Tensor& dst = imag_part ? fi : fr;
    std::vector<std::size_t> idx(g.rank());
    for (std::size_t f = 0; f < g.size(); ++f) {
      decode_index(f, g.shape, idx);
      dst.data[dst.offset(idx)] = g.data[f];
    }
    cfftn(fr, fi, ax, +1);
    t.accumulate(xid, fr);
  };

  const NodeId re = emplace(sp.real, {});
  nodes_[re].backward = [re, x, embed_pull](Tape& t) {
    embed_pull(t, x, t.grad_ref(re), false);
  };
  const NodeId im = emplace(sp.imag, {});
  nodes_[im].backward = [im, x, embed_pull](Tape& t) {
    embed_pull(t, x, t.grad_ref(im), true);
  };
  return {re, im};
}

NodeId Tape::irfft(VarPair spectrum, std::vector<std::size_t> axes,
                   std::vector<std::size_t> source_shape) {
  SpectralTensor sp;
  sp.real = value(spectrum.re);
  sp.imag = value(spectrum.im);
  sp.source_shape = source_shape;
  sp.axes = axes;
  Tensor out = splab::irfftn(sp);
  const NodeId id = emplace(std::move(out), {});
  const NodeId pre = spectrum.re, pim = spectrum.im;
  nodes_[id].backward = [id, pre, pim, axes, source_shape](Tape& t) {
    // Adjoint of (Hermitian-extend, inverse transform, take real part):
    // forward-transform the cotangent, then fold mirrored bins back into the
    // half layout (paired bins contribute twice, conjugated).
    Tensor gr = t.grad_ref(id);
    Tensor gi = Tensor::zeros(gr.shape);
    cfftn(gr, gi, axes, -1);
    const Tensor& half = t.value(pre);
    const std::size_t last = axes.back();
    const std::size_t n_last = source_shape[last];
    Tensor out_re = Tensor::zeros(half.shape);
    Tensor out_im = Tensor::zeros(half.shape);
    std::vector<std::size_t> idx(half.rank());
    std::vector<std::size_t> mirror(half.rank());
    for (std::size_t f = 0; f < half.size(); ++f) {
      decode_index(f, half.shape, idx);
      const std::size_t src = gr.offset(idx);
      out_re.data[f] = gr.data[src];
      out_im.data[f] = gi.data[src];
      const bool paired = idx[last] > 0 && idx[last] < n_last - n_last / 2;
      if (paired) {
        mirror = idx;
        for (std::size_t a : axes) {
          mirror[a] = (source_shape[a] - idx[a]) % source_shape[a];
        }
        const std::size_t moff = gr.offset(mirror);
        out_re.data[f] += gr.data[moff];
        out_im.data[f] -= gi.data[moff];
      }
    }
    t.accumulate(pre, out_re);
    t.accumulate(pim, out_im);
  };
  return id;
}

VarPair Tape::complex_matmul(VarPair a, VarPair b) {
  const NodeId rr = matmul(a.re, b.re);
  const NodeId ii = matmul(a.im, b.im);
  const NodeId ri = matmul(a.re, b.im);
  const NodeId ir = matmul(a.im, b.re);
  return {sub(rr, ii), add(ri, ir)};
}

std::vector<Tensor> Tape::gradients(NodeId loss,
                                    const std::vector<NodeId>& wrt) {
  if (value(loss).size() != 1) {
    throw config_error("gradients: loss must be scalar");
  }
  std::fill(grad_set_.begin(), grad_set_.end(), 0);
  accumulate(loss, Tensor({1}, {1.0}));
  for (std::size_t id = nodes_.size(); id-- > 0;) {
    if (grad_set_[id] && nodes_[id].backward) {
      nodes_[id].backward(*this);
    }
  }
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (NodeId id : wrt) {
    if (has_grad(id)) {
      out.push_back(grads_[id]);
    } else {
      out.push_back(Tensor::zeros(value(id).shape));
    }
  }
  return out;
}

double finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& loss_fn,
    const std::vector<Tensor>& params,
    const std::vector<Tensor>& analytic_grads, double h) {
  if (params.size() != analytic_grads.size()) {
    throw config_error("finite_difference_check: grads/params mismatch");
  }
  std::vector<Tensor> work = params;
  double worst = 0.0;
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double saved = work[p].data[i];
      work[p].data[i] = saved + h;
      const double up = loss_fn(work);
      work[p].data[i] = saved - h;
      const double down = loss_fn(work);
      work[p].data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = analytic_grads[p].data[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace splab
