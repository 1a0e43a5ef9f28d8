#include "splab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splab/autodiff.hpp"
#include "splab/errors.hpp"
#include "splab/fft.hpp"
#include "splab/linalg.hpp"
#include "splab/rng.hpp"
#include "splab/training.hpp"

namespace splab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return num / den;
}

Tensor column_of(const Tensor& m, std::size_t j) {
  Tensor out = Tensor::zeros({m.shape[0]});
  for (std::size_t i = 0; i < m.shape[0]; ++i) {
    out.data[i] = m.data[i * m.shape[1] + j];
  }
  return out;
}

}  // namespace

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["pass"] = pass;
  j["details"] = details;
  nlohmann::json arr = nlohmann::json::array();
  for (const TrialRecord& t : trials) {
    arr.push_back({{"observed", t.observed},
                   {"bound", t.bound},
                   {"margin", t.margin},
                   {"pass", t.pass}});
  }
  j["trials"] = arr;
  return j;
}

nlohmann::json RmseTable::to_json() const {
  nlohmann::json j;
  j["ranks"] = ranks;
  j["truncation_rmse"] = truncation_rmse;
  j["widths"] = widths;
  j["adapter_rmse"] = adapter_rmse;
  j["degenerate"] = degenerate;
  return j;
}

// ----------------------------------------------------------- rank truncation

std::pair<Tensor, double> eckart_young_truncate(const Tensor& w,
                                                std::size_t r) {
  if (w.rank() != 2) {
    throw config_error("eckart_young_truncate: need a matrix");
  }
  const std::size_t k = std::min(w.shape[0], w.shape[1]);
  if (r >= k) {
    throw config_error("eckart_young_truncate: rank budget must be < min dim");
  }
  SvdResult svd = jacobi_svd(w);
  Tensor truncated = svd_reconstruct(svd, r);
  Tensor residual = w - truncated;
  // The top right-singular vector of the residual is the first discarded
  // column; warm-starting there makes the estimate robust to tiny spectral
  // gaps.
  const double err = op_norm_power(residual, column_of(svd.v, r));
  return {std::move(truncated), err};
}

// ------------------------------------------------- blockwise low-rank floor

BoundReport verify_blockwise_lora_bound(const TheoryConfig& cfg) {
  BoundReport rep;
  rep.name = "blockwise-lowrank-floor";
  std::size_t fail_input = 0, fail_floor = 0, fail_attain = 0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    Prng rng(cfg.seed ^ static_cast<std::uint64_t>(t));
    const std::size_t blocks = 1 + rng.index(4);
    const std::size_t d = 2 + rng.index(15);
    const std::size_t r = 1 + rng.index(d - 1);

    std::vector<Tensor> delta(blocks);
    std::vector<SvdResult> svds(blocks);
    std::vector<double> all_sigma;
    double fro_sq = 0.0;
    for (std::size_t k = 0; k < blocks; ++k) {
      delta[k] = rng.normal_tensor({d, d}, 0.0, 1.0);
      svds[k] = jacobi_svd(delta[k]);
      for (double s : svds[k].sigma) all_sigma.push_back(s);
      const double f = frobenius_norm(delta[k]);
      fro_sq += f * f;
    }
    std::sort(all_sigma.begin(), all_sigma.end(), std::greater<double>());
    const double sigma_floor = all_sigma[blocks * r];  // sigma_{K*r+1}
    const double fro = std::sqrt(fro_sq);

    // (ii) arbitrary per-block factors: the block-diagonal difference has
    // operator norm max over blocks, and rank(BA) <= K*r forces the floor.
    double op_arbitrary = 0.0;
    for (std::size_t k = 0; k < blocks; ++k) {
      Tensor b = rng.normal_tensor({d, r}, 0.0, 1.0);
      Tensor a = rng.normal_tensor({r, d}, 0.0, 1.0);
      Tensor diff = delta[k] - matmul(b, a);
      op_arbitrary = std::max(op_arbitrary, op_norm_power(diff, rng));
    }
    const bool floor_ok = op_arbitrary >= sigma_floor - 1e-9;
    if (!floor_ok) ++fail_floor;

    // Optimal per-block truncation and its residuals.
    std::vector<Tensor> resid(blocks);
    double attain_target = 0.0;
    std::size_t arg_k = 0;
    for (std::size_t k = 0; k < blocks; ++k) {
      resid[k] = delta[k] - svd_reconstruct(svds[k], r);
      if (svds[k].sigma[r] > attain_target) {
        attain_target = svds[k].sigma[r];
        arg_k = k;
      }
    }

    // (i) per-input error identity for the optimal choice: the residual acts
    // orthogonally on the retained subspace, so the error norm equals the
    // discarded-singular-value expansion exactly.
    bool input_ok = true;
    for (std::size_t probe = 0; probe < 50; ++probe) {
      double lhs_sq = 0.0, rhs_sq = 0.0;
      for (std::size_t k = 0; k < blocks; ++k) {
        Tensor x = rng.normal_tensor({d}, 0.0, 1.0);
        Tensor ex = matmul(resid[k], x.reshaped({d, 1}));
        lhs_sq += dot(ex, ex);
        for (std::size_t i = r; i < d; ++i) {
          const double proj = dot(column_of(svds[k].v, i), x);
          rhs_sq += svds[k].sigma[i] * svds[k].sigma[i] * proj * proj;
        }
      }
      const double lhs = std::sqrt(lhs_sq);
      const double rhs = std::sqrt(rhs_sq);
      if (std::abs(lhs - rhs) > 1e-10 * fro || lhs < rhs - 1e-10 * fro) {
        input_ok = false;
      }
    }
    if (!input_ok) ++fail_input;

    // (iii) the optimal choice attains max_k sigma_{k,r+1}.
    const double op_optimal =
        op_norm_power(resid[arg_k], column_of(svds[arg_k].v, r));
    const bool attain_ok = std::abs(op_optimal - attain_target) <= 1e-9;
    if (!attain_ok) ++fail_attain;

    TrialRecord rec;
    rec.observed = op_arbitrary;
    rec.bound = sigma_floor;
    rec.margin = op_arbitrary - sigma_floor;
    rec.pass = floor_ok && input_ok && attain_ok;
    rep.trials.push_back(rec);
  }
  rep.details = {{"per_input_failures", fail_input},
                 {"operator_floor_failures", fail_floor},
                 {"attainment_failures", fail_attain}};
  rep.pass = fail_input == 0 && fail_floor == 0 && fail_attain == 0;
  return rep;
}

// --------------------------------------------------------- coefficient decay

BoundReport verify_spectral_decay(const TheoryConfig& cfg) {
  if (cfg.alpha < 1.0 || cfg.alpha != std::floor(cfg.alpha)) {
    throw config_error("verify_spectral_decay: alpha must be an integer >= 1");
  }
  if (cfg.dim != 1 && cfg.dim != 2) {
    throw config_error("verify_spectral_decay: dim must be 1 or 2");
  }
  BoundReport rep;
  rep.name = "coefficient-decay-envelope";
  const double alpha = cfg.alpha;
  const double beta = alpha / 2.0 + 0.75;

  const std::size_t n = cfg.dim == 1 ? 8192 : 256;
  std::vector<std::size_t> grid(cfg.dim, n);
  Tensor g = Tensor::zeros(grid);
  if (cfg.dim == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 2.0 * kPi * static_cast<double>(i) / n;
      g.data[i] = std::pow(1.0 - std::cos(x), beta);
    }
  } else {
    std::vector<double> line(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 2.0 * kPi * static_cast<double>(i) / n;
      line[i] = std::pow(1.0 - std::cos(x), beta);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        g.data[i * n + j] = line[i] * line[j];
      }
    }
  }

  std::vector<std::size_t> axes(cfg.dim);
  for (std::size_t a = 0; a < cfg.dim; ++a) axes[a] = a;
  SpectralTensor spec = rfftn(g, axes);
  // Unitary DFT -> Fourier-series coefficients need one more 1/sqrt(n) per
  // axis.
  const double series_scale =
      1.0 / std::pow(std::sqrt(static_cast<double>(n)),
                     static_cast<double>(cfg.dim));

  // Sobolev-type constant from the constructed function itself: the full
  // two-sided sum with conjugate-pair doubling on the halved axis.
  const std::size_t half = n / 2 + 1;
  double c_sq = 0.0;
  const std::size_t lead = cfg.dim == 1 ? 1 : n;
  for (std::size_t i = 0; i < lead; ++i) {
    const double ki =
        cfg.dim == 1 ? 0.0 : static_cast<double>(std::min(i, n - i));
    for (std::size_t j = 0; j < half; ++j) {
      const std::size_t idx = i * half + j;
      const double re = spec.real.data[idx] * series_scale;
      const double im = spec.imag.data[idx] * series_scale;
      const double mag_sq = re * re + im * im;
      const double k_sq = ki * ki + static_cast<double>(j * j);
      const double weight = std::pow(1.0 + k_sq, alpha);
      const double mult = (j == 0 || j == n / 2) ? 1.0 : 2.0;
      c_sq += mult * weight * mag_sq;
    }
  }
  const double c_const = std::sqrt(c_sq);

  // Envelope check and slope fit along the last axis (k_y = 0 line in 2-D).
  std::vector<double> log_k, log_mag;
  bool envelope_ok = true;
  for (std::size_t k = 1; k <= 64; ++k) {
    const std::size_t idx = k;  // 1-D bin k; 2-D row 0, column k
    const double re = spec.real.data[idx] * series_scale;
    const double im = spec.imag.data[idx] * series_scale;
    const double mag = std::sqrt(re * re + im * im);
    const double bound =
        c_const * std::pow(1.0 + static_cast<double>(k * k), -alpha / 2.0);
    TrialRecord rec;
    rec.observed = mag;
    rec.bound = bound;
    rec.margin = bound - mag;
    rec.pass = mag <= bound * (1.0 + 1e-12);
    if (!rec.pass) envelope_ok = false;
    if (k >= 2 && k <= 32) {
      rep.trials.push_back(rec);
      log_k.push_back(std::log(static_cast<double>(k)));
      log_mag.push_back(std::log(std::max(mag, 1e-300)));
    }
  }
  const double slope = fit_slope(log_k, log_mag);
  const bool slope_ok = slope <= -alpha + 0.3;
  rep.details = {{"beta", beta},
                 {"constant", c_const},
                 {"slope", slope},
                 {"slope_limit", -alpha + 0.3},
                 {"grid", n}};
  rep.pass = envelope_ok && slope_ok;
  return rep;
}

// ------------------------------------------------------------- tail scaling

namespace {

// Lattice tail sums of m^2 (1+||k||^2)^(-s) beyond each cutoff, capped.
std::vector<double> lattice_tails(std::size_t dim, double s, double m,
                                  const std::vector<std::size_t>& cutoffs,
                                  std::size_t cap) {
  std::vector<double> tails(cutoffs.size(), 0.0);
  const double m_sq = m * m;
  if (dim == 1) {
    for (std::size_t k = 1; k <= cap; ++k) {
      const double norm = static_cast<double>(k);
      const double val =
          2.0 * m_sq * std::pow(1.0 + norm * norm, -s);  // +-k pair
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        if (norm > static_cast<double>(cutoffs[c])) tails[c] += val;
      }
    }
    return tails;
  }
  const long long icap = static_cast<long long>(cap);
  for (long long kx = -icap; kx <= icap; ++kx) {
    for (long long ky = -icap; ky <= icap; ++ky) {
      const double n_sq = static_cast<double>(kx * kx + ky * ky);
      const double norm = std::sqrt(n_sq);
      double val = 0.0;
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        if (norm > static_cast<double>(cutoffs[c])) {
          if (val == 0.0) val = m_sq * std::pow(1.0 + n_sq, -s);
          tails[c] += val;
        }
      }
    }
  }
  return tails;
}

}  // namespace

BoundReport verify_tail_energy_split(const TheoryConfig& cfg) {
  if (2.0 * cfg.sobolev_s <= static_cast<double>(cfg.dim)) {
    throw config_error("verify_tail_energy_split: need s > d/2");
  }
  if (cfg.dim != 1 && cfg.dim != 2) {
    throw config_error("verify_tail_energy_split: dim must be 1 or 2");
  }
  BoundReport rep;
  rep.name = "tail-energy-scaling";
  const std::vector<std::size_t> cutoffs = {4, 8, 16, 32};
  const std::size_t cap = cfg.dim == 1 ? 4096 : 1024;
  const std::vector<double> tails =
      lattice_tails(cfg.dim, cfg.sobolev_s, cfg.sobolev_m, cutoffs, cap);
  const std::vector<double> tails_doubled =
      lattice_tails(cfg.dim, cfg.sobolev_s, 2.0 * cfg.sobolev_m, cutoffs, cap);

  const double target =
      static_cast<double>(cfg.dim) - 2.0 * cfg.sobolev_s;
  std::vector<double> lx, ly;
  bool monotone = true;
  bool scaling_exact = true;
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    lx.push_back(std::log(static_cast<double>(cutoffs[c])));
    ly.push_back(std::log(tails[c]));
    if (c > 0 && !(tails[c] < tails[c - 1])) monotone = false;
    if (tails_doubled[c] != 4.0 * tails[c]) scaling_exact = false;
    TrialRecord rec;
    rec.observed = tails[c];
    rec.bound = cfg.sobolev_m * cfg.sobolev_m *
                std::pow(static_cast<double>(cutoffs[c]), target);
    rec.margin = rec.bound > 0.0 ? tails[c] / rec.bound : 0.0;
    rec.pass = c == 0 || tails[c] < tails[c - 1];
    rep.trials.push_back(rec);
  }
  const double slope = fit_slope(lx, ly);
  const bool slope_ok = std::abs(slope - target) <= 0.3;
  rep.details = {{"slope", slope},
                 {"slope_target", target},
                 {"monotone", monotone},
                 {"m_scaling_exact", scaling_exact},
                 {"lattice_cap", cap}};
  rep.pass = slope_ok && monotone && scaling_exact;
  return rep;
}

// ----------------------------------------------- error decomposition pieces

namespace {

struct ScalarMlp {
  Tensor w1, b1, w2, b2;  // {m,1}, {m}, {1,m}, {1}
};

Tensor scalar_mlp_eval(const ScalarMlp& p, const Tensor& z) {
  const std::size_t rows = z.shape[0];
  const std::size_t m = p.b1.shape[0];
  Tensor out = Tensor::zeros({rows, 1});
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = p.b2.data[0];
    for (std::size_t u = 0; u < m; ++u) {
      acc += p.w2.data[u] *
             gelu_scalar(p.w1.data[u] * z.data[i] + p.b1.data[u]);
    }
    out.data[i] = acc;
  }
  return out;
}

double sup_error(const ScalarMlp& p, const Tensor& z, const Tensor& target) {
  Tensor pred = scalar_mlp_eval(p, z);
  double worst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    worst = std::max(worst, std::abs(pred.data[i] - target.data[i]));
  }
  return worst;
}

double target_fn(double z) {
  return std::exp(-4.0 * z * z) * std::sin(2.0 * z) + 0.5 * std::tanh(z);
}

// Full-batch AdamW on the train grid; keeps the best sup-error candidate on
// the dense evaluation grid, checked every 100 steps (and at step 0).
void train_scalar_mlp(ScalarMlp& p, const Tensor& z_train,
                      const Tensor& y_train, const Tensor& z_eval,
                      const Tensor& y_eval, std::size_t steps, double lr,
                      ScalarMlp& best, double& best_sup) {
  AdamwConfig ac;
  ac.lr = lr;
  OptimState state;
  for (std::size_t step = 0; step <= steps; ++step) {
    if (step % 100 == 0 || step == steps) {
      const double sup = sup_error(p, z_eval, y_eval);
      if (sup < best_sup) {
        best_sup = sup;
        best = p;
      }
    }
    if (step == steps) break;
    Tape tape;
    NodeId w1 = tape.input(p.w1);
    NodeId b1 = tape.input(p.b1);
    NodeId w2 = tape.input(p.w2);
    NodeId b2 = tape.input(p.b2);
    NodeId x = tape.input(z_train);
    NodeId h = tape.add_bias(tape.matmul(x, tape.transpose(w1)), b1);
    NodeId a = tape.gelu(h);
    NodeId pred = tape.add_bias(tape.matmul(a, tape.transpose(w2)), b2);
    NodeId loss = tape.mse_loss(pred, y_train);
    std::vector<Tensor> grads = tape.gradients(loss, {w1, b1, w2, b2});
    std::vector<Tensor*> params = {&p.w1, &p.b1, &p.w2, &p.b2};
    adamw_step(params, grads, state, ac);
  }
}

}  // namespace

BoundReport verify_adapter_error_decomposition(const TheoryConfig& cfg) {
  if (2.0 * cfg.alpha <= static_cast<double>(cfg.dim)) {
    throw config_error(
        "verify_adapter_error_decomposition: need alpha > d/2");
  }
  if (cfg.dim != 1 && cfg.dim != 2) {
    throw config_error(
        "verify_adapter_error_decomposition: dim must be 1 or 2");
  }
  BoundReport rep;
  rep.name = "adapter-error-decomposition";
  const double alpha = cfg.alpha;
  const double d = static_cast<double>(cfg.dim);

  // (i) truncation tail against the explicit integral-comparison constant.
  const std::vector<std::size_t> cutoffs = {4, 8, 16, 32, 64};
  const double omega = cfg.dim == 1 ? 2.0 : 2.0 * kPi;
  std::vector<double> tails(cutoffs.size(), 0.0);
  double remainder = 0.0;
  if (cfg.dim == 1) {
    const std::size_t cap = 2000000;
    for (std::size_t k = 1; k <= cap; ++k) {
      const double bracket = 1.0 + static_cast<double>(k) * k;
      const double val = 2.0 * std::pow(bracket, -alpha);
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        const double cut = static_cast<double>(cutoffs[c]);
        if (bracket > cut * cut) tails[c] += val;
      }
    }
    remainder =
        2.0 * std::pow(static_cast<double>(cap), 1.0 - 2.0 * alpha) /
        (2.0 * alpha - 1.0);
  } else {
    const long long cap = 3000;
    for (long long kx = -cap; kx <= cap; ++kx) {
      for (long long ky = -cap; ky <= cap; ++ky) {
        const double bracket = 1.0 + static_cast<double>(kx * kx + ky * ky);
        double val = 0.0;
        for (std::size_t c = 0; c < cutoffs.size(); ++c) {
          const double cut = static_cast<double>(cutoffs[c]);
          if (bracket > cut * cut) {
            if (val == 0.0) val = std::pow(bracket, -alpha);
            tails[c] += val;
          }
        }
      }
    }
    remainder = 2.0 * kPi *
                std::pow(static_cast<double>(cap), 2.0 - 2.0 * alpha) /
                (2.0 * alpha - 2.0);
  }
  bool tail_ok = true;
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    const double cut = static_cast<double>(cutoffs[c]);
    const double shifted =
        std::max(std::sqrt(cut * cut - 1.0) - std::sqrt(d), 1.0);
    const double bound =
        omega / (2.0 * alpha - d) * std::pow(shifted, d - 2.0 * alpha);
    TrialRecord rec;
    rec.observed = tails[c] + remainder;
    rec.bound = bound;
    rec.margin = (bound - rec.observed) / bound;
    rec.pass = rec.observed <= bound;
    if (!rec.pass) tail_ok = false;
    rep.trials.push_back(rec);
  }

  // (ii) width sweep: measured sup error of scalar-function fits, strictly
  // decreasing in width; rate fitted, reported, never asserted.
  const std::vector<std::size_t> widths = {1, 2, 4, 8, 16};
  const std::size_t n_train = 129, n_eval = 1025;
  Tensor z_train = Tensor::zeros({n_train, 1});
  Tensor y_train = Tensor::zeros({n_train, 1});
  for (std::size_t i = 0; i < n_train; ++i) {
    const double z = -2.0 + 4.0 * static_cast<double>(i) / (n_train - 1);
    z_train.data[i] = z;
    y_train.data[i] = target_fn(z);
  }
  Tensor z_eval = Tensor::zeros({n_eval, 1});
  Tensor y_eval = Tensor::zeros({n_eval, 1});
  for (std::size_t i = 0; i < n_eval; ++i) {
    const double z = -2.0 + 4.0 * static_cast<double>(i) / (n_eval - 1);
    z_eval.data[i] = z;
    y_eval.data[i] = target_fn(z);
  }

  bool decrease_ok = true;
  nlohmann::json sweep = nlohmann::json::array();
  std::vector<double> fitted_rates;
  for (std::size_t s = 0; s < 3; ++s) {
    Prng rng(cfg.seed + s);
    std::vector<double> eps;
    ScalarMlp prev_best;
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
      const std::size_t m = widths[wi];
      double best_sup = std::numeric_limits<double>::infinity();
      ScalarMlp best;
      for (std::size_t restart = 0; restart < 3; ++restart) {
        ScalarMlp p;
        p.w1 = rng.uniform_tensor({m, 1}, -std::sqrt(6.0), std::sqrt(6.0));
        p.b1 = rng.uniform_tensor({m}, -2.0, 2.0);
        p.w2 = Tensor::zeros({1, m});
        p.b2 = Tensor::zeros({1});
        train_scalar_mlp(p, z_train, y_train, z_eval, y_eval, 3000, 1e-2,
                         best, best_sup);
      }
      if (wi > 0) {
        // Warm start from the previous width: old units copied, new units
        // random-in/zero-out so the function value is preserved while the
        // additions stay trainable.
        const std::size_t mp = widths[wi - 1];
        ScalarMlp p;
        p.w1 = rng.uniform_tensor({m, 1}, -std::sqrt(6.0), std::sqrt(6.0));
        p.b1 = rng.uniform_tensor({m}, -2.0, 2.0);
        p.w2 = Tensor::zeros({1, m});
        p.b2 = prev_best.b2;
        for (std::size_t u = 0; u < mp; ++u) {
          p.w1.data[u] = prev_best.w1.data[u];
          p.b1.data[u] = prev_best.b1.data[u];
          p.w2.data[u] = prev_best.w2.data[u];
        }
        train_scalar_mlp(p, z_train, y_train, z_eval, y_eval, 2000, 1e-3,
                         best, best_sup);
      }
      eps.push_back(best_sup);
      prev_best = best;
      if (wi > 0 && !(eps[wi] < eps[wi - 1])) decrease_ok = false;
    }
    std::vector<double> xs(widths.begin(), widths.end());
    std::vector<double> ls;
    for (double e : eps) ls.push_back(std::log(std::max(e, 1e-300)));
    const double rate = -fit_slope(xs, ls);
    fitted_rates.push_back(rate);
    sweep.push_back({{"seed", cfg.seed + s},
                     {"sup_error", eps},
                     {"fitted_rate", rate}});
  }

  // (iii) spatial-norm control with its exact equality case.
  const std::size_t cut = cfg.k_cut;
  std::size_t support = 1;
  for (std::size_t a = 0; a < cfg.dim; ++a) support *= cut;
  Prng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  bool norm_ok = true;
  for (std::size_t t = 0; t < 100; ++t) {
    Tensor deltas = rng.uniform_tensor({support}, -1.0, 1.0);
    const double lhs = frobenius_norm(deltas);
    const double rhs =
        std::sqrt(static_cast<double>(support)) * max_abs(deltas);
    if (lhs > rhs * (1.0 + 1e-12)) norm_ok = false;
  }
  Tensor flat = Tensor::full({support}, 1.0);
  const double eq_lhs = frobenius_norm(flat);
  const double eq_rhs = std::sqrt(static_cast<double>(support)) * 1.0;
  const bool equality_exact = eq_lhs == eq_rhs;

  rep.details = {
      {"tail_remainder_bound", remainder},
      {"width_sweep", sweep},
      {"fitted_rates", fitted_rates},
      {"support_points", support},
      {"norm_equality_exact", equality_exact},
      {"caveat",
       "the width-accuracy hypothesis is measured on one fixed smooth "
       "target family; it is not validated for arbitrary functions"}};
  rep.pass = tail_ok && decrease_ok && norm_ok && equality_exact;
  return rep;
}

// --------------------------------------- adapter vs truncation experiment

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& idx) {
  const std::size_t cols = t.shape[1];
  Tensor out = Tensor::zeros({idx.size(), cols});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out.data[i * cols + j] = t.data[idx[i] * cols + j];
    }
  }
  return out;
}

Tensor slice_rows(const Tensor& t, std::size_t lo, std::size_t hi) {
  const std::size_t cols = t.shape[1];
  Tensor out = Tensor::zeros({hi - lo, cols});
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(lo * cols),
            t.data.begin() + static_cast<std::ptrdiff_t>(hi * cols),
            out.data.begin());
  return out;
}

double matrix_rmse(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace

RmseTable adapter_vs_truncation_experiment(
    const Tensor& h, const Tensor& delta_w,
    const std::vector<std::size_t>& ranks,
    const std::vector<std::size_t>& widths, std::uint64_t seed) {
  if (h.rank() != 2 || delta_w.rank() != 2 ||
      delta_w.shape[0] != delta_w.shape[1] ||
      h.shape[1] != delta_w.shape[0]) {
    throw config_error(
        "adapter_vs_truncation: need h (n x d) and delta_w (d x d)");
  }
  const std::size_t n = h.shape[0];
  const std::size_t dim = h.shape[1];
  if (n < 1000) {
    throw config_error("adapter_vs_truncation: need at least 1000 rows");
  }

  Tensor y = matmul(h, transpose2d(delta_w));
  const std::size_t n_train = (n * 9) / 10;
  Tensor h_train = slice_rows(h, 0, n_train);
  Tensor y_train = slice_rows(y, 0, n_train);
  Tensor h_val = slice_rows(h, n_train, n);
  Tensor y_val = slice_rows(y, n_train, n);

  RmseTable table;
  table.degenerate = frobenius_norm(delta_w) == 0.0;

  SvdResult svd = jacobi_svd(delta_w);
  for (std::size_t r : ranks) {
    if (r > dim) {
      throw config_error("adapter_vs_truncation: rank exceeds matrix size");
    }
    Tensor trunc = svd_reconstruct(svd, r);
    Tensor pred = matmul(h_val, transpose2d(trunc));
    table.ranks.push_back(r);
    table.truncation_rmse.push_back(matrix_rmse(pred, y_val));
  }

  for (std::size_t m : widths) {
    Prng rng(seed + 7919 * m + 13);
    Tensor w1 = rng.kaiming_uniform_tensor({m, dim}, dim);
    Tensor b1 = Tensor::zeros({m});
    Tensor w2 = Tensor::zeros({dim, m});
    Tensor b2 = Tensor::zeros({dim});
    AdamwConfig ac;  // lr 1e-3, wd 0
    OptimState state;
    const std::size_t batch = 256;
    for (std::size_t step = 0; step < 2000; ++step) {
      std::vector<std::size_t> idx(batch);
      for (std::size_t i = 0; i < batch; ++i) idx[i] = rng.index(n_train);
      Tensor xb = gather_rows(h_train, idx);
      Tensor yb = gather_rows(y_train, idx);
      Tape tape;
      NodeId n_w1 = tape.input(w1);
      NodeId n_b1 = tape.input(b1);
      NodeId n_w2 = tape.input(w2);
      NodeId n_b2 = tape.input(b2);
      NodeId x = tape.input(xb);
      NodeId a =
          tape.gelu(tape.add_bias(tape.matmul(x, tape.transpose(n_w1)), n_b1));
      NodeId pred =
          tape.add_bias(tape.matmul(a, tape.transpose(n_w2)), n_b2);
      NodeId loss = tape.mse_loss(pred, yb);
      std::vector<Tensor> grads =
          tape.gradients(loss, {n_w1, n_b1, n_w2, n_b2});
      std::vector<Tensor*> params = {&w1, &b1, &w2, &b2};
      adamw_step(params, grads, state, ac);
    }
    Tensor hidden = matmul(h_val, transpose2d(w1));
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      hidden.data[i] = gelu_scalar(hidden.data[i] + b1.data[i % m]);
    }
    Tensor pred = matmul(hidden, transpose2d(w2));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred.data[i] += b2.data[i % dim];
    }
    table.widths.push_back(m);
    table.adapter_rmse.push_back(matrix_rmse(pred, y_val));
  }
  return table;
}

SyntheticActivations make_synthetic_activation_problem(std::size_t n,
                                                       std::size_t d,
                                                       std::uint64_t seed) {
  Prng rng(seed);
  auto random_orthogonal = [&]() {
    return jacobi_svd(rng.normal_tensor({d, d}, 0.0, 1.0)).u;
  };
  Tensor u = random_orthogonal();
  Tensor v = random_orthogonal();
  Tensor q = random_orthogonal();

  Tensor core = Tensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    const double s = 1.0 / std::sqrt(static_cast<double>(i + 1));
    for (std::size_t j = 0; j < d; ++j) {
      core.data[i * d + j] = s * v.data[j * d + i];  // diag(s) @ v^T
    }
  }
  SyntheticActivations out;
  out.delta_w = matmul(u, core);

  Tensor z = rng.normal_tensor({n, d}, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      z.data[i * d + j] *= std::pow(static_cast<double>(j + 1), -0.75);
    }
  }
  out.h = matmul(z, transpose2d(q));
  return out;
}

}  // namespace splab
