#include "splab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "splab/errors.hpp"
#include "splab/fft.hpp"
#include "splab/rng.hpp"
#include "splab/serialize.hpp"

namespace splab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kSampleStride = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kAmpSalt = 0xD1B54A32D192ED03ULL;

void check_grid(const std::vector<std::size_t>& grid) {
  if (grid.empty() || grid.size() > 2) {
    throw config_error("grid must have one or two axes");
  }
  for (std::size_t n : grid) {
    if (n < 2 || !is_power_of_two(n)) {
      throw config_error("grid sizes must be powers of two >= 2");
    }
  }
}

}  // namespace

// ------------------------------------------------------------------ fields

Tensor sample_grf(const std::vector<std::size_t>& grid, double alpha,
                  std::uint64_t seed) {
  check_grid(grid);
  if (2.0 * alpha <= static_cast<double>(grid.size())) {
    throw config_error("sample_grf: need alpha > d/2 for finite variance");
  }
  Prng rng(seed);
  const std::size_t dims = grid.size();
  const std::size_t last = grid.back();
  const std::size_t half = last / 2 + 1;
  std::vector<std::size_t> half_shape(grid);
  half_shape.back() = half;

  SpectralTensor spec;
  spec.real = Tensor::zeros(half_shape);
  spec.imag = Tensor::zeros(half_shape);
  spec.source_shape = grid;
  spec.axes.resize(dims);
  for (std::size_t a = 0; a < dims; ++a) spec.axes[a] = a;

  const std::size_t lead = dims == 1 ? 1 : grid[0];
  for (std::size_t i = 0; i < lead; ++i) {
    const double ki =
        dims == 1 ? 0.0
                  : static_cast<double>(std::min(i, grid[0] - i));
    for (std::size_t j = 0; j < half; ++j) {
      const double k_sq = ki * ki + static_cast<double>(j * j);
      const double amp = std::pow(1.0 + k_sq, -alpha / 2.0);
      const std::size_t idx = i * half + j;
      spec.real.data[idx] = amp * rng.normal();
      spec.imag.data[idx] = amp * rng.normal();
    }
  }

  // Hermitian fix-up so the inverse transform is exactly real: boundary
  // planes of the halved axis pair bins across the full axes, and
  // self-conjugate bins must be real.
  if (dims == 1) {
    spec.imag.data[0] = 0.0;
    spec.imag.data[half - 1] = 0.0;
  } else {
    const std::size_t n0 = grid[0];
    for (std::size_t j : {std::size_t{0}, half - 1}) {
      for (std::size_t i = n0 / 2 + 1; i < n0; ++i) {
        spec.real.data[i * half + j] = spec.real.data[(n0 - i) * half + j];
        spec.imag.data[i * half + j] = -spec.imag.data[(n0 - i) * half + j];
      }
      spec.imag.data[0 * half + j] = 0.0;
      spec.imag.data[(n0 / 2) * half + j] = 0.0;
    }
  }
  return irfftn(spec);
}

Tensor heat_step_exact(const Tensor& u, double nu, double dt) {
  check_grid(u.shape);
  if (nu < 0.0 || dt < 0.0) {
    throw config_error("heat_step_exact: nu and dt must be nonnegative");
  }
  const std::size_t dims = u.rank();
  std::vector<std::size_t> axes(dims);
  for (std::size_t a = 0; a < dims; ++a) axes[a] = a;
  SpectralTensor spec = rfftn(u, axes);

  const std::size_t last = u.shape.back();
  const std::size_t half = last / 2 + 1;
  const std::size_t lead = dims == 1 ? 1 : u.shape[0];
  for (std::size_t i = 0; i < lead; ++i) {
    const double ki =
        dims == 1 ? 0.0
                  : static_cast<double>(std::min(i, u.shape[0] - i));
    for (std::size_t j = 0; j < half; ++j) {
      const double k_sq = ki * ki + static_cast<double>(j * j);
      const double decay =
          std::exp(-nu * 4.0 * kPi * kPi * k_sq * dt);
      spec.real.data[i * half + j] *= decay;
      spec.imag.data[i * half + j] *= decay;
    }
  }
  return irfftn(spec);
}

// ------------------------------------------------------------------ burgers

namespace {

struct HalfState {
  std::vector<double> re, im;
};

HalfState axpy(const HalfState& a, double c, const HalfState& b) {
  HalfState out = a;
  for (std::size_t i = 0; i < out.re.size(); ++i) {
    out.re[i] += c * b.re[i];
    out.im[i] += c * b.im[i];
  }
  return out;
}

}  // namespace

std::vector<Tensor> burgers_rollout(const Tensor& u0, double nu, double dt,
                                    std::size_t steps) {
  if (u0.rank() != 1) {
    throw config_error("burgers_rollout: one-dimensional fields only");
  }
  check_grid(u0.shape);
  if (nu < 0.0 || dt <= 0.0) {
    throw config_error("burgers_rollout: need nu >= 0 and dt > 0");
  }
  const std::size_t n = u0.shape[0];
  const std::size_t half = n / 2 + 1;
  const double dx = 1.0 / static_cast<double>(n);
  const double umax = max_abs(u0);
  if (umax > 0.0 && dt > 0.5 * dx / umax) {
    throw config_error(
        "burgers_rollout: advective CFL violated; reduce dt to <= " +
        std::to_string(0.5 * dx / umax));
  }

  const std::vector<std::size_t> axes = {0};
  auto to_half = [&](const Tensor& u) {
    SpectralTensor s = rfftn(u, axes);
    HalfState h;
    h.re = s.real.data;
    h.im = s.imag.data;
    return h;
  };
  auto to_field = [&](const HalfState& h) {
    SpectralTensor s;
    s.real = Tensor::zeros({half});
    s.imag = Tensor::zeros({half});
    s.real.data = h.re;
    s.imag.data = h.im;
    s.source_shape = {n};
    s.axes = axes;
    return irfftn(s);
  };

  // Advective nonlinearity -u u_x computed pseudo-spectrally with the 2/3
  // rule, plus exact spectral diffusion.
  auto rhs = [&](const HalfState& h) {
    HalfState dh;
    dh.re.assign(half, 0.0);
    dh.im.assign(half, 0.0);
    HalfState ux;
    ux.re.assign(half, 0.0);
    ux.im.assign(half, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
      const double wk = 2.0 * kPi * static_cast<double>(k);
      ux.re[k] = -wk * h.im[k];
      ux.im[k] = wk * h.re[k];
    }
    Tensor u = to_field(h);
    Tensor du = to_field(ux);
    Tensor prod = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
      prod.data[i] = -u.data[i] * du.data[i];
    }
    SpectralTensor ns = rfftn(prod, axes);
    for (std::size_t k = 0; k < half; ++k) {
      const bool keep = 3 * k <= n;
      const double wk = 2.0 * kPi * static_cast<double>(k);
      const double visc = nu * wk * wk;
      dh.re[k] = (keep ? ns.real.data[k] : 0.0) - visc * h.re[k];
      dh.im[k] = (keep ? ns.imag.data[k] : 0.0) - visc * h.im[k];
    }
    return dh;
  };

  double mean0 = 0.0;
  for (double v : u0.data) mean0 += v;
  mean0 /= static_cast<double>(n);

  std::vector<Tensor> traj;
  traj.reserve(steps + 1);
  traj.push_back(u0);
  HalfState state = to_half(u0);
  for (std::size_t step = 0; step < steps; ++step) {
    HalfState k1 = rhs(state);
    HalfState k2 = rhs(axpy(state, 0.5 * dt, k1));
    HalfState k3 = rhs(axpy(state, 0.5 * dt, k2));
    HalfState k4 = rhs(axpy(state, dt, k3));
    for (std::size_t i = 0; i < half; ++i) {
      state.re[i] +=
          dt / 6.0 * (k1.re[i] + 2.0 * k2.re[i] + 2.0 * k3.re[i] + k4.re[i]);
      state.im[i] +=
          dt / 6.0 * (k1.im[i] + 2.0 * k2.im[i] + 2.0 * k3.im[i] + k4.im[i]);
    }
    Tensor u = to_field(state);
    check_finite(u, ("burgers_rollout step " + std::to_string(step + 1)).c_str());
    double mean = 0.0;
    for (double v : u.data) mean += v;
    mean /= static_cast<double>(n);
    if (std::abs(mean - mean0) > 1e-10) {
      throw numeric_error("burgers_rollout: mean drifted by " +
                          std::to_string(std::abs(mean - mean0)) +
                          " at step " + std::to_string(step + 1));
    }
    traj.push_back(std::move(u));
  }
  return traj;
}

// ----------------------------------------------------------------- datasets

void TaskSpec::validate() const {
  if (solver != "heat" && solver != "burgers") {
    throw config_error("task solver must be \"heat\" or \"burgers\"");
  }
  check_grid(grid);
  if (solver == "burgers" && grid.size() != 1) {
    throw config_error("burgers tasks are one-dimensional");
  }
  if (2.0 * alpha <= static_cast<double>(grid.size())) {
    throw config_error("task alpha must exceed d/2");
  }
  if (nu < 0.0) throw config_error("task nu must be nonnegative");
  if (dt <= 0.0) throw config_error("task dt must be positive");
  if (steps < 1) throw config_error("task steps must be >= 1");
  if (samples < 1) throw config_error("task samples must be >= 1");
  if (amp_lo <= 0.0 || amp_hi < amp_lo) {
    throw config_error("task amplitude range needs 0 < amp_lo <= amp_hi");
  }
}

nlohmann::json TaskSpec::to_json() const {
  return {{"solver", solver}, {"grid", grid},       {"alpha", alpha},
          {"nu", nu},         {"dt", dt},           {"steps", steps},
          {"samples", samples}, {"seed", seed},     {"amp_lo", amp_lo},
          {"amp_hi", amp_hi}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  TaskSpec spec;
  spec.solver = j.value("solver", spec.solver);
  if (j.contains("grid")) {
    spec.grid = j.at("grid").get<std::vector<std::size_t>>();
  }
  spec.alpha = j.value("alpha", spec.alpha);
  spec.nu = j.value("nu", spec.nu);
  spec.dt = j.value("dt", spec.dt);
  spec.steps = j.value("steps", spec.steps);
  spec.samples = j.value("samples", spec.samples);
  spec.seed = j.value("seed", spec.seed);
  spec.amp_lo = j.value("amp_lo", spec.amp_lo);
  spec.amp_hi = j.value("amp_hi", spec.amp_hi);
  return spec;
}

Dataset build_dataset(const TaskSpec& spec) {
  spec.validate();
  std::vector<std::size_t> shape;
  shape.push_back(spec.samples);
  for (std::size_t n : spec.grid) shape.push_back(n);
  Dataset ds;
  ds.spec = spec;
  ds.inputs = Tensor::zeros(shape);
  ds.targets = Tensor::zeros(shape);

  std::size_t field = 1;
  for (std::size_t n : spec.grid) field *= n;

  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::uint64_t seed_i =
        spec.seed + static_cast<std::uint64_t>(i) * kSampleStride;
    Tensor u = sample_grf(spec.grid, spec.alpha, seed_i);
    double rms = frobenius_norm(u) / std::sqrt(static_cast<double>(field));
    if (rms > 0.0) {
      for (double& v : u.data) v /= rms;
    }
    Prng amp_rng(seed_i ^ kAmpSalt);
    const double amp = amp_rng.uniform(spec.amp_lo, spec.amp_hi);
    for (double& v : u.data) v *= amp;

    Tensor target;
    if (spec.solver == "heat") {
      target = heat_step_exact(u, spec.nu,
                               spec.dt * static_cast<double>(spec.steps));
    } else {
      target = burgers_rollout(u, spec.nu, spec.dt, spec.steps).back();
    }
    std::copy(u.data.begin(), u.data.end(),
              ds.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * field));
    std::copy(target.data.begin(), target.data.end(),
              ds.targets.data.begin() + static_cast<std::ptrdiff_t>(i * field));
  }
  return ds;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  Archive ar;
  ar.header = {{"format", "splab-dataset-v1"}, {"spec", ds.spec.to_json()}};
  ar.tensors.emplace_back("inputs", ds.inputs);
  ar.tensors.emplace_back("targets", ds.targets);
  write_archive(path, ar);
}

Dataset read_dataset(const std::string& path) {
  Archive ar = read_archive(path);
  if (!ar.header.contains("spec")) {
    throw config_error("dataset file lacks a task spec: " + path);
  }
  Dataset ds;
  ds.spec = TaskSpec::from_json(ar.header.at("spec"));
  ds.inputs = ar.find("inputs");
  ds.targets = ar.find("targets");
  if (!same_shape(ds.inputs, ds.targets)) {
    throw config_error("dataset inputs/targets shapes differ: " + path);
  }
  return ds;
}

SplitView split_dataset(const Dataset& ds) {
  const std::size_t n = ds.inputs.shape[0];
  const std::size_t n_train = n * 9 / 10;
  SplitView view;
  view.train_inputs = take_samples(ds.inputs, 0, n_train);
  view.train_targets = take_samples(ds.targets, 0, n_train);
  view.test_inputs = take_samples(ds.inputs, n_train, n);
  view.test_targets = take_samples(ds.targets, n_train, n);
  return view;
}

Tensor take_samples(const Tensor& t, std::size_t lo, std::size_t hi) {
  if (t.rank() < 1 || lo > hi || hi > t.shape[0]) {
    throw config_error("take_samples: bad range");
  }
  std::vector<std::size_t> shape = t.shape;
  shape[0] = hi - lo;
  Tensor out = Tensor::zeros(shape);
  const std::size_t stride = t.shape[0] == 0 ? 0 : t.size() / t.shape[0];
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(lo * stride),
            t.data.begin() + static_cast<std::ptrdiff_t>(hi * stride),
            out.data.begin());
  return out;
}

}  // namespace splab
