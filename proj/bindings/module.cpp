// Python surface: numpy-facing wrappers over the schedule, parameter
// counting, FFT, SVD, field generation, solvers, adapters, metrics, and the
// bound verifiers.  Tensors cross the boundary as C-contiguous float64
// arrays; reports cross as JSON strings.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "splab/datagen.hpp"
#include "splab/diagnostics.hpp"
#include "splab/errors.hpp"
#include "splab/fft.hpp"
#include "splab/linalg.hpp"
#include "splab/peft.hpp"
#include "splab/rng.hpp"
#include "splab/tensor.hpp"
#include "splab/theory.hpp"

namespace py = pybind11;

namespace {

using array_f64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

splab::Tensor from_array(const array_f64& arr) {
  std::vector<std::size_t> shape(static_cast<std::size_t>(arr.ndim()));
  for (std::size_t i = 0; i < shape.size(); ++i) {
    shape[i] = static_cast<std::size_t>(arr.shape(static_cast<py::ssize_t>(i)));
  }
  const double* data = arr.data();
  return splab::Tensor(std::move(shape),
                       std::vector<double>(data, data + arr.size()));
}

py::array_t<double> to_array(const splab::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.size());
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    shape[i] = static_cast<py::ssize_t>(t.shape[i]);
  }
  py::array_t<double> out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

std::vector<std::size_t> all_axes(const splab::Tensor& t) {
  std::vector<std::size_t> axes(t.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return axes;
}

}  // namespace

PYBIND11_MODULE(_splab, m) {
  m.doc() = "spectral operator fine-tuning laboratory (C++ core)";

  py::register_exception<splab::config_error>(m, "ConfigError",
                                              PyExc_ValueError);
  py::register_exception<splab::numeric_error>(m, "NumericError",
                                               PyExc_ArithmeticError);

  // ------------------------------------------------------------- schedule
  m.def(
      "schedule_widths",
      [](std::size_t modes, std::size_t bands, std::size_t r_min,
         std::size_t r_max, double p, bool inverse) {
        return splab::make_band_schedule(modes, bands, r_min, r_max, p,
                                         inverse)
            .widths;
      },
      py::arg("modes"), py::arg("bands"), py::arg("r_min"), py::arg("r_max"),
      py::arg("p") = 2.0, py::arg("inverse") = false,
      "Per-band bottleneck widths of the frequency-adaptive schedule.");

  m.def(
      "band_boundaries",
      [](std::size_t modes, std::size_t bands) {
        return splab::band_boundaries(modes, bands);
      },
      py::arg("modes"), py::arg("bands"),
      "Contiguous band edges over the retained modes.");

  m.def(
      "count_params",
      [](std::size_t d, std::size_t k_blocks, std::size_t h_t,
         const std::vector<std::size_t>& widths) {
        const splab::ParamCounts c =
            splab::count_params_eq13(d, k_blocks, h_t, widths);
        return py::make_tuple(c.formula, c.actual);
      },
      py::arg("d"), py::arg("k_blocks"), py::arg("h_t"), py::arg("widths"),
      "(closed-form, enumerated) parameter counts for one layer of banded "
      "adapter triples.");

  // ------------------------------------------------------------------ fft
  m.def(
      "rfft",
      [](const array_f64& x) {
        const splab::Tensor t = from_array(x);
        const splab::SpectralTensor s = splab::rfftn(t, all_axes(t));
        return py::make_tuple(to_array(s.real), to_array(s.imag));
      },
      py::arg("x"),
      "Unitary real FFT over every axis; returns (real, imag) with the last "
      "axis halved to n/2+1 bins.");

  m.def(
      "irfft",
      [](const array_f64& real, const array_f64& imag,
         const std::vector<std::size_t>& source_shape) {
        splab::SpectralTensor s;
        s.real = from_array(real);
        s.imag = from_array(imag);
        s.source_shape = source_shape;
        s.axes.resize(source_shape.size());
        for (std::size_t i = 0; i < s.axes.size(); ++i) s.axes[i] = i;
        return to_array(splab::irfftn(s));
      },
      py::arg("real"), py::arg("imag"), py::arg("source_shape"),
      "Inverse of rfft; source_shape restores the full spatial extent.");

  // --------------------------------------------------------------- linalg
  m.def(
      "svd",
      [](const array_f64& a) {
        const splab::SvdResult r = splab::jacobi_svd(from_array(a));
        return py::make_tuple(to_array(r.u), py::cast(r.sigma),
                              to_array(r.v));
      },
      py::arg("a"),
      "One-sided Jacobi thin SVD: (u, sigma, v) with a = u @ diag(sigma) @ "
      "v.T.");

  m.def(
      "low_rank_residual",
      [](const array_f64& a, std::size_t rank) {
        auto [trunc, residual] =
            splab::eckart_young_truncate(from_array(a), rank);
        return py::make_tuple(to_array(trunc), residual);
      },
      py::arg("a"), py::arg("rank"),
      "(best rank-r approximation, spectral norm of the residual).");

  // --------------------------------------------------------------- fields
  m.def(
      "sample_grf",
      [](const std::vector<std::size_t>& grid, double alpha,
         std::uint64_t seed) {
        return to_array(splab::sample_grf(grid, alpha, seed));
      },
      py::arg("grid"), py::arg("alpha"), py::arg("seed"),
      "Gaussian random field with power-law spectral decay.");

  m.def(
      "heat_step_exact",
      [](const array_f64& u, double nu, double dt) {
        return to_array(splab::heat_step_exact(from_array(u), nu, dt));
      },
      py::arg("u"), py::arg("nu"), py::arg("dt"),
      "Exact periodic diffusion propagator over one horizon.");

  m.def(
      "burgers_rollout",
      [](const array_f64& u0, double nu, double dt, std::size_t steps) {
        const std::vector<splab::Tensor> traj =
            splab::burgers_rollout(from_array(u0), nu, dt, steps);
        std::vector<std::size_t> shape = {traj.size()};
        for (std::size_t d : traj[0].shape) shape.push_back(d);
        splab::Tensor packed = splab::Tensor::zeros(shape);
        std::size_t offset = 0;
        for (const splab::Tensor& t : traj) {
          std::copy(t.data.begin(), t.data.end(),
                    packed.data.begin() + static_cast<std::ptrdiff_t>(offset));
          offset += t.size();
        }
        return to_array(packed);
      },
      py::arg("u0"), py::arg("nu"), py::arg("dt"), py::arg("steps"),
      "Pseudo-spectral viscous advection trajectory, shape {steps+1, n}.");

  // -------------------------------------------------------------- adapters
  m.def(
      "adapter_forward",
      [](const array_f64& z, std::size_t bottleneck, double scale,
         std::uint64_t seed) {
        const splab::Tensor t = from_array(z);
        splab::Prng rng(seed);
        const splab::AdapterParams params = splab::make_adapter_params(
            t.shape.back(), bottleneck, scale, rng);
        return to_array(splab::adapter_forward(t, params));
      },
      py::arg("z"), py::arg("bottleneck"), py::arg("scale"), py::arg("seed"),
      "Residual bottleneck adapter with fresh (identity-at-creation) "
      "parameters drawn from seed.");

  // --------------------------------------------------------------- metrics
  m.def(
      "l2re",
      [](const array_f64& pred, const array_f64& truth) {
        return splab::l2re(from_array(pred), from_array(truth));
      },
      py::arg("pred"), py::arg("truth"),
      "Mean per-sample relative L2 error over axis 0.");

  m.def(
      "effective_rank",
      [](const array_f64& w, double tau) {
        return splab::effective_rank(from_array(w), tau);
      },
      py::arg("w"), py::arg("tau") = 0.01,
      "Count of singular values at least tau times the largest.");

  m.def(
      "energy_spectrum",
      [](const std::vector<array_f64>& components) {
        std::vector<splab::Tensor> fields;
        fields.reserve(components.size());
        for (const array_f64& c : components) fields.push_back(from_array(c));
        const splab::SpectrumProfile s = splab::energy_spectrum(fields);
        return py::make_tuple(py::cast(s.energy), s.residual);
      },
      py::arg("components"),
      "Shell-averaged energy spectrum summed over field components: "
      "(energy per shell, residual).");

  m.def(
      "rmsle_spectrum",
      [](const std::vector<double>& pred, const std::vector<double>& ref) {
        splab::SpectrumProfile p, r;
        p.energy = pred;
        r.energy = ref;
        return splab::rmsle_spectrum(p, r);
      },
      py::arg("pred"), py::arg("ref"),
      "Root-mean-square log10 discrepancy over comparable shells.");

  m.def(
      "relerr_energy",
      [](const std::vector<double>& pred, const std::vector<double>& ref) {
        splab::SpectrumProfile p, r;
        p.energy = pred;
        r.energy = ref;
        return splab::relerr_energy(p, r);
      },
      py::arg("pred"), py::arg("ref"),
      "Percent discrepancy of trapezoid-integrated spectra.");

  // ---------------------------------------------------------------- theory
  m.def(
      "theory_report",
      [](const std::string& name, std::size_t trials, double alpha,
         double sobolev_s, std::size_t dim, std::uint64_t seed) {
        splab::TheoryConfig cfg;
        cfg.trials = trials;
        cfg.alpha = alpha;
        cfg.sobolev_s = sobolev_s;
        cfg.dim = dim;
        cfg.seed = seed;
        splab::BoundReport rep;
        if (name == "blockwise") {
          rep = splab::verify_blockwise_lora_bound(cfg);
        } else if (name == "decay") {
          rep = splab::verify_spectral_decay(cfg);
        } else if (name == "tail") {
          rep = splab::verify_tail_energy_split(cfg);
        } else if (name == "decomposition") {
          rep = splab::verify_adapter_error_decomposition(cfg);
        } else {
          throw splab::config_error(
              "theory_report: name must be one of blockwise, decay, tail, "
              "decomposition");
        }
        return rep.to_json().dump();
      },
      py::arg("name"), py::arg("trials") = 100, py::arg("alpha") = 2.0,
      py::arg("sobolev_s") = 2.0, py::arg("dim") = 1, py::arg("seed") = 0,
      "Run one bound verifier and return its JSON report.");
}
