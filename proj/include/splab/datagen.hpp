#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splab/tensor.hpp"

namespace splab {

// ------------------------------------------------------------------ fields

// Real Gaussian random field: half-spectrum coefficients i.i.d. standard
// complex Gaussian scaled by (1+||k||^2)^(-alpha/2), Hermitian symmetry
// enforced, inverse unitary FFT.  Deterministic in seed.
Tensor sample_grf(const std::vector<std::size_t>& grid, double alpha,
                  std::uint64_t seed);

// Exact periodic heat propagator on [0,1)^d: each mode decays by
// exp(-nu * (2*pi*||k||)^2 * dt).
Tensor heat_step_exact(const Tensor& u, double nu, double dt);

// Pseudo-spectral viscous Burgers on [0,1): RK4 in time, flux (advective)
// form, 2/3 dealiasing.  Returns the trajectory u_0..u_steps.  Enforces the
// advective CFL dt <= 0.5*dx/max|u0| (error suggests a dt) and checks mean
// conservation each step.
std::vector<Tensor> burgers_rollout(const Tensor& u0, double nu, double dt,
                                    std::size_t steps);

// ----------------------------------------------------------------- datasets

struct TaskSpec {
  std::string solver = "heat";  // "heat" | "burgers"
  std::vector<std::size_t> grid = {128};
  double alpha = 2.0;   // random-field decay of the inputs
  double nu = 0.01;
  double dt = 0.1;      // integrator step; map horizon = dt * steps
  std::size_t steps = 1;
  std::size_t samples = 512;
  std::uint64_t seed = 0;
  // Optional per-sample amplitude draw applied after unit-RMS scaling.
  double amp_lo = 1.0;
  double amp_hi = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static TaskSpec from_json(const nlohmann::json& j);
};

struct Dataset {
  TaskSpec spec;
  Tensor inputs;   // {samples, grid...}
  Tensor targets;  // {samples, grid...}
};

// Deterministic generation: per-sample seeds derived from spec.seed, inputs
// scaled to unit RMS (then amplitude-drawn when configured), targets from
// the task's solver over the full horizon.
Dataset build_dataset(const TaskSpec& spec);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Fixed 90/10 split by sample index: first floor(0.9 n) train, rest test.
struct SplitView {
  Tensor train_inputs, train_targets;
  Tensor test_inputs, test_targets;
};
SplitView split_dataset(const Dataset& ds);

// Contiguous sample range [lo, hi) of a {samples, ...} tensor.
Tensor take_samples(const Tensor& t, std::size_t lo, std::size_t hi);

}  // namespace splab
