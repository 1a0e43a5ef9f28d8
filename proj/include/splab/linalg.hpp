#pragma once

#include <cstddef>
#include <vector>

#include "splab/rng.hpp"
#include "splab/tensor.hpp"

namespace splab {

// Thin SVD A = u * diag(sigma) * v^T with k = min(m, n) columns kept.
struct SvdResult {
  Tensor u;                   // m x k
  std::vector<double> sigma;  // descending, non-negative
  Tensor v;                   // n x k
};

// One-sided Jacobi SVD: deterministic, provably convergent at these sizes.
// Sweeps stop when every column pair is orthogonal to 1e-12 relative to the
// column norms, or after 60 sweeps (then a numeric_error reports the
// residual).
SvdResult jacobi_svd(const Tensor& a);

// Largest singular value estimated by power iteration on A^T A.
double op_norm_power(const Tensor& a, Prng& rng, std::size_t steps = 500,
                     double tol = 1e-12);
// Same, started from a caller-supplied direction (length = column count);
// useful when a good candidate for the top right-singular vector is known.
double op_norm_power(const Tensor& a, const Tensor& start,
                     std::size_t steps = 500, double tol = 1e-12);

// Reconstruction u * diag(sigma) * v^T, optionally truncated to the leading
// `rank` triplets.
Tensor svd_reconstruct(const SvdResult& svd, std::size_t rank);

}  // namespace splab
