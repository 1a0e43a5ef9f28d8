#include "splab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "splab/errors.hpp"

namespace splab {

namespace {

constexpr double kOrthTol = 1e-12;
constexpr std::size_t kMaxSweeps = 60;

double column_dot(const std::vector<double>& w, std::size_t m, std::size_t n,
                  std::size_t p, std::size_t q) {
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += w[i * n + p] * w[i * n + q];
  return s;
}

void rotate_columns(std::vector<double>& w, std::size_t m, std::size_t n,
                    std::size_t p, std::size_t q, double cs, double sn) {
  for (std::size_t i = 0; i < m; ++i) {
    const double wp = w[i * n + p], wq = w[i * n + q];
    w[i * n + p] = cs * wp - sn * wq;
    w[i * n + q] = sn * wp + cs * wq;
  }
}

// Fill any zero columns of u (m x k) with unit vectors orthogonal to the
// others so u^T u stays an identity even for rank-deficient input.
void complete_orthonormal(Tensor& u, const std::vector<double>& sigma) {
  const std::size_t m = u.shape[0], k = u.shape[1];
  for (std::size_t j = 0; j < k; ++j) {
    if (sigma[j] > 0.0) continue;
    std::vector<double> best(m, 0.0);
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
      std::vector<double> r(m, 0.0);
      r[cand] = 1.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (c != j && !(c > j && sigma[c] == 0.0)) {
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i) proj += r[i] * u.data[i * k + c];
          for (std::size_t i = 0; i < m; ++i) r[i] -= proj * u.data[i * k + c];
        }
      }
      double nrm = 0.0;
      for (double v : r) nrm += v * v;
      nrm = std::sqrt(nrm);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = std::move(r);
      }
    }
    for (std::size_t i = 0; i < m; ++i) u.data[i * k + j] = best[i] / best_norm;
  }
}

SvdResult jacobi_svd_tall(const Tensor& a) {
  const std::size_t m = a.shape[0], n = a.shape[1];
  std::vector<double> w = a.data;       // m x n working copy
  std::vector<double> v(n * n, 0.0);    // accumulated right rotations
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double worst = 0.0;
  bool converged = false;
  for (std::size_t sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    worst = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = column_dot(w, m, n, p, p);
        const double beta = column_dot(w, m, n, q, q);
        const double gamma = column_dot(w, m, n, p, q);
        const double denom = std::sqrt(alpha * beta);
        if (denom == 0.0 || std::abs(gamma) <= kOrthTol * denom) continue;
        worst = std::max(worst, std::abs(gamma) / denom);
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        rotate_columns(w, m, n, p, q, cs, sn);
        rotate_columns(v, n, n, p, q, cs, sn);
      }
    }
    converged = worst == 0.0;
  }
  if (!converged) {
    // One extra scan to measure the residual honestly.
    double resid = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double denom = std::sqrt(column_dot(w, m, n, p, p) *
                                       column_dot(w, m, n, q, q));
        if (denom > 0.0) {
          resid = std::max(resid,
                           std::abs(column_dot(w, m, n, p, q)) / denom);
        }
      }
    }
    if (resid > kOrthTol) {
      std::ostringstream msg;
      msg << "jacobi_svd: no convergence after " << kMaxSweeps
          << " sweeps, residual " << resid;
      throw numeric_error(msg.str());
    }
  }

  std::vector<double> sigma(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    sigma[j] = std::sqrt(column_dot(w, m, n, j, j));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return sigma[x] > sigma[y];
  });

  SvdResult out;
  out.sigma.resize(n);
  out.u = Tensor::zeros({m, n});
  out.v = Tensor::zeros({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = sigma[src];
    const double inv = sigma[src] > 0.0 ? 1.0 / sigma[src] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      out.u.data[i * n + j] = w[i * n + src] * inv;
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.v.data[i * n + j] = v[i * n + src];
    }
  }
  complete_orthonormal(out.u, out.sigma);
  return out;
}

}  // namespace

SvdResult jacobi_svd(const Tensor& a) {
  if (a.rank() != 2) throw config_error("jacobi_svd: rank-2 tensor required");
  check_finite(a, "jacobi_svd input");
  if (a.shape[0] >= a.shape[1]) return jacobi_svd_tall(a);
  // Wide matrix: factor the transpose and swap the singular bases.
  SvdResult t = jacobi_svd_tall(transpose2d(a));
  SvdResult out;
  out.u = std::move(t.v);
  out.v = std::move(t.u);
  out.sigma = std::move(t.sigma);
  return out;
}

namespace {

double power_iterate(const Tensor& a, Tensor v, std::size_t steps,
                     double tol) {
  double nv = frobenius_norm(v);
  if (nv == 0.0) {
    v.data[0] = 1.0;
    nv = 1.0;
  }
  v = (1.0 / nv) * v;
  const Tensor at = transpose2d(a);
  double sigma = 0.0;
  for (std::size_t it = 0; it < steps; ++it) {
    const Tensor av = matmul(a, v);
    const double s = frobenius_norm(av);
    if (s == 0.0) return 0.0;
    Tensor w = matmul(at, av);
    const double nw = frobenius_norm(w);
    if (nw == 0.0) return s;
    v = (1.0 / nw) * w;
    if (std::abs(s - sigma) <= tol * std::max(1.0, s)) {
      sigma = s;
      break;
    }
    sigma = s;
  }
  return sigma;
}

}  // namespace

double op_norm_power(const Tensor& a, Prng& rng, std::size_t steps,
                     double tol) {
  if (a.rank() != 2) throw config_error("op_norm_power: rank-2 required");
  return power_iterate(a, rng.normal_tensor({a.shape[1], 1}, 0.0, 1.0), steps,
                       tol);
}

double op_norm_power(const Tensor& a, const Tensor& start, std::size_t steps,
                     double tol) {
  if (a.rank() != 2) throw config_error("op_norm_power: rank-2 required");
  if (start.size() != a.shape[1]) {
    throw config_error("op_norm_power: start vector length mismatch");
  }
  return power_iterate(a, start.reshaped({a.shape[1], 1}), steps, tol);
}

Tensor svd_reconstruct(const SvdResult& svd, std::size_t rank) {
  const std::size_t m = svd.u.shape[0], k = svd.u.shape[1],
                    n = svd.v.shape[0];
  const std::size_t r = std::min(rank, k);
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t t = 0; t < r; ++t) {
    const double s = svd.sigma[t];
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      const double us = svd.u.data[i * k + t] * s;
      for (std::size_t j = 0; j < n; ++j) {
        out.data[i * n + j] += us * svd.v.data[j * k + t];
      }
    }
  }
  return out;
}

}  // namespace splab
