"""End-to-end smoke checks of the compiled python surface.

Run directly (``python smoke_test.py``) or under pytest; every check uses
plain asserts so both entry points agree.
"""

import json
import math

import numpy as np

import splab


def test_schedule_widths():
    assert splab.schedule_widths(16, 4, 4, 16, p=2.0) == [13, 8, 5, 4]
    assert splab.schedule_widths(16, 4, 4, 16, p=2.0, inverse=True) == [4, 5, 8, 13]
    assert splab.band_boundaries(16, 4) == [0, 4, 8, 12, 16]


def test_count_params():
    widths = [13, 8, 5, 4]
    formula, actual = splab.count_params(8, 4, 1, widths)
    assert formula == (2 * 8 + 1) * 4 * (2 + 1) * sum(widths)
    assert actual >= formula  # enumeration carries the up-projection biases


def test_fft_round_trip():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 16))
    re, im = splab.rfft(x)
    assert re.shape == (4, 9)
    back = splab.irfft(re, im, [4, 16])
    assert np.max(np.abs(back - x)) < 1e-12
    # unitary normalization: Parseval with conjugate-pair doubling
    weight = np.ones(9)
    weight[1:-1] = 2.0
    spectral = np.sum((re**2 + im**2) * weight)
    assert abs(spectral - np.sum(x**2)) < 1e-10


def test_svd_reconstruction():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((7, 5))
    u, sigma, v = splab.svd(a)
    rec = u @ np.diag(sigma) @ np.array(v).T
    assert np.max(np.abs(rec - a)) < 1e-9
    assert all(s >= t for s, t in zip(sigma, sigma[1:]))
    _, residual = splab.low_rank_residual(a, 2)
    assert abs(residual - sigma[2]) < 1e-9


def test_fields_and_solvers():
    u = splab.sample_grf([64], 2.0, seed=7)
    assert u.shape == (64,)
    assert np.max(np.abs(u - splab.sample_grf([64], 2.0, seed=7))) == 0.0
    stepped = splab.heat_step_exact(u, 0.01, 0.1)
    assert abs(np.mean(stepped) - np.mean(u)) < 1e-12  # mean mode persists
    traj = splab.burgers_rollout(u, 0.05, 1e-4, 16)
    assert traj.shape == (17, 64)
    assert np.max(np.abs(traj[0] - u)) == 0.0
    assert abs(np.mean(traj[-1]) - np.mean(u)) < 1e-9


def test_adapter_identity_at_creation():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((6, 12))
    out = splab.adapter_forward(z, bottleneck=4, scale=1.0, seed=3)
    assert np.max(np.abs(out - z)) == 0.0


def test_metrics():
    pred = np.array([[3.0, 4.0], [1.0, 0.0]])
    truth = np.array([[3.0, 4.0], [2.0, 0.0]])
    assert abs(splab.l2re(pred, truth) - 0.25) < 1e-12
    ref = [4.0, 2.0, 1.0, 0.5]
    assert splab.rmsle_spectrum([10 * e for e in ref], ref) == 1.0
    assert splab.relerr_energy([1.1 * e for e in ref], ref) == 10.0
    u = splab.sample_grf([32], 1.5, seed=5)
    energy, residual = splab.energy_spectrum([u])
    assert abs(sum(energy) + residual - 0.5 * np.sum(u**2)) < 1e-10
    try:
        splab.l2re(pred, np.zeros_like(truth))
    except splab.ConfigError:
        pass
    else:
        raise AssertionError("zero-norm target should raise ConfigError")


def test_theory_report():
    rep = json.loads(splab.theory_report("tail", dim=1, sobolev_s=2.0))
    assert rep["pass"] is True
    slope = rep["details"]["slope"]
    assert math.isfinite(slope) and abs(slope - (1 - 2 * 2.0)) <= 0.3


def main():
    checks = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for check in checks:
        check()
        print(f"ok {check.__name__}")
    print(f"smoke: {len(checks)} checks passed")


if __name__ == "__main__":
    main()
