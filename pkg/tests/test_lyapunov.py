import logging
import math

import numpy as np
import pytest

from cocyclelab.lyapunov import (
    AvalanchePreconditionError,
    ap_lyapunov,
    avalanche_residual,
    finite_lyapunov,
    free_lyapunov,
    holder_scan,
    lyapunov_sweep,
    orbit_blocks,
)
from cocyclelab.phase import rng_stream, sample_uniform
from cocyclelab.potential import IDENTITY

FREE_L3 = 0.9624236501192069
# arccosh(1.3) - arccosh(1.25) and its linearization 0.1 / sqrt(2.5^2 - 4), via mpmath
FREE_DL = 0.06328573029701433
FREE_DL_LINEAR = 0.06666666666666667


def test_rotation_has_zero_exponent():
    est = finite_lyapunov(0.0, 0.0, IDENTITY, 400, 3, rng_stream(1))
    assert abs(est.mean) < 1e-10


def test_free_closed_form():
    est = finite_lyapunov(3.0, 0.0, IDENTITY, 2000, 5, rng_stream(2))
    assert abs(est.mean - FREE_L3) < 0.01
    assert free_lyapunov(3.0) == pytest.approx(FREE_L3, abs=1e-15)


def test_large_coupling_window():
    est = finite_lyapunov(0.0, 100.0, IDENTITY, 2000, 100, rng_stream(3))
    assert math.log(100) - 3 <= est.mean <= math.log(100) + 3
    assert est.stderr >= 0


def test_sweep_matches_single_estimates_on_shared_phases():
    rows = lyapunov_sweep([0.0, 50.0], 100.0, IDENTITY, 300, 20, rng_stream(4))
    single = finite_lyapunov(50.0, 100.0, IDENTITY, 300, 20, rng_stream(4))
    assert rows[1].mean == pytest.approx(single.mean, rel=1e-12)


def test_stderr_shrinks_with_samples():
    ratios = []
    for rep in range(10):
        a = finite_lyapunov(0.0, 100.0, IDENTITY, 200, 100, rng_stream(50, rep))
        b = finite_lyapunov(0.0, 100.0, IDENTITY, 200, 200, rng_stream(60, rep))
        ratios.append(b.stderr / a.stderr)
    assert abs(np.mean(ratios) - 1 / math.sqrt(2)) < 0.3 / math.sqrt(2)


def test_ap_free_fallback(caplog):
    with caplog.at_level(logging.WARNING):
        est = ap_lyapunov(3.0, 0.0, IDENTITY, 50, 5, rng_stream(5))
    assert "A cocycle" in caplog.text
    assert est.kind == "AP-A"
    assert abs(est.mean - FREE_L3) < 0.02


def test_ap_agrees_with_direct_estimate():
    ap = ap_lyapunov(0.0, 100.0, IDENTITY, 50, 400, rng_stream(6))
    fin = finite_lyapunov(0.0, 100.0, IDENTITY, 2000, 400, rng_stream(7))
    assert ap.kind == "AP-B"
    assert abs(ap.mean - fin.mean) <= 3 * math.hypot(ap.stderr, fin.stderr) + 0.2


def test_ap_rejects_short_blocks():
    with pytest.raises(ValueError):
        ap_lyapunov(0.0, 100.0, IDENTITY, 1, 5, rng_stream(8))


def test_ap_refinement_trend():
    gaps = []
    for K in (8, 16, 32):
        a = ap_lyapunov(0.0, 100.0, IDENTITY, K, 400, rng_stream(9, K))
        b = ap_lyapunov(0.0, 100.0, IDENTITY, 2 * K, 400, rng_stream(9, 2 * K))
        gaps.append(abs(a.mean - b.mean))
    # decreasing on average: the last gap is below the first
    assert gaps[-1] < gaps[0] + 0.05


class TestAvalanche:
    def test_diagonal_blocks_cancel(self):
        assert avalanche_residual([np.diag([100.0, 0.01])] * 10, 100.0) <= 1e-12

    def test_two_blocks_telescope(self):
        m = [np.array([[30.0, 1.0], [2.0, 0.1]]), np.array([[50.0, -3.0], [1.0, 0.0]])]
        assert avalanche_residual(m, 2.0) <= 1e-12

    def test_hyperbolic_blocks(self):
        lam, K, n = 100.0, 20, 50
        A = math.log(lam) - 1.0
        mu = math.exp((math.log(lam) - A) * K)
        x = sample_uniform(rng_stream(10), K * n + 100)
        res = avalanche_residual(orbit_blocks(x, 0.0, lam, IDENTITY, K, n), mu)
        assert res < 10 * n / mu

    def test_norm_precondition_names_index(self):
        with pytest.raises(AvalanchePreconditionError) as info:
            avalanche_residual([np.diag([100.0, 0.01]), np.diag([2.0, 0.5])], 10.0)
        assert info.value.condition == "norm >= mu" and info.value.j == 2

    def test_angle_precondition(self):
        r = np.array([[0.0, -1.0], [1.0, 0.0]])
        d = np.diag([100.0, 0.01])
        with pytest.raises(AvalanchePreconditionError) as info:
            avalanche_residual([d, r @ d, d], 50.0)
        assert info.value.condition == "angle"

    def test_mu_below_count(self):
        with pytest.raises(AvalanchePreconditionError):
            avalanche_residual([np.diag([100.0, 0.01])] * 10, 5.0)


def test_holder_free_increment():
    scan = holder_scan([2.5, 2.6], 0.0, IDENTITY, 2000, 2, rng_stream(11), alpha=1.0)
    dL = scan.rows[0][2]
    assert dL == pytest.approx(FREE_DL, abs=2e-3)
    assert abs(dL - FREE_DL_LINEAR) <= 0.15 * FREE_DL_LINEAR


def test_holder_skips_repeated_energies():
    scan = holder_scan([1.0, 1.0, 2.0], 10.0, IDENTITY, 100, 5, rng_stream(12))
    assert len(scan.rows) == 1


def test_holder_large_coupling_grid_is_finite():
    scan = holder_scan(np.linspace(-200, 200, 41), 100.0, IDENTITY, 500, 50, rng_stream(13))
    assert np.isfinite(scan.max_ratio) and len(scan.rows) == 40
