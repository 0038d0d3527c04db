"""Fast oracle and invariant checks behind ``cocycle-lab selftest``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cocycle, ldt, lyapunov, spectrum
from .phase import rng_stream, sample_uniform
from .potential import IDENTITY


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _transfer(rng):
    m = cocycle.transfer_step(0.25, 1.0, 10.0, IDENTITY)
    ok = np.array_equal(m, [[-1.5, -1.0], [1.0, 0.0]])
    return ok, "A(0.25, E=1, lambda=10)"


def _rotation(rng):
    p = cocycle.cocycle_product(sample_uniform(rng, 200), 0.0, 0.0, IDENTITY, 4)
    err = float(np.abs(p.matrix() - np.eye(2)).max())
    return err < 1e-14, f"|A_4 - I| = {err:.2e}"


def _det_identity(rng):
    offsets, worst = set(), 0.0
    for i in range(10):
        lam = (5.0, 50.0)[i % 2]
        n = int(rng.integers(1, 31))
        res = spectrum.verify_det_identity(sample_uniform(rng, 200), lam, IDENTITY, rng.uniform(-2 * lam, 2 * lam), n)
        offsets.add(res.offset)
        worst = max(worst, res.max_error)
    return offsets == {1} and worst < 1e-8, f"offsets {sorted(offsets)}, max error {worst:.2e}"


def _logdet(rng):
    worst = 0.0
    for _ in range(20):
        N = int(rng.integers(0, 13))
        op = spectrum.build_finite(sample_uniform(rng, 200), 10.0, IDENTITY, N)
        E = rng.uniform(-2, 12)
        seq = spectrum.logdet_sequence(op, E)
        s, l = np.linalg.slogdet(op.dense() - E * np.eye(N + 1))
        worst = max(worst, abs(seq[-1].log_abs - l) / max(1.0, abs(l)))
        if seq[-1].sign != s:
            return False, "sign mismatch"
    return worst < 1e-9, f"max relative log error {worst:.2e}"


def _greens(rng):
    worst = 0.0
    for _ in range(20):
        N = int(rng.integers(1, 13))
        op = spectrum.build_finite(sample_uniform(rng, 200), 10.0, IDENTITY, N)
        E = rng.uniform(-2, 12)
        G = np.linalg.inv(op.dense() - E * np.eye(N + 1))
        sign, logs = spectrum.greens_log_matrix(op, E)
        if not np.array_equal(sign, np.sign(G)):
            return False, "sign mismatch"
        ref = np.log(np.abs(G))
        worst = max(worst, float(np.max(np.abs(logs - ref) / np.maximum(1.0, np.abs(ref)))))
    return worst < 1e-8, f"max relative log error {worst:.2e}"


def _free_chain(rng):
    m = 12
    op = spectrum.operator_from_diagonal(np.zeros(m))
    ref = 2 * np.cos(np.arange(m, 0, -1) * np.pi / (m + 1))
    ev = spectrum.eigenvalues(op)
    pair = spectrum.eigenvector(op, ev[-1], rng=rng)
    prof = np.sin(np.arange(1, m + 1) * np.pi / (m + 1))
    prof /= np.linalg.norm(prof)
    verr = min(np.abs(pair.vector - prof).max(), np.abs(pair.vector + prof).max())
    err = float(np.abs(ev - ref).max())
    return err < 1e-9 and verr < 1e-9, f"eigenvalue error {err:.2e}, vector error {verr:.2e}"


def _angles(rng):
    worst, worst_r = 0.0, 0.0
    for _ in range(10):
        x = sample_uniform(rng, 300)
        E, beta = rng.uniform(-20, 20), rng.uniform(0, math.pi)
        orb = cocycle.angle_orbit(x, E, 10.0, beta, IDENTITY, 100)
        exp = cocycle.log_norm_expansion(orb, 10.0)
        direct = cocycle.b_apply(x, E, 10.0, IDENTITY, 100, beta) / 100
        worst = max(worst, abs(exp.total - direct) / abs(direct))
        worst_r = max(worst_r, abs(exp.total - exp.total_r2))
    return worst < 1e-8 and worst_r < 1e-9, f"angle vs matrix {worst:.2e}, R1 vs R2 {worst_r:.2e}"


def _free_lyapunov(rng):
    est = lyapunov.finite_lyapunov(3.0, 0.0, IDENTITY, 2000, 4, rng)
    err = abs(est.mean - math.acosh(1.5))
    return err < 0.02, f"|L - arccosh(3/2)| = {err:.2e}"


def _avalanche(rng):
    r = lyapunov.avalanche_residual([np.diag([100.0, 0.01])] * 10, 100.0)
    return r < 1e-12, f"diagonal residual {r:.2e}"


def _birkhoff(rng):
    rep = ldt.birkhoff_ldt(ldt.fair_sign, 64, 0.1, 4000, rng)
    exact = ldt.fair_sign_tail(64, 0.1)
    lo, hi = rep.wilson_interval
    return lo <= exact <= hi, f"measure {rep.measure_hat:.4f}, exact {exact:.4f}"


def _thouless(rng):
    tab = spectrum.ids_estimate(0.0, IDENTITY, 801, np.linspace(-3, 3, 1201), 1, rng)
    res = spectrum.thouless_residual(tab, 3.0, math.acosh(1.5))
    return res < 0.02, f"residual {res:.2e}"


CHECKS = [
    ("transfer_step", _transfer),
    ("free_rotation", _rotation),
    ("det_identity", _det_identity),
    ("logdet_vs_dense", _logdet),
    ("greens_vs_inverse", _greens),
    ("free_chain_closed_form", _free_chain),
    ("angle_matrix_consistency", _angles),
    ("free_lyapunov", _free_lyapunov),
    ("avalanche_diagonal", _avalanche),
    ("birkhoff_binomial", _birkhoff),
    ("thouless_free", _thouless),
]


def run_checks(seed: int = 0) -> list[Check]:
    out = []
    for i, (name, fn) in enumerate(CHECKS):
        rng = rng_stream(seed, i)
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # noqa: BLE001
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail))
    return out
