"""Monte-Carlo Lyapunov exponents, the avalanche principle, Hölder scans."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cocycle import NormalizedProduct, _MatrixState, a_log_norms, b_log_norms, matrix_norm
from .phase import PhaseEnsemble, orbit, required_precision
from .potential import SamplingFunction, _eval_unchecked

log = logging.getLogger(__name__)

LAMBDA_MIN = 10.0


@dataclass(frozen=True)
class LyapunovEstimate:
    E: float
    lam: float
    n: int
    samples: int
    mean: float
    stderr: float
    kind: str = "A"

    def row(self) -> tuple:
        return (self.E, self.lam, self.n, self.samples, self.mean, self.stderr, self.kind)


def _mean_stderr(values: np.ndarray, axis=-1):
    values = np.asarray(values, dtype=float)
    m = values.shape[axis]
    mean = values.mean(axis=axis)
    if m < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=axis, ddof=1) / math.sqrt(m)


def sample_log_norms(ens: PhaseEnsemble, E, lam: float, f: SamplingFunction, n: int, kind: str = "A"):
    """Per-phase values (1/n) log ||M_n(x, E)|| for M = A or B."""
    if kind == "A":
        return a_log_norms(ens, E, lam, f, n) / n
    if kind == "B":
        return b_log_norms(ens, E, lam, f, n) / n
    raise ValueError(f"cocycle kind must be 'A' or 'B', got {kind!r}")


def finite_lyapunov(E: float, lam: float, f: SamplingFunction, n: int, samples: int,
                    rng: np.random.Generator, kind: str = "A") -> LyapunovEstimate:
    """Mean and standard error of (1/n) log ||A_n(x, E)|| over uniform phases."""
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    ens = PhaseEnsemble.sample(rng, samples, required_precision(n))
    mean, se = _mean_stderr(sample_log_norms(ens, float(E), lam, f, n, kind))
    return LyapunovEstimate(float(E), lam, n, samples, float(mean), float(se), kind)


def lyapunov_sweep(energies, lam: float, f: SamplingFunction, n: int, samples: int,
                   rng: np.random.Generator, kind: str = "A") -> list[LyapunovEstimate]:
    """finite_lyapunov over an energy grid with one shared phase ensemble."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    ens = PhaseEnsemble.sample(rng, samples, required_precision(n))
    vals = sample_log_norms(ens, energies, lam, f, n, kind)
    mean, se = _mean_stderr(vals)
    return [LyapunovEstimate(float(e), lam, n, samples, float(m), float(s), kind)
            for e, m, s in zip(energies, mean, se)]


def ap_values(ens: PhaseEnsemble, E, lam: float, f: SamplingFunction, K: int, lam_min: float = LAMBDA_MIN):
    """Per-phase 2 L_{2K} - L_K; returns (values, kind)."""
    if K < 2:
        raise ValueError("block length K must be at least 2")
    if lam >= lam_min:
        marks = b_log_norms(ens, E, lam, f, 2 * K, checkpoints=(K, 2 * K))
        kind = "B"
    else:
        log.warning("lambda=%g below lambda_min=%g; using the A cocycle for the avalanche estimate", lam, lam_min)
        marks = a_log_norms(ens, E, lam, f, 2 * K, checkpoints=(K, 2 * K))
        kind = "A"
    # 2 * (1/2K) log||M_2K|| - (1/K) log||M_K||
    return (marks[2 * K] - marks[K]) / K, kind


def ap_lyapunov(E: float, lam: float, f: SamplingFunction, K: int, samples: int,
                rng: np.random.Generator, lam_min: float = LAMBDA_MIN) -> LyapunovEstimate:
    """Avalanche-accelerated estimate 2 L_{2K} - L_K (paired over common phases)."""
    if samples < 1:
        raise ValueError("need samples >= 1")
    ens = PhaseEnsemble.sample(rng, samples, required_precision(2 * K))
    vals, kind = ap_values(ens, float(E), lam, f, K, lam_min)
    mean, se = _mean_stderr(vals)
    return LyapunovEstimate(float(E), lam, K, samples, float(mean), float(se), "AP-" + kind)


class AvalanchePreconditionError(ValueError):
    def __init__(self, condition: str, j: int, message: str):
        super().__init__(message)
        self.condition = condition
        self.j = j


def _as_product(m) -> NormalizedProduct:
    if isinstance(m, NormalizedProduct):
        return m
    m = np.asarray(m, dtype=float)
    s = np.abs(m).max()
    return NormalizedProduct(m / s, math.log(s), 1)


def _pair_log(u1, l1, u0, l0):
    p = u1 @ u0
    return l1 + l0 + math.log(matrix_norm(p))


def avalanche_residual(matrices, mu: float) -> float:
    """Residual of the avalanche principle for M_1, ..., M_n (applied in that order).

    Matrices may be dense 2x2 arrays or :class:`NormalizedProduct` objects,
    so blocks with norms far beyond the float range are fine.  Raises
    :class:`AvalanchePreconditionError` naming the failed condition and the
    offending index j (1-based).
    """
    prods = [_as_product(m) for m in matrices]
    n = len(prods)
    if n < 2:
        raise ValueError("need at least two matrices")
    logs = [p.log_opnorm for p in prods]
    log_mu = math.log(mu)
    if mu < n:
        raise AvalanchePreconditionError("mu >= n", 0, f"mu={mu:g} is smaller than n={n}")
    for j, lv in enumerate(logs, start=1):
        if lv < log_mu:
            raise AvalanchePreconditionError(
                "norm >= mu", j, f"||M_{j}|| = e^{lv:.6g} is below mu = e^{log_mu:.6g}")
    pair = []
    for j in range(n - 1):
        lp = _pair_log(prods[j + 1].unit, prods[j + 1].log_norm, prods[j].unit, prods[j].log_norm)
        gap = logs[j + 1] + logs[j] - lp
        if abs(gap) >= 0.5 * log_mu:
            raise AvalanchePreconditionError(
                "angle", j + 1,
                f"|log||M_{j + 2}|| + log||M_{j + 1}|| - log||M_{j + 2} M_{j + 1}||| = {abs(gap):.6g} "
                f">= (1/2) log mu")
        pair.append(lp)
    st = _MatrixState(())
    for p in prods:
        u = p.unit
        a, b, c, d = st.a, st.b, st.c, st.d
        st.a = u[0, 0] * a + u[0, 1] * c
        st.b = u[0, 0] * b + u[0, 1] * d
        st.c = u[1, 0] * a + u[1, 1] * c
        st.d = u[1, 0] * b + u[1, 1] * d
        st.renormalize()
        st.log.add(p.log_norm)
    total = float(st.log_opnorm())
    return abs(total + math.fsum(logs[1:-1]) - math.fsum(pair))


def orbit_blocks(x, E: float, lam: float, f: SamplingFunction, K: int, count: int) -> list[NormalizedProduct]:
    """Consecutive blocks A_K(T^{jK} x), j = 0..count-1, whose product is A_{K*count}(x)."""
    fv = _eval_unchecked(f, orbit(x, K * count))
    blocks = []
    for j in range(count):
        st = _MatrixState(())
        for k in range(j * K + 1, (j + 1) * K + 1):
            st.apply_transfer(E - lam * fv[k])
        blocks.append(NormalizedProduct(st.unit(), float(st.log.total), K))
    return blocks


@dataclass(frozen=True)
class HolderScan:
    rows: list  # (E_i, E_j, |dL|, |dE|, ratio)
    max_ratio: float
    alpha: float
    estimates: list


def holder_scan(E_grid, lam: float, f: SamplingFunction, n: int, samples: int,
                rng: np.random.Generator, alpha: float = 0.1, kind: str = "A") -> HolderScan:
    """Adjacent-pair moduli |L(E_i) - L(E_j)| / |E_i - E_j|^alpha on a sorted grid."""
    grid = np.asarray(E_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("need a 1-D energy grid with at least two points")
    if np.any(np.diff(grid) < 0):
        raise ValueError("energy grid must be sorted")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    ests = lyapunov_sweep(grid, lam, f, n, samples, rng, kind)
    rows = []
    for a, b in zip(ests[:-1], ests[1:]):
        dE = abs(b.E - a.E)
        if dE == 0:
            continue
        dL = abs(b.mean - a.mean)
        rows.append((a.E, b.E, dL, dE, dL / dE ** alpha))
    max_ratio = max((r[4] for r in rows), default=0.0)
    return HolderScan(rows, max_ratio, alpha, ests)


def free_lyapunov(E: float) -> float:
    """Exact exponent of the free operator (lambda = 0): arccosh(|E|/2) outside the band."""
    return math.acosh(abs(E) / 2) if abs(E) > 2 else 0.0


__all__ = [
    "LAMBDA_MIN", "LyapunovEstimate", "finite_lyapunov", "lyapunov_sweep", "ap_lyapunov", "ap_values",
    "AvalanchePreconditionError", "avalanche_residual", "orbit_blocks", "HolderScan", "holder_scan",
    "free_lyapunov", "sample_log_norms",
]
