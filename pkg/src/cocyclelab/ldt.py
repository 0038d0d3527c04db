"""Empirical large-deviation statistics for the cocycle and for Birkhoff sums."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .cocycle import b_log_norms, ensemble_angles
from .phase import PhaseEnsemble, required_precision
from .potential import SamplingFunction

Z95 = float(stats.norm.ppf(0.975))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so the interval always contains the point estimate despite rounding
    return min(p, max(0.0, centre - half)), max(p, min(1.0, centre + half))


@dataclass(frozen=True)
class DeviationReport:
    n: int
    threshold: float
    measure_hat: float
    samples: int
    wilson_interval: tuple

    @classmethod
    def from_count(cls, n, threshold, count, samples):
        return cls(n, threshold, count / samples, samples, wilson_interval(count, samples))

    def row(self) -> tuple:
        lo, hi = self.wilson_interval
        return (self.n, self.threshold, self.measure_hat, lo, hi, self.samples)


def _require_lambda(lam):
    if lam == 0:
        raise ValueError("lambda = 0 has no polar form; deviation statistics need lambda != 0")


def deviation_values(ens: PhaseEnsemble, E: float, lam: float, f: SamplingFunction, ns) -> dict:
    """|(1/n) log ||B_n(x)|| - log lambda| for every n in ``ns``, one pass over the phases."""
    _require_lambda(lam)
    ns = sorted(set(int(n) for n in ns))
    if ns[0] < 1:
        raise ValueError("orbit lengths must be positive")
    marks = b_log_norms(ens, E, lam, f, ns[-1], checkpoints=ns)
    return {n: np.abs(marks[n] / n - math.log(abs(lam))) for n in ns}


def deviation_measures(E: float, lam: float, f: SamplingFunction, ns, thresholds, samples: int,
                       rng: np.random.Generator) -> list[DeviationReport]:
    """Deviation-set measures for all (n, threshold) on one common phase ensemble."""
    _require_lambda(lam)
    thresholds = [float(t) for t in np.atleast_1d(thresholds)]
    if any(t <= 0 for t in thresholds):
        raise ValueError("thresholds must be positive")
    ens = PhaseEnsemble.sample(rng, samples, required_precision(max(ns)))
    devs = deviation_values(ens, E, lam, f, ns)
    return [DeviationReport.from_count(n, t, int(np.count_nonzero(devs[n] > t)), samples)
            for n in sorted(devs) for t in thresholds]


def deviation_measure(E: float, lam: float, f: SamplingFunction, n: int, threshold: float, samples: int,
                      rng: np.random.Generator) -> DeviationReport:
    """Fraction of phases with |(1/n) log ||v_n(x)|| - log lambda| > threshold.

    v_1 is taken to realize the norm, so ||v_n|| = ||B_n(x)||.
    """
    return deviation_measures(E, lam, f, [n], [threshold], samples, rng)[0]


@dataclass(frozen=True)
class DecayFit:
    rate: float | None
    r2: float | None
    resolved: bool
    note: str = ""


BELOW_RESOLUTION = "below resolution"


def decay_rate_fit(reports) -> DecayFit:
    """Least-squares slope of log(measure) against n; rate = -slope."""
    pts = [(r.n, r.measure_hat) for r in reports if r.measure_hat > 0]
    if len(pts) < 3:
        return DecayFit(None, None, False, BELOW_RESOLUTION)
    n, m = np.array(pts, dtype=float).T
    fit = stats.linregress(n, np.log(m))
    return DecayFit(float(-fit.slope), float(fit.rvalue ** 2), True)


def rp1_distance(theta, target=math.pi / 2):
    """Distance between directions, i.e. between angles modulo pi."""
    d = np.mod(np.asarray(theta) - target, np.pi)
    return np.minimum(d, np.pi - d)


@dataclass(frozen=True)
class ConcentrationTable:
    deltas: np.ndarray
    measure_hat: np.ndarray
    samples: int
    c_f: float  # least-squares slope through the origin


def angle_concentration(E: float, lam: float, f: SamplingFunction, n: int, deltas, samples: int,
                        rng: np.random.Generator) -> ConcentrationTable:
    """Measure of {x : ||theta_n(x) - pi/2||_RP1 < delta}, with beta = 0."""
    deltas = np.asarray(deltas, dtype=float)
    if np.any((deltas <= 0) | (deltas > math.pi / 2)):
        raise ValueError("delta values must lie in (0, pi/2]")
    if lam <= 0:
        raise ValueError("angle recursion needs lambda > 0")
    ens = PhaseEnsemble.sample(rng, samples, required_precision(n + 1))
    theta_n = ensemble_angles(ens, E, lam, f, n)[:, n]
    dist = rp1_distance(theta_n)
    meas = np.array([np.count_nonzero(dist < d) / samples for d in deltas])
    c_f = float(np.dot(deltas, meas) / np.dot(deltas, deltas))
    return ConcentrationTable(deltas, meas, samples, c_f)


@dataclass(frozen=True)
class MomentCheck:
    neg_moment: float
    pos_moment: float
    neg_bound: float
    pos_bound: float
    neg_pass: bool
    pos_pass: bool
    log_neg_moment: float
    log_pos_moment: float


def moment_bounds_check(E: float, lam: float, f: SamplingFunction, n: int, a: float, samples: int,
                        rng: np.random.Generator, c_f: float = 1.0) -> MomentCheck:
    """Monte-Carlo E[||v_n||^-a] and E[||v_n||^a] against the moment bounds.

    Bounds: exp(-a n log lam + 10 a n log(3 c_f)) and
    exp(a n log lam + a n (log(10)/2 + c_f / (4 lam))).  Everything is
    compared in log form, so moments far outside the float range are fine.
    """
    _require_lambda(lam)
    if not 0 <= a < 0.5:
        raise ValueError("exponent a must lie in [0, 1/2)")
    ens = PhaseEnsemble.sample(rng, samples, required_precision(n))
    ell = b_log_norms(ens, E, lam, f, n)
    log_m = math.log(samples)
    log_neg = float(logsumexp(-a * ell) - log_m)
    log_pos = float(logsumexp(a * ell) - log_m)
    log_lam = math.log(abs(lam))
    log_neg_bound = -a * n * log_lam + 10 * a * n * math.log(3 * c_f)
    log_pos_bound = a * n * log_lam + a * n * (0.5 * math.log(10) + 0.25 * c_f / abs(lam))
    if a == 0:
        return MomentCheck(1.0, 1.0, 1.0, 1.0, True, True, 0.0, 0.0)
    return MomentCheck(
        _safe_exp(log_neg), _safe_exp(log_pos), _safe_exp(log_neg_bound), _safe_exp(log_pos_bound),
        log_neg < log_neg_bound, log_pos < log_pos_bound, log_neg, log_pos,
    )


def _safe_exp(v):
    return math.exp(v) if v < 700 else math.inf


def midpoint_integral(F, points: int = 1 << 20) -> float:
    x = (np.arange(points) + 0.5) / points
    return float(np.mean(F(x)))


@dataclass(frozen=True)
class BirkhoffReport:
    r: int
    delta: float
    measure_hat: float
    samples: int
    wilson_interval: tuple
    integral: float


def birkhoff_ldt(F, r: int, delta: float, samples: int, rng: np.random.Generator,
                 integral: float | None = None) -> BirkhoffReport:
    """Fraction of phases with |int F - (1/r) sum_{k=1..r} F(2^k x)| > delta.

    ``F`` is a vectorized callable on [0, 1) with |F| <= 1.
    """
    if r < 1:
        raise ValueError("average length r must be at least 1")
    probe = np.asarray(F((np.arange(4096) + 0.5) / 4096), dtype=float)
    if np.any(np.abs(probe) > 1):
        raise ValueError("F must satisfy |F| <= 1")
    if integral is None:
        integral = midpoint_integral(F)
    ens = PhaseEnsemble.sample(rng, samples, required_precision(r))
    total = np.zeros(samples)
    for xv in ens.iter_orbit(r, start=1):
        vals = np.asarray(F(xv), dtype=float)
        if np.any(np.abs(vals) > 1):
            raise ValueError("F must satisfy |F| <= 1")
        total += vals
    count = int(np.count_nonzero(np.abs(integral - total / r) > delta))
    return BirkhoffReport(r, delta, count / samples, samples, wilson_interval(count, samples), integral)


def fair_sign(x):
    """+1 on [0, 1/2), -1 on [1/2, 1)."""
    return np.where(np.asarray(x) < 0.5, 1.0, -1.0)


def fair_sign_tail(r: int, delta: float) -> float:
    """Exact P(|S_r / r| > delta) for a sum S_r of r independent fair signs."""
    k = np.arange(r + 1)
    s = 2 * k - r
    return float(stats.binom.pmf(k, r, 0.5)[np.abs(s) > delta * r].sum())
