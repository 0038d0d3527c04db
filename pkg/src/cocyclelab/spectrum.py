"""Finite truncations H_[0,N](x): determinants, spectra, eigenvectors, Green's functions.

Determinants of H - E grow like lambda^N, so they are carried as
(sign, log|det|) pairs built from the three-term recurrence with per-step
rescaling.  Eigenvalues come from Sturm counts and bisection, eigenvectors
from inverse iteration on the banded form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.stats import linregress

from .cocycle import _MatrixState, cocycle_product
from .ldt import wilson_interval
from .lyapunov import lyapunov_sweep
from .phase import DyadicPhase, DyadicPhaseWarning, PhaseEnsemble, PrecisionError, orbit, required_precision
from .potential import SamplingFunction, _eval_unchecked

EIG_MAX_ITER = 50
EIG_RESIDUAL = 1e-8


@dataclass(frozen=True)
class FiniteOperator:
    """Symmetric tridiagonal H on sites 0..N with unit hopping and diagonal v."""

    diagonal: np.ndarray
    lam: float = 0.0
    f: SamplingFunction | None = None
    origin_phase: DyadicPhase | None = None

    @property
    def N(self) -> int:
        return len(self.diagonal) - 1

    @property
    def size(self) -> int:
        return len(self.diagonal)

    def dense(self) -> np.ndarray:
        m = self.size
        return np.diag(self.diagonal) + np.eye(m, k=1) + np.eye(m, k=-1)

    @property
    def norm_bound(self) -> float:
        """Gershgorin bound on ||H||."""
        return float(np.max(np.abs(self.diagonal))) + (2.0 if self.size > 1 else 0.0)

    def gershgorin(self) -> tuple[float, float]:
        hop = 2.0 if self.size > 1 else 0.0
        return float(self.diagonal.min()) - hop, float(self.diagonal.max()) + hop

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diagonal * u
        out[:-1] += u[1:]
        out[1:] += u[:-1]
        return out


def operator_from_diagonal(v) -> FiniteOperator:
    return FiniteOperator(np.asarray(v, dtype=float).copy())


def build_finite(x: DyadicPhase, lam: float, f: SamplingFunction, N: int) -> FiniteOperator:
    """H_[0,N](x) with v_n = lam f(T^n x), n = 0..N."""
    if N < 0:
        raise ValueError("N must be non-negative")
    vals = orbit(x, N)
    spare = x.available - N
    if x.current_bits() & ((1 << spare) - 1) == 0:
        warnings.warn(
            f"orbit of the phase reaches 0 within {N} doublings; the tail of the diagonal "
            "uses the right limit f(0) = 0",
            DyadicPhaseWarning,
            stacklevel=2,
        )
    return FiniteOperator(lam * _eval_unchecked(f, vals), lam, f, x)


@dataclass(frozen=True)
class LogDet:
    sign: int
    log_abs: float

    def value(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0

    @classmethod
    def of(cls, x: float) -> "LogDet":
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))


def _prefix_logdets(v: np.ndarray, E):
    """sign and log|det(H_[0,k] - E)| for k = 0..m-1; E may be an array (leading axes)."""
    E = np.asarray(E, dtype=float)
    m = len(v)
    shape = E.shape + (m,)
    signs = np.empty(shape)
    logs = np.empty(shape)
    a = np.zeros(E.shape)   # d_{k-2}, scaled
    b = np.ones(E.shape)    # d_{k-1}, scaled
    scale = np.zeros(E.shape)
    for k in range(m):
        a, b = b, (v[k] - E) * b - a
        s = np.maximum(np.abs(a), np.abs(b))
        a, b = a / s, b / s
        scale = scale + np.log(s)
        signs[..., k] = np.sign(b)
        with np.errstate(divide="ignore"):
            logs[..., k] = np.where(b == 0, -np.inf, scale + np.log(np.abs(b)))
    return signs, logs


def logdet_sequence(op: FiniteOperator, E: float) -> list[LogDet]:
    """D_k = det(H_[0,k] - E) for k = 0..N, in (sign, log) form."""
    signs, logs = _prefix_logdets(op.diagonal, float(E))
    return [LogDet(int(s), float(l)) for s, l in zip(signs, logs)]


def _block_det_e_minus_h(v: np.ndarray, E: float, size: int) -> float:
    """det(E - H) for a block of ``size`` sites (size 0 -> 1, size -1 -> 0)."""
    if size == -1:
        return 0.0
    d_prev, d = 0.0, 1.0
    for k in range(size):
        d_prev, d = d, (E - v[k]) * d - d_prev
    return d


@dataclass(frozen=True)
class DetIdentityResult:
    offset: int
    max_error: float
    other_error: float
    ambiguous: bool


class DetIdentityError(RuntimeError):
    pass


def det_matrix(x: DyadicPhase, lam: float, f: SamplingFunction, E: float, n: int, offset: int) -> np.ndarray:
    """The four-determinant form of A_n with blocks starting at site ``offset``.

    Entries use det(E - H) on blocks of n, n-1, n-1 and n-2 sites; the
    first column starts at site ``offset``, the second one site later.
    """
    v = lam * _eval_unchecked(f, orbit(x, n + 1))
    v0 = v[offset:]
    v1 = v[offset + 1:]
    return np.array([
        [_block_det_e_minus_h(v0, E, n), -_block_det_e_minus_h(v1, E, n - 1)],
        [_block_det_e_minus_h(v0, E, n - 1), -_block_det_e_minus_h(v1, E, n - 2)],
    ])


def verify_det_identity(x: DyadicPhase, lam: float, f: SamplingFunction, E: float, n: int,
                        tol: float = 1e-8) -> DetIdentityResult:
    """Decide which site offset makes the determinant form reproduce A_n.

    Errors are max-entry differences relative to the largest entry of A_n.
    """
    if not 1 <= n <= 30:
        raise ValueError("determinant identity is checked for 1 <= n <= 30")
    ref = cocycle_product(x, E, lam, f, n).matrix()
    scale = np.abs(ref).max()
    errs = [float(np.abs(det_matrix(x, lam, f, E, n, o) - ref).max() / scale) for o in (0, 1)]
    ok = [e <= tol for e in errs]
    if not any(ok):
        raise DetIdentityError(f"no offset reproduces A_{n}: errors {errs[0]:.3g} (0), {errs[1]:.3g} (1)")
    if all(ok):
        best = 1 if errs[1] <= errs[0] else 0
        return DetIdentityResult(best, errs[best], errs[1 - best], True)
    best = 0 if ok[0] else 1
    return DetIdentityResult(best, errs[best], errs[1 - best], False)


# --- Sturm counts and eigenvalues -------------------------------------------

def sturm_count(v: np.ndarray, shifts, sizes=None) -> np.ndarray:
    """Number of eigenvalues of H_[0,m-1] strictly below each shift.

    ``shifts`` may be any array.  With ``sizes`` (sorted block lengths) the
    counts for every requested prefix block are returned along a new last axis.
    """
    shifts = np.asarray(shifts, dtype=float)
    pivmin = np.finfo(float).tiny / np.finfo(float).eps * max(1.0, float(np.max(np.abs(v), initial=1.0)) ** 2)
    count = np.zeros(shifts.shape, dtype=np.int64)
    q = np.ones(shifts.shape)
    out = []
    want = set(sizes) if sizes is not None else None
    first = True
    for k in range(len(v)):
        if first:
            q = v[k] - shifts
            first = False
        else:
            q = (v[k] - shifts) - 1.0 / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
        if want is not None and (k + 1) in want:
            out.append(count.copy())
    if want is not None:
        return np.stack(out, axis=-1)
    return count


def default_tol(op: FiniteOperator) -> float:
    return 4 * np.finfo(float).eps * max(1.0, op.norm_bound)


def eigenvalues(op: FiniteOperator, tol: float | None = None) -> np.ndarray:
    """All N+1 eigenvalues, ascending, by bisection on Sturm counts."""
    if tol is None:
        tol = default_tol(op)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    m = op.size
    lo_g, hi_g = op.gershgorin()
    lo = np.full(m, lo_g - tol)
    hi = np.full(m, hi_g + tol)
    target = np.arange(m)
    for _ in range(200):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        c = sturm_count(op.diagonal, mid)
        above = c > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


# --- eigenvectors ------------------------------------------------------------

@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float


class EigenConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def _banded(op: FiniteOperator, shift: float) -> np.ndarray:
    m = op.size
    ab = np.zeros((3, m))
    ab[0, 1:] = 1.0
    ab[1] = op.diagonal - shift
    ab[2, :-1] = 1.0
    return ab


def _solve_shifted(op, shift, rhs, bump):
    for attempt in range(8):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                y = solve_banded((1, 1), _banded(op, shift), rhs)
            if np.all(np.isfinite(y)):
                return y
        except np.linalg.LinAlgError:
            pass
        shift += bump * 2.0 ** attempt
    raise EigenConvergenceError("shifted system stayed singular", math.inf)


def eigenvector(op: FiniteOperator, E: float, tol: float | None = None, rng: np.random.Generator | None = None,
                against=()) -> EigenPair:
    """Inverse iteration for the eigenvalue near ``E``, with Rayleigh polish.

    ``against`` lists unit vectors to stay orthogonal to (used inside clusters
    of nearly equal eigenvalues).
    """
    if tol is None:
        tol = default_tol(op)
    rng = rng if rng is not None else np.random.default_rng(0)
    scale = op.norm_bound + abs(E)
    target = EIG_RESIDUAL * scale
    bump = max(tol, 8 * np.finfo(float).eps * scale)
    shift = E + bump
    u = rng.standard_normal(op.size)
    u /= np.linalg.norm(u)
    resid = math.inf
    value = E
    for _ in range(EIG_MAX_ITER):
        u = _solve_shifted(op, shift, u, bump)
        for w in against:
            u -= np.dot(w, u) * w
        u /= np.linalg.norm(u)
        hu = op.matvec(u)
        value = float(np.dot(u, hu))
        resid = float(np.linalg.norm(hu - value * u))
        if resid <= target:
            return EigenPair(value, u, resid)
    raise EigenConvergenceError(
        f"inverse iteration did not converge after {EIG_MAX_ITER} steps (residual {resid:.3g})", resid)


def eigenpairs(op: FiniteOperator, rng: np.random.Generator | None = None, cluster_gap: float | None = None):
    """All eigenpairs; vectors within a cluster are orthogonalized against each other."""
    vals = eigenvalues(op)
    rng = rng if rng is not None else np.random.default_rng(0)
    gap = cluster_gap if cluster_gap is not None else 1e-8 * max(1.0, op.norm_bound)
    pairs = []
    cluster = []
    for i, e in enumerate(vals):
        if i == 0 or e - vals[i - 1] > gap:
            cluster = []
        p = eigenvector(op, float(e), rng=rng, against=list(cluster))
        cluster.append(p.vector)
        pairs.append(p)
    return vals, pairs


# --- Green's functions ---------------------------------------------------------

class SingularEnergyError(ValueError):
    """E is an eigenvalue of the truncation, so G does not exist."""


def _prefix_suffix(op: FiniteOperator, E):
    ps, pl = _prefix_logdets(op.diagonal, E)
    ss, sl = _prefix_logdets(op.diagonal[::-1], E)
    # suffix[..., m] describes the block [m, N]
    return ps, pl, ss[..., ::-1], sl[..., ::-1]


def greens_entry(op: FiniteOperator, E: float, n1: int, n2: int) -> LogDet:
    """G(n1, n2) = (H - E)^{-1}(n1, n2) by Cramer's rule, in (sign, log) form.

    G(n1, n2) = (-1)^(n1+n2) det(H_[0,n1-1] - E) det(H_[n2+1,N] - E) / det(H - E)
    for n1 <= n2, empty blocks having determinant 1.
    """
    N = op.N
    if n1 > n2:
        n1, n2 = n2, n1
    if not 0 <= n1 <= n2 <= N:
        raise ValueError(f"sites must lie in [0, {N}]")
    ps, pl, ss, sl = _prefix_suffix(op, float(E))
    if ps[N] == 0:
        raise SingularEnergyError(f"E = {E!r} is an eigenvalue of the truncation")
    s_left, l_left = (1.0, 0.0) if n1 == 0 else (ps[n1 - 1], pl[n1 - 1])
    s_right, l_right = (1.0, 0.0) if n2 == N else (ss[n2 + 1], sl[n2 + 1])
    sign = int((-1) ** (n1 + n2) * s_left * s_right * ps[N])
    if sign == 0:
        return LogDet(0, -math.inf)
    return LogDet(sign, float(l_left + l_right - pl[N]))


def greens_log_matrix(op: FiniteOperator, E: float):
    """(sign, log|G|) arrays for all site pairs."""
    N = op.N
    ps, pl, ss, sl = _prefix_suffix(op, float(E))
    if ps[N] == 0:
        raise SingularEnergyError(f"E = {E!r} is an eigenvalue of the truncation")
    lsign = np.concatenate([[1.0], ps[:-1]])
    llog = np.concatenate([[0.0], pl[:-1]])
    rsign = np.concatenate([ss[1:], [1.0]])
    rlog = np.concatenate([sl[1:], [0.0]])
    idx = np.arange(N + 1)
    i, j = np.minimum.outer(idx, idx), np.maximum.outer(idx, idx)
    sign = (-1.0) ** (i + j) * lsign[i] * rsign[j] * ps[N]
    logs = llog[i] + rlog[j] - pl[N]
    return sign, logs


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float


def fit_log_decay(distance, log_values) -> DecayFit:
    distance = np.asarray(distance, dtype=float)
    log_values = np.asarray(log_values, dtype=float)
    keep = np.isfinite(log_values)
    fit = linregress(distance[keep], log_values[keep])
    return DecayFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2))


def greens_decay_fit(op: FiniteOperator, E: float, window: tuple[int, int] | None = None) -> DecayFit:
    """Slope of log|G(n1, n2)| against |n1 - n2| over all site pairs in ``window``."""
    N = op.N
    if window is None:
        window = (N // 10, N - N // 10)
    a, b = window
    if not 0 <= a < b <= N:
        raise ValueError(f"window must lie inside [0, {N}]")
    _, logs = greens_log_matrix(op, E)
    idx = np.arange(a, b + 1)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    upper = i <= j
    return fit_log_decay((j - i)[upper], logs[a:b + 1, a:b + 1][upper])


# --- localization ------------------------------------------------------------

def log_profile(op: FiniteOperator, E: float, center: int) -> np.ndarray:
    """log|u_n| of the eigenfunction at E, shooting inward from both edges.

    Left of ``center`` the Dirichlet solution from site 0 is used, right of it
    the one from site N; each is normalized to 0 at the center.  Shooting
    toward the peak keeps the recurrence on its growing branch, so the profile
    stays accurate far below the float noise floor of a normalized vector.
    """
    _, pl, _, sl = _prefix_suffix(op, float(E))
    N = op.N
    left = np.concatenate([[0.0], pl[:-1]])       # log|u_n| with u_0 = 1 from the left
    right = np.concatenate([sl[1:], [0.0]])       # log|u_n| with u_N = 1 from the right
    prof = np.empty(N + 1)
    prof[:center + 1] = left[:center + 1] - left[center]
    prof[center:] = right[center:] - right[center]
    return prof


def profile_decay_rate(log_u: np.ndarray, center: int, margin: float = 0.1) -> float:
    """gamma = -slope of log|u_n| against |n - center|, boundary sites excluded."""
    m = len(log_u)
    cut = int(round(margin * m))
    sites = np.arange(cut, m - cut)
    sites = sites[sites != center] if len(sites) > 2 else sites
    return -fit_log_decay(np.abs(sites - center), log_u[sites]).slope


@dataclass(frozen=True)
class LocalizationRow:
    eigenvalue: float
    gamma: float
    center: int
    ipr: float

    def row(self) -> tuple:
        return (self.eigenvalue, self.gamma, self.center, self.ipr)


def localization_report(x: DyadicPhase, lam: float, f: SamplingFunction, N: int,
                        rng: np.random.Generator | None = None) -> list[LocalizationRow]:
    """Decay rate, center and inverse participation ratio of every eigenvector."""
    if N < 50:
        raise ValueError("localization report needs N >= 50")
    op = build_finite(x, lam, f, N)
    vals, pairs = eigenpairs(op, rng)
    rows = []
    for e, p in zip(vals, pairs):
        c = int(np.argmax(np.abs(p.vector)))
        gamma = profile_decay_rate(log_profile(op, float(e), c), c)
        rows.append(LocalizationRow(float(e), float(gamma), c, float(np.sum(p.vector ** 4))))
    return rows


# --- density of states and the Thouless formula ------------------------------------

@dataclass(frozen=True)
class IdsTable:
    E: np.ndarray
    k: np.ndarray


def ids_estimate(lam: float, f: SamplingFunction, N: int, E_grid, samples: int,
                 rng: np.random.Generator) -> IdsTable:
    """Phase-averaged fraction of eigenvalues of H_[0,N](x) below each grid energy."""
    grid = np.asarray(E_grid, dtype=float)
    ens = PhaseEnsemble.sample(rng, samples, required_precision(N))
    vals = lam * _eval_unchecked(f, ens.orbit_values(N))
    counts = np.zeros(grid.shape)
    for row in vals:
        counts += sturm_count(row, grid)
    return IdsTable(grid, counts / (samples * (N + 1)))


def _xlogx_minus_x(u):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u == 0, 0.0, u * np.log(np.abs(u)) - u)


def thouless_integral(table: IdsTable, E_eval: float, max_cell_mass: float = 0.5) -> float:
    """int log|E_eval - E| dk(E) with k linear on each grid cell.

    Each cell is integrated in closed form, so the logarithmic singularity at
    E_eval is handled exactly; mass below the first grid point or above the
    last one is placed at the endpoints.
    """
    E, k = np.asarray(table.E, dtype=float), np.asarray(table.k, dtype=float)
    if np.any(np.diff(E) <= 0):
        raise ValueError("energy grid must be strictly increasing")
    if np.any(np.diff(k) < -1e-12):
        raise ValueError("density of states must be non-decreasing")
    dk = np.diff(k)
    dE = np.diff(E)
    inside = (E[:-1] <= E_eval) & (E_eval <= E[1:])
    if np.any(inside & (dk > max_cell_mass)):
        raise ValueError("the cell containing E_eval carries too much mass to resolve the log singularity")
    u = E - E_eval
    F = _xlogx_minus_x(u)
    total = float(np.sum(dk / dE * np.diff(F)))
    with np.errstate(divide="ignore"):
        if k[0] > 0:
            total += k[0] * math.log(abs(u[0]))
        if k[-1] < 1:
            total += (1 - k[-1]) * math.log(abs(u[-1]))
    return total


def thouless_residual(table: IdsTable, E_eval: float, L_hat: float) -> float:
    return abs(thouless_integral(table, E_eval) - L_hat)


# --- double resonances and the good set ------------------------------------------

class BudgetError(RuntimeError):
    def __init__(self, message, cost):
        super().__init__(message)
        self.cost = cost


@dataclass(frozen=True)
class ResonanceScan:
    hit_fraction: float
    wilson_interval: tuple
    samples: int
    hits: list = field(default_factory=list)  # (x_id, E, N1, k, cond1, cond2)


def resonance_defaults(N: int) -> dict:
    kbar = max(1, round(math.exp(math.log(N) ** 2)))
    return {"n1_range": (N * N, 2 * N * N), "k_range": (kbar, 2 * kbar)}


def default_slack(lam: float) -> float:
    """Fitted default for the slack in the growth condition: 0.8 log lambda."""
    return 0.8 * math.log(max(abs(lam), math.e))


def resonance_plan(N: int, samples: int, n1_values=None, k_range=None, budget: float = 5e9):
    """Resolve scan ranges and refuse scans beyond the budget (cost in matrix steps)."""
    if not 1 <= N <= 12:
        raise BudgetError(f"scale N={N} outside the desk range 1..12", math.inf)
    dflt = resonance_defaults(N)
    if n1_values is None:
        lo, hi = dflt["n1_range"]
        n1_values = sorted(set(np.linspace(lo, hi, 4).round().astype(int).tolist()))
    n1_values = [int(v) for v in n1_values]
    k_lo, k_hi = k_range if k_range is not None else dflt["k_range"]
    if not 0 <= k_lo <= k_hi:
        raise ValueError("k range must satisfy 0 <= k_min <= k_max")
    ks = np.arange(k_lo, k_hi + 1)
    cost = samples * sum((n1 + 1) * (len(ks) * N + 60 * (n1 + 1)) for n1 in n1_values)
    if cost > budget:
        raise BudgetError(f"estimated cost {cost:.3g} elementary steps exceeds budget {budget:.3g}", cost)
    return n1_values, ks


def growth_table(lam: float, f: SamplingFunction, N: int, samples: int, rng: np.random.Generator,
                 points: int = 201):
    """Monte-Carlo L_N(E) on a grid covering the spectrum, for interpolation."""
    grid = np.linspace(min(0.0, lam) - 2.0, max(0.0, lam) + 2.0, points)
    return grid, np.array([e.mean for e in lyapunov_sweep(grid, lam, f, N, samples, rng)])


def resonance_hits(fvals: np.ndarray, lam: float, N: int, table, slack: float, n1_values, ks,
                   id_offset: int = 0):
    """Hits (x_id, E, N1, k, cond1, cond2) and the number of phases with a hit.

    ``fvals`` holds f(T^j x) row by row.  cond1 is the log-norm of the Green's
    function (infinite: E is an eigenvalue of H_[0,N1](x)); cond2 is the
    margin L_N(E) - slack - (1/N) log||A_N(2^k x, E)||, positive when met.
    """
    e_grid, L_grid = table
    hits = []
    hit_phases = 0
    for i, fv in enumerate(fvals):
        found = False
        for n1 in n1_values:
            op = FiniteOperator(lam * fv[:n1 + 1], lam)
            energies = eigenvalues(op)
            st = _MatrixState((len(energies), len(ks)))
            for step in range(1, N + 1):
                st.apply_transfer(energies[:, None] - lam * fv[ks + step][None, :])
            growth = st.log_opnorm() / N
            margin = (np.interp(energies, e_grid, L_grid) - slack)[:, None] - growth
            for a, b in zip(*np.nonzero(margin > 0)):
                hits.append((id_offset + i, float(energies[a]), n1, int(ks[b]), math.inf, float(margin[a, b])))
                found = True
        hit_phases += found
    return hits, hit_phases


def double_resonance_scan(lam: float, f: SamplingFunction, N: int, samples: int, rng: np.random.Generator,
                          slack: float | None = None, n1_values=None, k_range=None, lyap_samples: int = 1000,
                          budget: float = 5e9) -> ResonanceScan:
    """Scaled-down search for double resonances.

    For each phase x, each N1 and each eigenvalue E of H_[0,N1](x) (where the
    Green's function is singular, so the first condition holds), look for a
    shift k with (1/N) log||A_N(2^k x, E)|| < L_N(E) - slack.
    """
    n1_values, ks = resonance_plan(N, samples, n1_values, k_range, budget)
    if slack is None:
        slack = default_slack(lam)
    table = growth_table(lam, f, N, lyap_samples, rng)
    need = max(max(n1_values), int(ks[-1]) + N)
    ens = PhaseEnsemble.sample(rng, samples, required_precision(need))
    hits, hit_phases = resonance_hits(_eval_unchecked(f, ens.orbit_values(need)), lam, N, table, slack,
                                      n1_values, ks)
    return ResonanceScan(hit_phases / samples, wilson_interval(hit_phases, samples), samples, hits)


def good_set_check(x: DyadicPhase, lam: float, f: SamplingFunction, E: float, n: int, L_hat: float,
                   cap: int = 10_000) -> float:
    """sup over k0 <= min(n^8, cap) of |L_hat - (1/m) sum_{k=1..m} (1/n) log||A_n(2^(k+k0) x)|||.

    m = min(n^4, cap).
    """
    if n < 2:
        raise ValueError("good-set check needs n >= 2")
    m = min(n ** 4, cap)
    k0_max = min(n ** 8, cap)
    J = k0_max + m
    if J + n + 64 > x.available:
        raise PrecisionError(f"need {J + n + 64} digits for the good-set check, phase has {x.available}")
    fv = _eval_unchecked(f, orbit(x, J + n))
    st = _MatrixState((J,))
    for step in range(1, n + 1):
        # block starting at T^j x, j = 1..J, uses sites j+1..j+n
        st.apply_transfer(E - lam * fv[1 + step:J + 1 + step])
    ell = st.log_opnorm() / n
    csum = np.concatenate([[0.0], np.cumsum(ell)])
    k0 = np.arange(k0_max + 1)
    avg = (csum[k0 + m] - csum[k0]) / m
    return float(np.max(np.abs(L_hat - avg)))
