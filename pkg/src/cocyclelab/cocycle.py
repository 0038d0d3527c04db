"""Transfer-matrix cocycle, its polar form, and the angle recursion.

Index conventions follow the two product formulas exactly:

* ``A_n(x) = A(T^n x) ... A(T x)`` uses the sites 1..n (the factor at x is
  not included);
* ``B_n(x) = B(T^{n-1} x) ... B(x)`` with ``B(y) = Lambda(T y) R_{theta(y)}``
  reads f at the sites 0..n.

Products are carried as a unit-scale matrix plus an accumulated log-norm,
renormalized after every factor, because the norms grow like lambda^n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .phase import DyadicPhase, PhaseEnsemble, orbit
from .potential import SamplingFunction, _eval_unchecked

SNAP = 1e-12
BETA_SEEDS = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)


def opnorm(a, b, c, d):
    """Spectral norm of [[a, b], [c, d]], elementwise over arrays."""
    return 0.5 * (np.hypot(a + d, c - b) + np.hypot(a - d, b + c))


def matrix_norm(m) -> float:
    m = np.asarray(m, dtype=float)
    return float(opnorm(m[0, 0], m[0, 1], m[1, 0], m[1, 1]))


@dataclass(frozen=True)
class NormalizedProduct:
    unit: np.ndarray
    log_norm: float
    steps: int

    @property
    def log_opnorm(self) -> float:
        """log ||M|| of the represented matrix."""
        return self.log_norm + math.log(matrix_norm(self.unit))

    def matrix(self) -> np.ndarray:
        """Dense value; overflows once log_norm exceeds ~700."""
        return self.unit * math.exp(self.log_norm)

    def det_defect(self) -> float:
        """|det(M) - 1| computed through the scale bookkeeping."""
        u = self.unit
        det_u = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
        return abs(det_u * math.exp(2.0 * self.log_norm) - 1.0)


class _Kahan:
    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, x):
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


class _MatrixState:
    """Batch of 2x2 products, renormalized by the largest entry each step."""

    def __init__(self, shape):
        self.a = np.ones(shape)
        self.b = np.zeros(shape)
        self.c = np.zeros(shape)
        self.d = np.ones(shape)
        self.log = _Kahan(shape)

    def renormalize(self):
        s = np.maximum(np.maximum(np.abs(self.a), np.abs(self.b)),
                       np.maximum(np.abs(self.c), np.abs(self.d)))
        self.a, self.b, self.c, self.d = self.a / s, self.b / s, self.c / s, self.d / s
        self.log.add(np.log(s))

    def apply_transfer(self, e):
        # [[e, -1], [1, 0]] @ M
        a, b, c, d = self.a, self.b, self.c, self.d
        self.a, self.b, self.c, self.d = e * a - c, e * b - d, a, b
        self.renormalize()

    def apply_polar(self, cos_t, sin_t, stretch):
        # diag(stretch, 1/stretch) @ [[cos, -sin], [sin, cos]] @ M
        a, b, c, d = self.a, self.b, self.c, self.d
        self.a = stretch * (cos_t * a - sin_t * c)
        self.b = stretch * (cos_t * b - sin_t * d)
        self.c = (sin_t * a + cos_t * c) / stretch
        self.d = (sin_t * b + cos_t * d) / stretch
        self.renormalize()

    def log_opnorm(self):
        return self.log.total + np.log(opnorm(self.a, self.b, self.c, self.d))

    def unit(self, idx=()):
        return np.array([[self.a[idx], self.b[idx]], [self.c[idx], self.d[idx]]])


class _VectorState:
    def __init__(self, shape, beta):
        self.p = np.full(shape, math.cos(beta))
        self.q = np.full(shape, math.sin(beta))
        self.log = _Kahan(shape)

    def apply_polar(self, cos_t, sin_t, stretch):
        p, q = self.p, self.q
        self.p = stretch * (cos_t * p - sin_t * q)
        self.q = (sin_t * p + cos_t * q) / stretch
        s = np.maximum(np.abs(self.p), np.abs(self.q))
        self.p, self.q = self.p / s, self.q / s
        self.log.add(np.log(s))

    def log_norm(self):
        return self.log.total + np.log(np.hypot(self.p, self.q))


def transfer_step(x_val: float, E: float, lam: float, f: SamplingFunction) -> np.ndarray:
    """A(x, E) = [[E - lambda f(x), -1], [1, 0]]."""
    v = float(f(x_val))
    return np.array([[E - lam * v, -1.0], [1.0, 0.0]])


def polar_g(x_val: float, E: float, lam: float, f: SamplingFunction) -> float:
    """g(x) = (E/lambda - f(x))^2 + 1."""
    if lam == 0:
        raise ValueError("polar form needs lambda != 0")
    return (E / lam - float(f(x_val))) ** 2 + 1.0


def arccot(y):
    """Inverse cotangent on the branch (0, pi)."""
    return np.pi / 2 - np.arctan(y)


def theta_zero(x_val: float, E: float, lam: float, beta: float, f: SamplingFunction) -> float:
    """theta(x) + beta with cot theta(x) = E/lambda - f(x), theta in (0, pi)."""
    if lam == 0:
        raise ValueError("polar form needs lambda != 0")
    return float(arccot(E / lam - float(f(x_val)))) + beta


def _branch(theta):
    r = np.asarray(theta, dtype=float) / np.pi
    rn = np.round(r)
    on_grid = np.abs(r - rn) < SNAP
    return np.where(on_grid, rn, np.floor(r)), on_grid


def angle_step(theta_prev, g_next, lam: float):
    """Lifted rotation angle after one scaling by diag(lam sqrt g, 1/(lam sqrt g)).

    Works elementwise on arrays.  Angles on the grid pi*Z are fixed points.
    """
    if lam <= 0:
        raise ValueError("angle recursion needs lambda > 0")
    theta_prev = np.asarray(theta_prev, dtype=float)
    n_tilde, on_grid = _branch(theta_prev)
    reduced = theta_prev - n_tilde * np.pi
    with np.errstate(divide="ignore"):
        cot = np.cos(reduced) / np.sin(reduced)
        phi = arccot(lam * lam * np.asarray(g_next) * cot) + n_tilde * np.pi
    phi = np.where(on_grid, n_tilde * np.pi, phi)
    return float(phi) if phi.ndim == 0 else phi


@dataclass(frozen=True)
class AngleOrbit:
    """theta_0..theta_{n-1}, phi_1..phi_n and g(T^k x) for k = 0..n."""

    theta: np.ndarray
    phi: np.ndarray
    beta: float
    g_values: np.ndarray
    base_theta: np.ndarray  # theta(T^k x) for k = 0..n-1, without beta

    @property
    def n(self) -> int:
        return len(self.theta)


def _angle_arrays(fvals, t, lam, beta):
    """Vectorized angle recursion.

    ``fvals`` has shape (..., n+1) with f(T^k x) for k = 0..n.  Returns theta
    (..., n), phi (..., n), g (..., n+1), base theta (..., n).
    """
    g = (t - fvals) ** 2 + 1.0
    base = arccot(t - fvals[..., :-1])
    n = fvals.shape[-1] - 1
    theta = np.empty(fvals.shape[:-1] + (n,))
    phi = np.empty_like(theta)
    theta[..., 0] = base[..., 0] + beta
    for k in range(1, n + 1):
        phi[..., k - 1] = angle_step(theta[..., k - 1], g[..., k], lam)
        if k < n:
            theta[..., k] = phi[..., k - 1] + base[..., k]
    return theta, phi, g, base


def angle_orbit(x: DyadicPhase, E: float, lam: float, beta, f: SamplingFunction, n: int) -> AngleOrbit:
    """Polar-coordinate angles of v_k = B_k(x) v_1 with v_1 = (cos beta, sin beta).

    ``beta=None`` picks the best of four seed angles, the one maximizing
    ||B_n(x) v_1||.
    """
    if n < 1:
        raise ValueError("orbit length must be at least 1")
    if lam <= 0:
        raise ValueError("angle recursion needs lambda > 0")
    fv = _eval_unchecked(f, orbit(x, n))
    t = E / lam
    if beta is None:
        beta = best_beta(x, E, lam, f, n)
    theta, phi, g, base = _angle_arrays(fv, t, lam, beta)
    return AngleOrbit(theta, phi, float(beta), g, base)


@dataclass(frozen=True)
class NormExpansion:
    log_g: np.ndarray
    r1: np.ndarray
    r2: np.ndarray | None
    r: np.ndarray | None
    total: float
    total_r2: float | None
    zero_cos_at: int | None = None


def _r1_terms(theta, q):
    # log(cos^2 + sin^2 / q) written through cos(2 theta)
    ratio = (q - 1.0) / (q + 1.0)
    return np.log(ratio * np.cos(2.0 * theta) + 1.0) + np.log((q + 1.0) / (2.0 * q))


def log_norm_expansion(orbit_: AngleOrbit, lam: float) -> NormExpansion:
    """Per-step terms of (1/n) log ||v_n|| = log lam + (1/n) sum(log g / 2 + R / 2)."""
    theta = orbit_.theta
    n = len(theta)
    g_next = orbit_.g_values[1:n + 1]
    q = lam ** 4 * g_next ** 2
    log_g = np.log(g_next)
    r1 = _r1_terms(theta, q)
    total = math.log(lam) + float(np.sum(0.5 * log_g + 0.5 * r1)) / n
    reduced = theta - np.pi * _branch(theta)[0]
    cos_t = np.cos(reduced)
    zero = np.abs(cos_t) < SNAP
    if np.any(zero):
        k = int(np.argmax(zero))
        warnings.warn(f"cos(theta_{k}) = 0; only the cos(2 theta) form is defined", RuntimeWarning, stacklevel=2)
        return NormExpansion(log_g, r1, None, None, total, None, k)
    tan_t = np.tan(reduced)
    r = np.log1p(tan_t ** 2 / q)
    r2 = 2.0 * np.log(np.abs(cos_t)) + r
    total_r2 = math.log(lam) + float(np.sum(0.5 * log_g + 0.5 * r2)) / n
    return NormExpansion(log_g, r1, r2, r, total, total_r2)


def step_factor(theta: float, g_next: float, lam: float) -> float:
    """||v_{k+1}||^2 / ||v_k||^2 for the step leaving angle theta."""
    s = lam * lam * g_next
    return s * math.cos(theta) ** 2 + math.sin(theta) ** 2 / s


# --- products over single phases -------------------------------------------

def _check_n(n):
    if n < 1:
        raise ValueError("need at least one factor")


def cocycle_product(x: DyadicPhase, E: float, lam: float, f: SamplingFunction, n: int) -> NormalizedProduct:
    """A_n(x, E) = A(T^n x) ... A(T x)."""
    _check_n(n)
    fv = _eval_unchecked(f, orbit(x, n))
    st = _MatrixState(())
    for k in range(1, n + 1):
        st.apply_transfer(E - lam * fv[k])
    return NormalizedProduct(st.unit(), float(st.log.total), n)


def _polar_factors(f_here, f_next, t, lam):
    g0 = (t - f_here) ** 2 + 1.0
    g1 = (t - f_next) ** 2 + 1.0
    root = np.sqrt(g0)
    return (t - f_here) / root, 1.0 / root, lam * np.sqrt(g1)


def b_product(x: DyadicPhase, E: float, lam: float, f: SamplingFunction, n: int) -> NormalizedProduct:
    """B_n(x) = B(T^{n-1} x) ... B(x) with B(y) = Lambda(T y) R_{theta(y)}."""
    _check_n(n)
    if lam == 0:
        raise ValueError("polar form needs lambda != 0")
    fv = _eval_unchecked(f, orbit(x, n))
    t = E / lam
    st = _MatrixState(())
    for k in range(n):
        st.apply_polar(*_polar_factors(fv[k], fv[k + 1], t, lam))
    return NormalizedProduct(st.unit(), float(st.log.total), n)


def b_apply(x: DyadicPhase, E: float, lam: float, f: SamplingFunction, n: int, beta: float) -> float:
    """log ||B_n(x) v_1|| for v_1 = (cos beta, sin beta), by direct products."""
    _check_n(n)
    fv = _eval_unchecked(f, orbit(x, n))
    t = E / lam
    st = _VectorState((), beta)
    for k in range(n):
        st.apply_polar(*_polar_factors(fv[k], fv[k + 1], t, lam))
    return float(st.log_norm())


def best_beta(x: DyadicPhase, E: float, lam: float, f: SamplingFunction, n: int) -> float:
    vals = [b_apply(x, E, lam, f, n, b) for b in BETA_SEEDS]
    return BETA_SEEDS[int(np.argmax(vals))]


# --- ensemble kernels --------------------------------------------------------

def _energy_shape(E, samples):
    E = np.asarray(E, dtype=float)
    if E.ndim == 0:
        return E, (samples,)
    return E[:, None], (E.shape[0], samples)


def a_log_norms(ens: PhaseEnsemble, E, lam: float, f: SamplingFunction, n: int, checkpoints=None):
    """log ||A_m(x, E)|| across an ensemble.

    ``E`` may be a scalar or a 1-D array (result gets a leading energy axis).
    Returns the array for m = n, or a dict m -> array when ``checkpoints`` is
    given (prefix products share the same phases).
    """
    _check_n(n)
    Eb, shape = _energy_shape(E, ens.samples)
    marks = set(checkpoints or ())
    out = {}
    st = _MatrixState(shape)
    for k, xv in enumerate(ens.iter_orbit(n, start=1), start=1):
        st.apply_transfer(Eb - lam * _eval_unchecked(f, xv))
        if k in marks:
            out[k] = st.log_opnorm()
    return out if checkpoints else st.log_opnorm()


def b_log_norms(ens: PhaseEnsemble, E, lam: float, f: SamplingFunction, n: int, checkpoints=None, beta=None):
    """log ||B_m(x)|| (or log ||B_m(x) v_1|| when ``beta`` is given) across an ensemble."""
    _check_n(n)
    if lam == 0:
        raise ValueError("polar form needs lambda != 0")
    Eb, shape = _energy_shape(E, ens.samples)
    t = Eb / lam
    marks = set(checkpoints or ())
    out = {}
    st = _MatrixState(shape) if beta is None else _VectorState(shape, beta)
    value = st.log_opnorm if beta is None else st.log_norm
    it = ens.iter_orbit(n)
    f_prev = _eval_unchecked(f, next(it))
    for k, xv in enumerate(it, start=1):
        f_cur = _eval_unchecked(f, xv)
        st.apply_polar(*_polar_factors(f_prev, f_cur, t, lam))
        f_prev = f_cur
        if k in marks:
            out[k] = value()
    return out if checkpoints else value()


def ensemble_angles(ens: PhaseEnsemble, E: float, lam: float, f: SamplingFunction, n: int, beta: float = 0.0):
    """theta arrays of shape (samples, n+1): theta_0..theta_n for every phase."""
    fv = _eval_unchecked(f, ens.orbit_values(n + 1))
    theta, _, _, _ = _angle_arrays(fv, E / lam, lam, beta)
    return theta
