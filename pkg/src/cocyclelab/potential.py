"""Monotone sampling functions f and the potential lambda * f(T^n x)."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .phase import GUARD_BITS, DyadicPhase, double, to_real


@dataclass(frozen=True)
class SamplingFunction:
    """Strictly increasing profile with f(0) = 0 and f(1-) = 1.

    ``kind`` is ``"identity"`` or ``"pwl"``.  A piecewise-linear profile is
    given by its breakpoints; every slope must lie in
    [derivative_floor, derivative_ceiling].
    """

    kind: str = "identity"
    breakpoints: tuple = ()
    derivative_floor: float = 0.1
    derivative_ceiling: float = 2.0
    c1_norm_bound: float = field(default=3.0)

    def __post_init__(self):
        if self.kind == "identity":
            if self.derivative_floor > 1.0 or self.derivative_ceiling < 1.0:
                raise ValueError("identity has slope 1, outside the derivative bounds")
            return
        if self.kind != "pwl":
            raise ValueError(f"unknown sampling function kind {self.kind!r}")
        if not 0 < self.derivative_floor <= self.derivative_ceiling:
            raise ValueError("need 0 < derivative_floor <= derivative_ceiling")
        pts = tuple((float(a), float(b)) for a, b in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        if len(pts) < 2:
            raise ValueError("piecewise-linear profile needs at least two breakpoints")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if xs[0] != 0.0 or ys[0] != 0.0:
            raise ValueError("profile must start at (0, 0)")
        if xs[-1] != 1.0 or ys[-1] != 1.0:
            raise ValueError("profile must end at (1, 1)")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint abscissae must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        bad = (slopes < self.derivative_floor) | (slopes > self.derivative_ceiling)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise ValueError(
                f"slope {slopes[j]:.6g} on piece {j} outside "
                f"[{self.derivative_floor}, {self.derivative_ceiling}]"
            )
        if 1.0 + slopes.max() > self.c1_norm_bound:
            raise ValueError("C^1 norm exceeds c1_norm_bound")

    @property
    def slopes(self) -> np.ndarray:
        if self.kind == "identity":
            return np.ones(1)
        xs, ys = np.array(self.breakpoints).T
        return np.diff(ys) / np.diff(xs)

    def __call__(self, x):
        return eval_f(self, x)

    def spec(self) -> str:
        if self.kind == "identity":
            return "identity"
        inner = ",".join(f"({a:g},{b:g})" for a, b in self.breakpoints)
        return f"pwl:[{inner}]"


IDENTITY = SamplingFunction()


def eval_f(f: SamplingFunction, x):
    """f(x) for x in [0, 1); accepts scalars or arrays."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr >= 1.0)) or np.any(np.isnan(arr)):
        raise ValueError("sampling function is defined on [0, 1) only")
    if f.kind == "identity":
        out = arr.copy()
    else:
        xs, ys = np.array(f.breakpoints).T
        out = np.interp(arr, xs, ys)
    return float(out) if out.ndim == 0 else out


def _eval_unchecked(f: SamplingFunction, x: np.ndarray) -> np.ndarray:
    if f.kind == "identity":
        return x
    xs, ys = np.array(f.breakpoints).T
    return np.interp(x, xs, ys)


def potential_at(f: SamplingFunction, lam: float, x: DyadicPhase, n: int) -> float:
    """lambda * f(T^n x), read from exact digits of the phase."""
    y = double(x, n, guard=GUARD_BITS)
    return lam * eval_f(f, to_real(y))


def parse_potential(text: str, **bounds) -> SamplingFunction:
    """Parse ``identity`` or ``pwl:[(0,0),(0.5,0.3),(1,1)]``."""
    text = text.strip()
    if text == "identity":
        return SamplingFunction(**bounds) if bounds else IDENTITY
    if text.startswith("pwl:"):
        try:
            pts = ast.literal_eval(text[4:])
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"malformed breakpoint list {text[4:]!r}") from exc
        return SamplingFunction("pwl", tuple(tuple(p) for p in pts), **bounds)
    raise ValueError(f"unknown potential {text!r}; expected identity or pwl:[...]")
