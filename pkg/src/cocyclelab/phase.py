"""Exact binary phases on the torus under the doubling map.

A phase x in [0, 1) is stored as the integer formed by its first ``precision``
binary digits.  Doubling drops the leading digit, so T^n is an index advance
and an orbit of length n costs n digits of the stored expansion.  Float
extraction always keeps a guard of significant digits behind it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

GUARD_BITS = 64
FLOAT_BITS = 53

_MASK53 = np.uint64((1 << FLOAT_BITS) - 1)
_SCALE53 = 2.0 ** -FLOAT_BITS


class PrecisionError(ValueError):
    """Raised when an orbit would read digits that were never stored."""


class DyadicPhaseWarning(UserWarning):
    """The phase has a terminating expansion, so its orbit lands on 0."""


@dataclass(frozen=True)
class DyadicPhase:
    bits: int
    precision: int
    consumed: int = 0

    def __post_init__(self):
        if self.precision < 1:
            raise ValueError("precision must be at least 1 bit")
        if not 0 <= self.consumed <= self.precision:
            raise ValueError("consumed must lie in [0, precision]")
        if self.bits < 0 or self.bits >> self.precision:
            raise ValueError("bits do not fit in the stated precision")

    @property
    def available(self) -> int:
        """Number of exact digits of the current point."""
        return self.precision - self.consumed

    def current_bits(self) -> int:
        return self.bits & ((1 << self.available) - 1)

    def bit_string(self) -> str:
        if self.available == 0:
            return ""
        return format(self.current_bits(), f"0{self.available}b")

    def bit_array(self) -> np.ndarray:
        """Digits of the current point as a uint8 array, most significant first."""
        s = self.bit_string()
        return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")

    def is_zero(self) -> bool:
        return self.current_bits() == 0


def from_rational(numerator: int, denominator: int, precision: int) -> DyadicPhase:
    """Truncated binary expansion of ``numerator / denominator``.

    Warns with :class:`DyadicPhaseWarning` when the denominator is a power of
    two: such points reach the discontinuity of the potential after finitely
    many doublings.
    """
    if denominator == 0:
        raise ZeroDivisionError("denominator must be nonzero")
    if denominator < 0:
        numerator, denominator = -numerator, -denominator
    if not 0 <= numerator < denominator:
        raise ValueError("need 0 <= numerator < denominator")
    if precision < 1:
        raise ValueError("precision must be at least 1 bit")
    if denominator & (denominator - 1) == 0:
        warnings.warn(
            f"{numerator}/{denominator} has a terminating binary expansion; "
            "its orbit hits the discontinuity at 0",
            DyadicPhaseWarning,
            stacklevel=2,
        )
    return DyadicPhase((numerator << precision) // denominator, precision)


def double(x: DyadicPhase, n: int = 1, guard: int = GUARD_BITS) -> DyadicPhase:
    """Return T^n x, keeping at least ``guard`` exact digits afterwards."""
    if n < 0:
        raise ValueError("step count must be non-negative")
    if n > x.available - guard:
        raise PrecisionError(
            f"cannot double {n} times: {x.available} digits left, guard {guard}"
        )
    return DyadicPhase(x.bits, x.precision, x.consumed + n)


def to_real(x: DyadicPhase, digits: int = FLOAT_BITS) -> float:
    """Truncate to ``digits`` binary digits and round to the nearest float."""
    if digits < 1:
        raise ValueError("digits must be positive")
    if digits > x.available:
        raise PrecisionError(f"{digits} digits requested, {x.available} available")
    top = x.current_bits() >> (x.available - digits)
    # int / int true division is correctly rounded
    return top / (1 << digits)


def sample_uniform(rng: np.random.Generator, precision: int) -> DyadicPhase:
    """Phase with independent fair digits drawn from ``rng``."""
    if precision < 1:
        raise ValueError("precision must be at least 1 bit")
    digits = rng.integers(0, 2, size=precision, dtype=np.uint8)
    return DyadicPhase(_pack(digits), precision)


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for task ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def required_precision(n_max: int, guard: int = GUARD_BITS) -> int:
    return n_max + guard


def _pack(digits: np.ndarray) -> int:
    if digits.size == 0:
        return 0
    return int("".join("1" if d else "0" for d in digits.tolist()), 2)


def orbit(x: DyadicPhase, n: int, guard: int = GUARD_BITS) -> np.ndarray:
    """Float values of x, Tx, ..., T^n x (each truncated to 53 digits)."""
    if n + guard > x.available:
        raise PrecisionError(
            f"orbit of length {n} needs {n + guard} digits, {x.available} available"
        )
    ens = PhaseEnsemble(x.bit_array()[None, :])
    return ens.orbit_values(n)[0]


class PhaseEnsemble:
    """A batch of phases sharing one digit matrix, one row per phase.

    Orbit values are produced step by step from a rolling 53-digit window, so
    long orbits over many phases never materialize an (S, n) float array
    unless asked to.
    """

    def __init__(self, digits: np.ndarray, guard: int = GUARD_BITS):
        digits = np.asarray(digits, dtype=np.uint8)
        if digits.ndim != 2:
            raise ValueError("digit matrix must be 2-D (phases x digits)")
        if digits.shape[1] < 1:
            raise ValueError("phases need at least one digit")
        self.digits = digits
        self.guard = guard

    @classmethod
    def sample(cls, rng: np.random.Generator, samples: int, precision: int, guard: int = GUARD_BITS):
        if precision < 1:
            raise ValueError("precision must be at least 1 bit")
        if samples < 1:
            raise ValueError("need at least one sample")
        return cls(rng.integers(0, 2, size=(samples, precision), dtype=np.uint8), guard)

    @classmethod
    def from_phases(cls, phases, guard: int = GUARD_BITS):
        rows = [p.bit_array() for p in phases]
        width = min(len(r) for r in rows)
        return cls(np.stack([r[:width] for r in rows]), guard)

    @property
    def samples(self) -> int:
        return self.digits.shape[0]

    @property
    def precision(self) -> int:
        return self.digits.shape[1]

    def phase(self, i: int) -> DyadicPhase:
        return DyadicPhase(_pack(self.digits[i]), self.precision)

    def check_steps(self, n: int):
        if n + self.guard > self.precision:
            raise PrecisionError(
                f"orbit of length {n} needs {n + self.guard} digits, "
                f"ensemble stores {self.precision}"
            )

    def iter_orbit(self, n: int, start: int = 0):
        """Yield arrays T^k x for k = start, ..., n across the ensemble."""
        self.check_steps(n)
        d = self.digits.astype(np.uint64)
        weights = np.uint64(1) << np.arange(FLOAT_BITS - 1, -1, -1, dtype=np.uint64)
        window = d[:, start:start + FLOAT_BITS] @ weights
        one = np.uint64(1)
        for k in range(start, n + 1):
            yield window.astype(np.float64) * _SCALE53
            if k < n:
                window = ((window << one) & _MASK53) | d[:, k + FLOAT_BITS]

    def orbit_values(self, n: int, start: int = 0) -> np.ndarray:
        """Array of shape (samples, n - start + 1) holding T^k x."""
        return np.stack(list(self.iter_orbit(n, start)), axis=1)
