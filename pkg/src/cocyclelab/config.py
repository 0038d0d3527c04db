"""Flat key=value run configuration.

Assignments are separated by whitespace or newlines; ``#`` starts a comment.
Every key has a documented range and unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

from .potential import parse_potential

COMMANDS = (
    "lyapunov", "ap", "ldt", "angles", "spectrum", "localize", "greens",
    "holder", "ids", "resonance", "goodset", "selftest",
)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_GRID = re.compile(r"^grid\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)$")


def _number(key, text, lo=-math.inf, hi=math.inf, lo_open=False, integer=False):
    try:
        value = int(text) if integer else float(text)
    except ValueError:
        kind = "an integer" if integer else "a number"
        raise ConfigError(key, f"expected {kind}, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    below = value <= lo if lo_open else value < lo
    if below or value > hi:
        left = "(" if lo_open else "["
        raise ConfigError(key, f"value {text} outside accepted range {left}{lo:g}, {hi:g}]")
    return value


def _list(key, text, **kw):
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(key, "expected a comma-separated list")
    return tuple(_number(key, p.strip(), **kw) for p in parts)


def _energy(key, text):
    m = _GRID.match(text.strip())
    if m:
        lo = _number(key, m.group(1))
        hi = _number(key, m.group(2))
        count = _number(key, m.group(3), lo=1, hi=100_000, integer=True)
        if hi < lo:
            raise ConfigError(key, "grid(min,max,count) needs min <= max")
        if count == 1 and hi != lo:
            raise ConfigError(key, "a one-point grid needs min == max")
        return ("grid", lo, hi, count)
    return ("single", _number(key, text))


# key -> (parser, default); parsers receive (key, text)
def _schema():
    big = 10 ** 7
    num = lambda **kw: (lambda k, t: _number(k, t, **kw))  # noqa: E731
    lst = lambda **kw: (lambda k, t: _list(k, t, **kw))  # noqa: E731
    return {
        "command": (lambda k, t: _command(t), None),
        "lambda": (num(lo=0, hi=1e6), 100.0),
        "potential": (lambda k, t: t, "identity"),
        "derivative_floor": (num(lo=0, lo_open=True, hi=1e3), 0.1),
        "derivative_ceiling": (num(lo=0, lo_open=True, hi=1e3), 2.0),
        "c1_norm_bound": (num(lo=0, lo_open=True, hi=1e6), 3.0),
        "lambda_min": (num(lo=0, hi=1e6), 10.0),
        "kind": (lambda k, t: _choice(k, t, ("A", "B")), "A"),
        "energy": (_energy, ("single", 0.0)),
        "n": (num(lo=1, hi=big, integer=True), 2000),
        "N": (num(lo=0, hi=100_000, integer=True), 300),
        "K": (num(lo=2, hi=big, integer=True), 50),
        "samples": (num(lo=1, hi=big, integer=True), 500),
        "phases": (num(lo=1, hi=big, integer=True), 20),
        "chunk": (num(lo=1, hi=big, integer=True), 100),
        "seed": (num(lo=0, hi=2 ** 63 - 1, integer=True), 0),
        "workers": (num(lo=1, hi=1024, integer=True), 1),
        "out": (lambda k, t: t, "results"),
        "ns": (lst(lo=1, hi=big, integer=True), (200, 400, 800, 1600)),
        "thresholds": (lst(lo=0, lo_open=True, hi=1e6), (2.0,)),
        "deltas": (lst(lo=0, lo_open=True, hi=math.pi / 2), (0.2, 0.1, 0.05, 0.025)),
        "alpha": (num(lo=0, lo_open=True, hi=1), 0.1),
        "rs": (lst(lo=1, hi=big, integer=True), (64, 256, 1024)),
        "delta": (num(lo=0, lo_open=True, hi=2), 0.1),
        "observable": (lambda k, t: _choice(k, t, ("fair_sign", "linear", "constant")), "fair_sign"),
        "slack": (num(lo=0, hi=1e6), None),
        "n1_values": (lst(lo=1, hi=10_000, integer=True), None),
        "k_min": (num(lo=0, hi=100_000, integer=True), None),
        "k_max": (num(lo=0, hi=100_000, integer=True), None),
        "lyap_samples": (num(lo=1, hi=big, integer=True), 1000),
        "budget": (num(lo=1, hi=1e15), 5e9),
        "cap": (num(lo=1, hi=10 ** 6, integer=True), 10_000),
        "det_checks": (num(lo=0, hi=10_000, integer=True), 5),
    }


def _command(text):
    if text not in COMMANDS:
        raise ConfigError("command", f"unknown command {text!r}; accepted: {', '.join(COMMANDS)}")
    return text


def _choice(key, text, options):
    if text not in options:
        raise ConfigError(key, f"{text!r} not one of {', '.join(options)}")
    return text


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def command(self) -> str:
        return self.values["command"]

    def energies(self) -> list[float]:
        spec = self.values["energy"]
        if spec[0] == "single":
            return [spec[1]]
        _, lo, hi, count = spec
        if count == 1:
            return [lo]
        step = (hi - lo) / (count - 1)
        return [lo + i * step for i in range(count)]

    def replace(self, **updates) -> "RunConfig":
        vals = dict(self.values)
        vals.update(updates)
        return RunConfig(vals)

    def canonical(self) -> dict:
        """JSON-friendly echo of the effective configuration."""
        out = {}
        for k, v in sorted(self.values.items()):
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    def hash(self) -> str:
        """Hash of everything that determines results (worker count and output dir excluded)."""
        core = {k: v for k, v in self.canonical().items() if k not in ("workers", "out")}
        return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def tokenize(text: str) -> list[tuple[str, str]]:
    pairs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigError(token, "expected key=value")
            key, value = token.split("=", 1)
            if not key:
                raise ConfigError(token, "empty key")
            pairs.append((key, value))
    return pairs


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a flat configuration document.

    ``overrides`` maps keys to already-typed values (e.g. from the command
    line) and wins over the document.
    """
    schema = _schema()
    values = {}
    for key, raw in tokenize(text):
        if key not in schema:
            raise ConfigError(key, f"unknown key; accepted keys: {', '.join(sorted(schema))}")
        if key in values:
            raise ConfigError(key, "assigned twice")
        values[key] = schema[key][0](key, raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in schema:
            raise ConfigError(key, "unknown key")
        values[key] = schema[key][0](key, str(value))
    if "command" not in values:
        raise ConfigError("command", f"missing required field; accepted: {', '.join(COMMANDS)}")
    for key, (_, default) in schema.items():
        values.setdefault(key, default)
    if values["derivative_floor"] > values["derivative_ceiling"]:
        raise ConfigError("derivative_floor", "must not exceed derivative_ceiling")
    if (values["k_min"] is None) != (values["k_max"] is None):
        raise ConfigError("k_min", "set both k_min and k_max or neither")
    if values["k_min"] is not None and values["k_min"] > values["k_max"]:
        raise ConfigError("k_min", "must not exceed k_max")
    try:
        parse_potential(values["potential"], derivative_floor=values["derivative_floor"],
                        derivative_ceiling=values["derivative_ceiling"], c1_norm_bound=values["c1_norm_bound"])
    except ValueError as exc:
        raise ConfigError("potential", str(exc)) from None
    return RunConfig(values)
