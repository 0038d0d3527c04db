"""``cocycle-lab <command> --config <path> [--seed S] [--workers W] [--out DIR]``.

Each command splits its work into tasks with fixed boundaries and one random
stream per task; results are merged in task order.  Exit status: 0 success,
1 computation error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from functools import partial
from pathlib import Path

import numpy as np

from . import ldt, lyapunov, spectrum
from .cocycle import ensemble_angles
from .config import COMMANDS, ConfigError, RunConfig, parse_config, tokenize
from .harness import chunk_sizes, ordered_map, versions, write_csv, write_manifest
from .phase import PhaseEnsemble, required_precision, rng_stream, sample_uniform
from .potential import _eval_unchecked, parse_potential

log = logging.getLogger("cocyclelab")

WORKERS_ENV = "COCYCLELAB_WORKERS"


def _potential(v: dict):
    return parse_potential(v["potential"], derivative_floor=v["derivative_floor"],
                           derivative_ceiling=v["derivative_ceiling"], c1_norm_bound=v["c1_norm_bound"])


def _energies(v: dict):
    return RunConfig(v).energies()


def _ensemble(v, index, size, n):
    return PhaseEnsemble.sample(rng_stream(v["seed"], index), size, required_precision(n))


def _det_offset(v, phases, E):
    """Resolve the determinant-identity offset on the first few phases."""
    lam, f = v["lambda"], _potential(v)
    n = min(max(v["N"], 1), 30)
    results = []
    for p in range(min(v["det_checks"], phases)):
        x = sample_uniform(rng_stream(v["seed"], 10_000_000 + p), required_precision(n + 1))
        results.append(spectrum.verify_det_identity(x, lam, f, E, n))
    if not results:
        return None
    offsets = {r.offset for r in results}
    return {
        "offset": results[0].offset if len(offsets) == 1 else sorted(offsets),
        "ambiguous": any(r.ambiguous for r in results),
        "max_error": max(r.max_error for r in results),
        "checks": len(results),
        "n": n,
    }


# --- task bodies (top level so they pickle) -----------------------------------

def _task_lyapunov(v, job):
    index, size = job
    ens = _ensemble(v, index, size, v["n"])
    return lyapunov.sample_log_norms(ens, np.array(_energies(v)), v["lambda"], _potential(v), v["n"], v["kind"])


def _task_ap(v, job):
    index, size = job
    ens = _ensemble(v, index, size, 2 * v["K"])
    vals = [lyapunov.ap_values(ens, E, v["lambda"], _potential(v), v["K"], v["lambda_min"]) for E in _energies(v)]
    return np.array([x[0] for x in vals]), vals[0][1]


def _task_ldt(v, job):
    index, size = job
    ns = v["ns"]
    ens = _ensemble(v, index, size, max(ns))
    devs = ldt.deviation_values(ens, _energies(v)[0], v["lambda"], _potential(v), ns)
    return np.array([[np.count_nonzero(devs[n] > t) for t in v["thresholds"]] for n in sorted(devs)])


def _task_angles(v, job):
    index, size = job
    ens = _ensemble(v, index, size, v["n"] + 1)
    theta = ensemble_angles(ens, _energies(v)[0], v["lambda"], _potential(v), v["n"])[:, v["n"]]
    dist = ldt.rp1_distance(theta)
    return np.array([np.count_nonzero(dist < d) for d in v["deltas"]])


def _phase(v, p, digits):
    rng = rng_stream(v["seed"], p)
    return sample_uniform(rng, digits), rng


def _task_spectrum(v, p):
    x, _ = _phase(v, p, required_precision(v["N"]))
    return spectrum.eigenvalues(spectrum.build_finite(x, v["lambda"], _potential(v), v["N"]))


def _task_localize(v, p):
    x, rng = _phase(v, p, required_precision(v["N"]))
    return spectrum.localization_report(x, v["lambda"], _potential(v), v["N"], rng)


def _task_ids(v, job):
    index, size = job
    ens = _ensemble(v, index, size, v["N"])
    vals = v["lambda"] * _eval_unchecked(_potential(v), ens.orbit_values(v["N"]))
    grid = np.array(_energies(v))
    return sum(spectrum.sturm_count(row, grid) for row in vals)


def _task_resonance(v, table, plan, job):
    index, size, offset = job
    n1_values, ks = plan
    need = max(max(n1_values), int(ks[-1]) + v["N"])
    ens = _ensemble(v, index, size, need)
    slack = v["slack"] if v["slack"] is not None else spectrum.default_slack(v["lambda"])
    return spectrum.resonance_hits(_eval_unchecked(_potential(v), ens.orbit_values(need)), v["lambda"], v["N"],
                                   table, slack, n1_values, ks, id_offset=offset)


def _goodset_digits(v):
    n, cap = v["n"], v["cap"]
    return min(n ** 8, cap) + min(n ** 4, cap) + n + 64


def _task_goodset(v, L_hat, p):
    x, _ = _phase(v, p + 1, _goodset_digits(v))
    return spectrum.good_set_check(x, v["lambda"], _potential(v), _energies(v)[0], v["n"], L_hat, v["cap"])


# --- commands ------------------------------------------------------------------------

LYAP_HEADER = ("E", "lambda", "n", "samples", "mean", "stderr", "kind")


def _sample_jobs(v, total):
    return list(enumerate(chunk_sizes(total, v["chunk"])))


def _mean_rows(v, values, n, kind):
    mean, se = lyapunov._mean_stderr(values)
    samples = values.shape[-1]
    return [(E, v["lambda"], n, samples, m, s, kind) for E, m, s in zip(_energies(v), mean, se)]


def cmd_lyapunov(v, workers):
    parts = ordered_map(partial(_task_lyapunov, v), _sample_jobs(v, v["samples"]), workers)
    rows = _mean_rows(v, np.concatenate(parts, axis=-1), v["n"], v["kind"])
    return LYAP_HEADER, rows, {"estimates": len(rows)}


def cmd_ap(v, workers):
    parts = ordered_map(partial(_task_ap, v), _sample_jobs(v, v["samples"]), workers)
    vals = np.concatenate([p[0] for p in parts], axis=-1)
    rows = _mean_rows(v, vals, v["K"], "AP-" + parts[0][1])
    return LYAP_HEADER, rows, {"cocycle": parts[0][1]}


def cmd_holder(v, workers):
    energies = _energies(v)
    if len(energies) < 2:
        raise ValueError("holder scan needs an energy grid with at least two points")
    parts = ordered_map(partial(_task_lyapunov, v), _sample_jobs(v, v["samples"]), workers)
    mean, _ = lyapunov._mean_stderr(np.concatenate(parts, axis=-1))
    rows = []
    for (e0, l0), (e1, l1) in zip(zip(energies, mean), zip(energies[1:], mean[1:])):
        dE = abs(e1 - e0)
        if dE == 0:
            continue
        dL = abs(l1 - l0)
        rows.append((e0, e1, dL, dE, dL / dE ** v["alpha"]))
    return ("E_i", "E_j", "dL", "dE", "ratio"), rows, {
        "alpha": v["alpha"], "max_ratio": max((r[4] for r in rows), default=0.0)}


def cmd_ldt(v, workers):
    if v["lambda"] == 0:
        raise ValueError("lambda = 0 has no polar form; ldt needs lambda > 0")
    counts = sum(ordered_map(partial(_task_ldt, v), _sample_jobs(v, v["samples"]), workers))
    reports = [ldt.DeviationReport.from_count(n, t, int(counts[i, j]), v["samples"])
               for i, n in enumerate(sorted(set(v["ns"]))) for j, t in enumerate(v["thresholds"])]
    rows = [(r.n, r.threshold, r.measure_hat, *r.wilson_interval) for r in reports]
    fits = {}
    for t in v["thresholds"]:
        fit = ldt.decay_rate_fit([r for r in reports if r.threshold == t])
        fits[str(t)] = {"rate": fit.rate, "r2": fit.r2, "resolved": fit.resolved, "note": fit.note}
    return ("n", "threshold", "measure", "lo", "hi"), rows, {"samples": v["samples"], "decay_fits": fits}


def cmd_angles(v, workers):
    if v["lambda"] <= 0:
        raise ValueError("angle recursion needs lambda > 0")
    counts = sum(ordered_map(partial(_task_angles, v), _sample_jobs(v, v["samples"]), workers))
    rows = []
    for d, c in zip(v["deltas"], counts):
        lo, hi = ldt.wilson_interval(int(c), v["samples"])
        rows.append((d, c / v["samples"], lo, hi))
    deltas = np.array(v["deltas"])
    meas = counts / v["samples"]
    c_f = float(np.dot(deltas, meas) / np.dot(deltas, deltas))
    return ("delta", "measure", "lo", "hi"), rows, {"n": v["n"], "c_f": c_f}


def cmd_spectrum(v, workers):
    eigs = ordered_map(partial(_task_spectrum, v), range(v["phases"]), workers)
    rows = [(p, i, e) for p, ev in enumerate(eigs) for i, e in enumerate(ev)]
    return ("x_id", "index", "eigenvalue"), rows, {"det_identity": _det_offset(v, v["phases"], _energies(v)[0])}


def cmd_localize(v, workers):
    reports = ordered_map(partial(_task_localize, v), range(v["phases"]), workers)
    rows = [r.row() for rep in reports for r in rep]
    medians = [(float(np.median([r.gamma for r in rep])), float(np.median([r.ipr for r in rep]))) for rep in reports]
    summary = {
        "median_gamma": float(np.median([m[0] for m in medians])),
        "median_ipr": float(np.median([m[1] for m in medians])),
        "per_phase_medians": medians,
        "det_identity": _det_offset(v, v["phases"], _energies(v)[0]),
    }
    return ("eigenvalue", "gamma", "center", "ipr"), rows, summary


def cmd_greens(v, workers):
    x, _ = _phase(v, 0, required_precision(v["N"]))
    op = spectrum.build_finite(x, v["lambda"], _potential(v), v["N"])
    E = _energies(v)[0]
    sign, logs = spectrum.greens_log_matrix(op, E)
    N = v["N"]
    rows = [(i, j, int(sign[i, j]), logs[i, j]) for i in range(N + 1) for j in range(i, N + 1)]
    summary = {"E": E, "det_identity": _det_offset(v, 1, E)}
    if N >= 2:
        fit = spectrum.greens_decay_fit(op, E)
        summary["decay_fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    return ("n1", "n2", "sign", "log_abs"), rows, summary


def cmd_ids(v, workers):
    counts = sum(ordered_map(partial(_task_ids, v), _sample_jobs(v, v["phases"]), workers))
    k = counts / (v["phases"] * (v["N"] + 1))
    rows = list(zip(_energies(v), k))
    return ("E", "k"), rows, {"phases": v["phases"], "N": v["N"]}


def cmd_resonance(v, workers):
    k_range = (v["k_min"], v["k_max"]) if v["k_min"] is not None else None
    plan = spectrum.resonance_plan(v["N"], v["samples"], v["n1_values"], k_range, v["budget"])
    table = spectrum.growth_table(v["lambda"], _potential(v), v["N"], v["lyap_samples"], rng_stream(v["seed"], 0))
    sizes = chunk_sizes(v["samples"], v["chunk"])
    jobs = [(i + 1, s, sum(sizes[:i])) for i, s in enumerate(sizes)]
    parts = ordered_map(partial(_task_resonance, v, table, plan), jobs, workers)
    rows = [h for hits, _ in parts for h in hits]
    hit = sum(c for _, c in parts)
    slack = v["slack"] if v["slack"] is not None else spectrum.default_slack(v["lambda"])
    return ("x_id", "E", "N1", "k", "cond1", "cond2"), rows, {
        "hit_fraction": hit / v["samples"], "wilson_interval": ldt.wilson_interval(hit, v["samples"]),
        "slack": slack, "n1_values": plan[0], "k_range": [int(plan[1][0]), int(plan[1][-1])]}


def cmd_goodset(v, workers):
    E = _energies(v)[0]
    est = lyapunov.finite_lyapunov(E, v["lambda"], _potential(v), v["n"], v["samples"], rng_stream(v["seed"], 0))
    devs = ordered_map(partial(_task_goodset, v, est.mean), range(v["phases"]), workers)
    rows = [(p, E, d) for p, d in enumerate(devs)]
    return ("x_id", "E", "deviation"), rows, {
        "L_hat": est.mean, "L_hat_stderr": est.stderr, "fraction_le_1": float(np.mean(np.array(devs) <= 1.0))}


def cmd_selftest(v, workers):
    from .selftest import run_checks

    results = run_checks(v["seed"])
    rows = [(r.name, r.passed, r.detail) for r in results]
    failed = [r.name for r in results if not r.passed]
    return ("check", "passed", "detail"), rows, {"failed": failed}


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def resolve_workers(cfg: RunConfig, cli_workers: int | None) -> int:
    if cli_workers is not None:
        return cli_workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"expected a positive integer, got {env!r}") from None
        if w < 1:
            raise ConfigError(WORKERS_ENV, "must be at least 1")
        return w
    return cfg["workers"]


def run(cfg: RunConfig, workers: int | None = None) -> int:
    """Execute a validated configuration; returns the exit status."""
    start = time.perf_counter()
    v = cfg.values
    w = resolve_workers(cfg, workers)
    header, rows, summary = HANDLERS[cfg.command](v, w)
    out = Path(v["out"])
    csv_path = out / f"{cfg.command}.csv"
    write_csv(csv_path, header, rows)
    manifest = {
        "command": cfg.command,
        "seed": v["seed"],
        "config": cfg.canonical(),
        "config_hash": cfg.hash(),
        "versions": versions(),
        "workers": w,
        "rows": len(rows),
        "csv": str(csv_path),
        "summary": summary,
        "wall_time_s": time.perf_counter() - start,
    }
    if isinstance(summary, dict) and summary.get("det_identity"):
        manifest["det_offset"] = summary["det_identity"]["offset"]
    write_manifest(out / f"{cfg.command}.json", manifest)
    if cfg.command == "selftest" and summary["failed"]:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cocycle-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="flat key=value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=str, help="output directory (default: results)")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        if args.workers is not None and args.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        overrides = {"seed": args.seed, "out": args.out}
        if not any(k == "command" for k, _ in tokenize(text)):
            overrides["command"] = args.command
        cfg = parse_config(text, overrides)
        if cfg.command != args.command:
            raise ConfigError("command", f"config says {cfg.command!r} but {args.command!r} was requested")
        workers = resolve_workers(cfg, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg, workers)
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001  (any failure inside a computation maps to exit 1)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
