"""Acceptance suite: one PASS/FAIL line per criterion, at fixed seeds.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the lines as they
are produced; a summary table is printed at the end of every session.
"""

import math
import time

import numpy as np
import pytest

from _configs import config_text
from cocyclelab.cli import main
from cocyclelab.cocycle import a_log_norms, angle_orbit, b_apply, b_log_norms, cocycle_product, log_norm_expansion
from cocyclelab.config import COMMANDS
from cocyclelab.ldt import angle_concentration, birkhoff_ldt, decay_rate_fit, deviation_measures, fair_sign, fair_sign_tail
from cocyclelab.lyapunov import (
    AvalanchePreconditionError,
    ap_lyapunov,
    avalanche_residual,
    finite_lyapunov,
    free_lyapunov,
    lyapunov_sweep,
    orbit_blocks,
)
from cocyclelab.phase import PhaseEnsemble, required_precision, rng_stream, sample_uniform
from cocyclelab.potential import IDENTITY
from cocyclelab.spectrum import (
    build_finite,
    det_matrix,
    greens_decay_fit,
    greens_entry,
    greens_log_matrix,
    ids_estimate,
    localization_report,
    operator_from_diagonal,
    thouless_residual,
    verify_det_identity,
)

RESULTS = {}


def report(key, ok, detail, capsys):
    line = f"ACCEPTANCE {key:<4} {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[key] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_01_determinant_identity(capsys):
    rng = rng_stream(101)
    t0 = time.perf_counter()
    offsets, worst = set(), 0.0
    for _ in range(100):
        lam = float(rng.choice([5.0, 50.0]))
        x = sample_uniform(rng, 200)
        E = float(rng.uniform(-2 * lam, 2 * lam))
        n = int(rng.integers(1, 31))
        res = verify_det_identity(x, lam, IDENTITY, E, n)
        offsets.add(res.offset)
        # all four entries under the resolved offset, entrywise relative to the largest entry
        ref = cocycle_product(x, E, lam, IDENTITY, n).matrix()
        err = np.abs(det_matrix(x, lam, IDENTITY, E, n, res.offset) - ref).max() / np.abs(ref).max()
        worst = max(worst, float(err))
    dt = time.perf_counter() - t0
    ok = len(offsets) == 1 and worst <= 1e-8 and dt < 10
    report("1", ok, f"offset={sorted(offsets)} max_rel_err={worst:.2e} runtime={dt:.2f}s", capsys)


def test_02_polar_equivalence(capsys):
    rng = rng_stream(102)
    t0 = time.perf_counter()
    worst_norm = worst_split = 0.0
    for _ in range(100):
        x = sample_uniform(rng, 300)
        lam = float(rng.choice([10.0, 30.0, 100.0]))
        E = float(rng.uniform(-2 * lam, 2 * lam))
        beta = float(rng.uniform(0, math.pi))
        exp = log_norm_expansion(angle_orbit(x, E, lam, beta, IDENTITY, 100), lam)
        direct = b_apply(x, E, lam, IDENTITY, 100, beta) / 100
        worst_norm = max(worst_norm, abs(exp.total - direct) / abs(direct))
        worst_split = max(worst_split, abs(exp.total - exp.total_r2))
    dt = time.perf_counter() - t0
    ok = worst_norm <= 1e-8 and worst_split <= 1e-9 and dt < 10
    report("2", ok, f"max_rel_err={worst_norm:.2e} R1_vs_R2={worst_split:.2e} runtime={dt:.2f}s", capsys)


@pytest.mark.parametrize("lam", [10.0, 100.0])
def test_03_norm_sandwich(lam, capsys):
    rng = rng_stream(103, int(lam))
    ns = list(range(1, 201))
    violating, worst = 0, 0.0
    for _ in range(100):
        ens = PhaseEnsemble.sample(rng, 1, required_precision(201))
        E = float(rng.uniform(-2 * lam, 2 * lam))
        a = a_log_norms(ens, E, lam, IDENTITY, 200, checkpoints=ns)
        b = b_log_norms(ens, E, lam, IDENTITY, 200, checkpoints=ns)
        gap = max(abs(float(b[n][0] - a[n][0])) for n in ns)
        worst = max(worst, gap)
        violating += gap > math.log(lam) + 1e-12
    report(f"3@{lam:g}", violating == 0,
           f"violating_orbits={violating}/100 max|log(B/A)|={worst:.3f} bound=log(lambda)={math.log(lam):.3f}",
           capsys)


def test_04_free_closed_form(capsys):
    t0 = time.perf_counter()
    parts, ok = [], True
    for i, E in enumerate((2.5, 3.0, 5.0)):
        exact = free_lyapunov(E)
        est = finite_lyapunov(E, 0.0, IDENTITY, 2000, 20, rng_stream(104, i)).mean
        op = build_finite(sample_uniform(rng_stream(105, i), 400), 0.0, IDENTITY, 200)
        slope = greens_decay_fit(op, E).slope
        ok &= abs(est - exact) <= 0.02 and abs(-slope - exact) <= 0.05 * exact
        parts.append(f"E={E:g}: L={est:.4f} slope={slope:.4f} exact={exact:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    report("4", ok, "; ".join(parts) + f" runtime={dt:.1f}s", capsys)


def test_05_lyapunov_window(capsys):
    t0 = time.perf_counter()
    parts, ok = [], True
    for lam in (30.0, 100.0, 300.0):
        rows = lyapunov_sweep(np.linspace(-2 * lam, 2 * lam, 41), lam, IDENTITY, 2000, 500, rng_stream(105, int(lam)))
        m = np.array([r.mean for r in rows])
        ok &= bool(np.all(m >= math.log(lam) - 3) and np.all(m <= math.log(lam) + 3))
        parts.append(f"lambda={lam:g}: [{m.min():.3f}, {m.max():.3f}] vs [{math.log(lam) - 3:.3f}, {math.log(lam) + 3:.3f}]")
    dt = time.perf_counter() - t0
    ok &= dt < 900
    report("5", ok, "; ".join(parts) + f" runtime={dt:.1f}s", capsys)


def test_06_avalanche(capsys):
    diag = avalanche_residual([np.diag([100.0, 0.01])] * 10, 100.0)
    rng = rng_stream(106)
    worst_ratio, failures = 0.0, 0
    for _ in range(50):
        lam = float(rng.choice([50.0, 100.0, 300.0]))
        K = int(rng.integers(15, 26))
        count = int(rng.integers(5, 60))
        E = float(rng.uniform(-lam, 2 * lam))
        A = math.log(lam) - 1.0
        mu = math.exp((math.log(lam) - A) * K)
        x = sample_uniform(rng, K * count + 100)
        try:
            res = avalanche_residual(orbit_blocks(x, E, lam, IDENTITY, K, count), mu)
        except AvalanchePreconditionError:
            failures += 1
            continue
        worst_ratio = max(worst_ratio, res / (count / mu))
    ap = ap_lyapunov(0.0, 100.0, IDENTITY, 50, 500, rng_stream(107))
    fin = finite_lyapunov(0.0, 100.0, IDENTITY, 2000, 500, rng_stream(108))
    gap, allowed = abs(ap.mean - fin.mean), 3 * math.hypot(ap.stderr, fin.stderr) + 0.2
    ok = diag <= 1e-12 and worst_ratio < 10 and failures == 0 and gap <= allowed
    report("6", ok, f"diag_residual={diag:.1e} max residual/(n/mu)={worst_ratio:.3f} (C=10) "
                    f"precondition_failures={failures} |AP-direct|={gap:.4f} <= {allowed:.4f}", capsys)


def test_07_ldt_trend(capsys):
    t0 = time.perf_counter()
    reps = deviation_measures(0.0, 100.0, IDENTITY, [200, 400, 800, 1600], [2.0], 20_000, rng_stream(109))
    monotone = all(b.wilson_interval[0] <= a.wilson_interval[1] for a, b in zip(reps, reps[1:]))
    fit = decay_rate_fit(reps)
    rate_ok = (not fit.resolved) or fit.rate > 0
    dt = time.perf_counter() - t0
    meas = ", ".join(f"n={r.n}:{r.measure_hat:.2e}" for r in reps)
    fit_txt = f"rate={fit.rate:.3g}" if fit.resolved else f"fit {fit.note}"
    report("7", monotone and rate_ok and dt < 600, f"{meas}; {fit_txt} runtime={dt:.1f}s", capsys)


def test_08_angle_concentration(capsys):
    tab = angle_concentration(0.0, 100.0, IDENTITY, 50, [0.2, 0.1, 0.05, 0.025], 10_000, rng_stream(110))
    ratio = tab.measure_hat / tab.deltas
    spread = ratio.max() / ratio.min() if ratio.min() > 0 else math.inf
    report("8", spread < 4, f"measure/delta={np.round(ratio, 3).tolist()} spread={spread:.3f} (< 4)", capsys)


def test_09_greens_oracles(capsys):
    rng = rng_stream(111)
    worst_log = worst_id = 0.0
    for _ in range(100):
        N = int(rng.integers(0, 13))
        lam = float(rng.choice([1.0, 10.0, 100.0]))
        op = operator_from_diagonal(rng.uniform(0, lam, N + 1))
        E = float(rng.uniform(-2, lam + 2))
        inv = np.linalg.inv(op.dense() - E * np.eye(N + 1))
        _, logs = greens_log_matrix(op, E)
        worst_log = max(worst_log, float(np.max(np.abs(logs - np.log(np.abs(inv))) / np.maximum(1, np.abs(logs)))))
        n2 = int(rng.integers(0, N + 1))
        col = np.array([greens_entry(op, E, n1, n2).value() for n1 in range(N + 1)])
        unit = np.eye(N + 1)[n2]
        worst_id = max(worst_id, float(np.max(np.abs((op.dense() - E * np.eye(N + 1)) @ col - unit))))
    report("9", worst_log <= 1e-8 and worst_id <= 1e-7,
           f"max_log_rel_err={worst_log:.2e} max_identity_residual={worst_id:.2e}", capsys)


def test_10_localization(capsys):
    t0 = time.perf_counter()
    gammas, iprs = [], []
    for p in range(20):
        rows = localization_report(sample_uniform(rng_stream(112, p), 400), 100.0, IDENTITY, 300, rng_stream(113, p))
        gammas += [r.gamma for r in rows]
        iprs += [r.ipr for r in rows]
    free = localization_report(sample_uniform(rng_stream(114), 400), 0.0, IDENTITY, 300)
    g_med, ipr_med = float(np.median(gammas)), float(np.median(iprs))
    g_free = float(np.median([r.gamma for r in free]))
    dt = time.perf_counter() - t0
    ok = g_med >= 0.5 * math.log(100) and ipr_med >= 0.1 and g_free <= 0.05 and dt < 600
    report("10", ok, f"median_gamma={g_med:.3f} (>= {0.5 * math.log(100):.3f}) median_ipr={ipr_med:.3f} "
                     f"free_median_gamma={g_free:.2e} runtime={dt:.1f}s", capsys)


def test_11_thouless(capsys):
    free_tab = ids_estimate(0.0, IDENTITY, 1000, np.linspace(-3, 3, 3001), 1, rng_stream(115))
    r_free = thouless_residual(free_tab, 3.0, free_lyapunov(3.0))
    E_mid, lam = 50.0, 100.0
    tab = ids_estimate(lam, IDENTITY, 400, np.linspace(-3, lam + 3, 2121), 40, rng_stream(116))
    L_hat = finite_lyapunov(E_mid, lam, IDENTITY, 2000, 500, rng_stream(117)).mean
    r_mid = thouless_residual(tab, E_mid, L_hat)
    ok = r_free < 0.02 and r_mid < 0.1 * L_hat
    report("11", ok, f"free E=3 residual={r_free:.2e} (< 0.02); lambda=100 E={E_mid:g} residual={r_mid:.3f} "
                     f"(< {0.1 * L_hat:.3f})", capsys)


def test_12_birkhoff(capsys):
    parts, ok = [], True
    for r in (64, 256, 1024):
        rep = birkhoff_ldt(fair_sign, r, 0.1, 4000, rng_stream(118, r))
        exact = fair_sign_tail(r, 0.1)
        lo, hi = rep.wilson_interval
        ok &= lo <= exact <= hi
        parts.append(f"r={r}: exact={exact:.4f} in [{lo:.4f}, {hi:.4f}]")
    report("12", ok, "; ".join(parts), capsys)


def test_13_determinism(tmp_path, capsys):
    differing, failed = [], []
    for command in COMMANDS:
        cfg = tmp_path / f"{command}.cfg"
        cfg.write_text(config_text(command, seed=13))
        outputs = []
        for w in (1, 8):
            out = tmp_path / f"{command}-{w}"
            if main([command, "--config", str(cfg), "--out", str(out), "--workers", str(w)]) != 0:
                failed.append(command)
            outputs.append((out / f"{command}.csv").read_bytes())
        if outputs[0] != outputs[1]:
            differing.append(command)
    ok = not differing and not failed
    report("13", ok, f"{len(COMMANDS)} commands, workers 1 vs 8: differing={differing} failed={failed}", capsys)
