"""How far the polar-form cocycle drifts from the original one.

The explicit polar factors use the lambda -> infinity limit of the rotation
angle, so B_n is only approximately conjugate to A_n.  This script tracks
max_n |log ||B_n|| - log ||A_n||| along single orbits and compares it with
log lambda, for a few couplings.  The mean growth rates still agree.

    python3 demos/polar_sandwich.py
"""

import math

import numpy as np

from cocyclelab.cocycle import a_log_norms, b_log_norms
from cocyclelab.phase import PhaseEnsemble, required_precision, rng_stream
from cocyclelab.potential import IDENTITY

n = 200
ns = list(range(1, n + 1))
print(f"{'lambda':>7} {'log lam':>8} {'median gap':>11} {'max gap':>8} {'orbits over':>12} {'mean A/n':>9} {'mean B/n':>9}")
for lam in (10.0, 30.0, 100.0, 300.0, 1000.0):
    rng = rng_stream(7, int(lam))
    E = rng.uniform(-2 * lam, 2 * lam, 100)
    ens = PhaseEnsemble.sample(rng, 100, required_precision(n + 1))
    gaps, la, lb = [], [], []
    for i, e in enumerate(E):
        one = PhaseEnsemble.from_phases([ens.phase(i)])
        a = a_log_norms(one, e, lam, IDENTITY, n, checkpoints=ns)
        b = b_log_norms(one, e, lam, IDENTITY, n, checkpoints=ns)
        gaps.append(max(abs(float(b[m][0] - a[m][0])) for m in ns))
        la.append(a[n][0] / n)
        lb.append(b[n][0] / n)
    gaps = np.array(gaps)
    over = int(np.count_nonzero(gaps > math.log(lam)))
    print(f"{lam:7g} {math.log(lam):8.3f} {np.median(gaps):11.3f} {gaps.max():8.3f} {over:9d}/100 "
          f"{np.mean(la):9.4f} {np.mean(lb):9.4f}")
