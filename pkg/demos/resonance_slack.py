"""Toy double-resonance scan: hit fraction as a function of the slack.

Resonant energies are the eigenvalues of H_[0,N1](x); a hit is a shift k for
which the N-step growth at 2^k x falls below the mean growth by more than the
slack.  Small slack finds hits everywhere, the default 0.8 log lambda almost
none, and anything past the uniform bound none at all.

    python3 demos/resonance_slack.py
"""

import math

from cocyclelab.phase import rng_stream
from cocyclelab.potential import IDENTITY
from cocyclelab.spectrum import default_slack, double_resonance_scan

lam, N = 100.0, 4
for slack in (1.0, 2.0, 3.0, default_slack(lam), 4 * math.log(lam)):
    scan = double_resonance_scan(lam, IDENTITY, N, 40, rng_stream(11), slack=slack,
                                 n1_values=[16, 32], k_range=(7, 14), lyap_samples=200)
    lo, hi = scan.wilson_interval
    print(f"slack={slack:6.3f}  hit fraction={scan.hit_fraction:.3f}  95% CI=[{lo:.3f}, {hi:.3f}]  hits={len(scan.hits)}")
