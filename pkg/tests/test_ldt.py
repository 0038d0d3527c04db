import math

import numpy as np
import pytest
from scipy import stats

from cocyclelab.ldt import (
    BELOW_RESOLUTION,
    DeviationReport,
    angle_concentration,
    birkhoff_ldt,
    decay_rate_fit,
    deviation_measure,
    deviation_measures,
    fair_sign,
    fair_sign_tail,
    moment_bounds_check,
    rp1_distance,
    wilson_interval,
)
from cocyclelab.phase import rng_stream
from cocyclelab.potential import IDENTITY


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi


def test_impossible_threshold_has_zero_measure():
    rep = deviation_measure(0.0, 100.0, IDENTITY, 100, 4 * math.log(100), 500, rng_stream(1))
    assert rep.measure_hat == 0.0


def test_rejects_free_case():
    with pytest.raises(ValueError):
        deviation_measure(0.0, 0.0, IDENTITY, 100, 1.0, 10, rng_stream(2))


def test_nested_in_threshold():
    reps = deviation_measures(0.0, 100.0, IDENTITY, [200], [0.5, 0.9, 1.0, 1.2, 2.0], 2000, rng_stream(3))
    m = [r.measure_hat for r in reps]
    assert all(a >= b for a, b in zip(m, m[1:]))


def test_decay_in_n_within_confidence():
    reps = deviation_measures(0.0, 100.0, IDENTITY, [200, 400, 800], [2.0], 4000, rng_stream(4))
    for a, b in zip(reps, reps[1:]):
        assert b.wilson_interval[0] <= a.wilson_interval[1]


def test_synthetic_exponential_rate():
    reps = [DeviationReport(n, 1.0, math.exp(-0.01 * n), 10 ** 6, (0, 1)) for n in (100, 200, 400, 800)]
    fit = decay_rate_fit(reps)
    assert fit.rate == pytest.approx(0.01, abs=1e-6) and fit.r2 > 0.999


def test_all_zero_is_below_resolution():
    reps = [DeviationReport(n, 2.0, 0.0, 100, (0, 0.03)) for n in (100, 200, 400)]
    fit = decay_rate_fit(reps)
    assert not fit.resolved and fit.rate is None and fit.note == BELOW_RESOLUTION


def test_rp1_distance():
    assert rp1_distance(math.pi / 2) == 0
    assert rp1_distance(3 * math.pi / 2) == pytest.approx(0)
    assert rp1_distance(0.0) == pytest.approx(math.pi / 2)


def test_angle_concentration_full_and_nested():
    tab = angle_concentration(0.0, 100.0, IDENTITY, 20, [math.pi / 2, 0.4, 0.2, 0.1], 3000, rng_stream(5))
    assert tab.measure_hat[0] == pytest.approx(1.0)
    assert np.all(np.diff(tab.measure_hat) <= 0)


def test_angle_concentration_linear_in_delta():
    tab = angle_concentration(0.0, 100.0, IDENTITY, 50, [0.2, 0.1, 0.05, 0.025], 10_000, rng_stream(6))
    ratio = tab.measure_hat / tab.deltas
    assert ratio.max() / ratio.min() < 4


def test_moment_bounds():
    with pytest.raises(ValueError):
        moment_bounds_check(0.0, 0.0, IDENTITY, 100, 0.1, 10, rng_stream(7))
    zero = moment_bounds_check(0.0, 100.0, IDENTITY, 100, 0.0, 10, rng_stream(7))
    assert zero.neg_moment == 1.0 and zero.pos_moment == 1.0
    a, n = 0.04, 500
    chk = moment_bounds_check(0.0, 100.0, IDENTITY, n, a, 500, rng_stream(8))
    assert chk.log_neg_moment < -a * n * (math.log(100) - 5)
    assert chk.neg_pass and chk.pos_pass


def test_birkhoff_constant_never_deviates():
    rep = birkhoff_ldt(lambda x: np.full_like(x, 0.3), 64, 1e-9, 500, rng_stream(9))
    assert rep.measure_hat == 0.0


def test_birkhoff_rejects_large_observable():
    with pytest.raises(ValueError):
        birkhoff_ldt(lambda x: 2 * x, 16, 0.1, 10, rng_stream(10))


def test_fair_sign_tail_oracle():
    # P(|2B - r| > 0.5 r) for B ~ Bin(64, 1/2), from the survival function directly
    r = 64
    expected = 2 * stats.binom.sf(48, r, 0.5)
    assert fair_sign_tail(r, 0.5) == pytest.approx(expected, rel=1e-12)


def test_fair_sign_matches_binomial_tail():
    rep = birkhoff_ldt(fair_sign, 256, 0.1, 8000, rng_stream(11))
    lo, hi = rep.wilson_interval
    assert lo <= fair_sign_tail(256, 0.1) <= hi


def test_fair_sign_decays_with_length():
    m = [birkhoff_ldt(fair_sign, r, 0.25, 4000, rng_stream(12, r)).measure_hat for r in (16, 64, 256)]
    assert m[0] > m[1] > m[2]


def test_linear_observable_hoeffding():
    rep = birkhoff_ldt(lambda x: 2 * x - 1, 512, 0.3, 2000, rng_stream(13))
    assert abs(rep.integral) < 1e-12
    assert rep.measure_hat < 0.05
