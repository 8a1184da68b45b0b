import math

import numpy as np
import pytest

from conftest import random_poly
from pvsubdiv.amortize import (avg_boxes, box_count_check, empirical_tail, loglog_slope, mc_integral_bound,
                               mc_kappa_moment, smoothed_boxes, tail_bound, average_bound_interval, average_bound_effective)
from pvsubdiv.condition import kappa_many, instance_bound_interval
from pvsubdiv.effective import pv_effective
from pvsubdiv.interval import pv_interval
from pvsubdiv.poly import figure1_quartic, linear_form
from pvsubdiv.sampling import DobroSpec


def tail_formula(N, n, K_rho, t, sigma=None):
    # written out independently of the library
    val = 2 * (N / (n + 1)) ** ((n + 1) / 2) * (15 * K_rho) ** (n + 1) * math.log(t) ** ((n + 1) / 2)
    val /= t ** (n + 1)
    if sigma:
        val *= (1 + 1 / sigma) ** (n + 1)
    return min(1.0, val)


def test_constant_integrand():
    est = mc_integral_bound(linear_form(2), 1.5, lambda X: np.full(len(X), 0.25), samples=1000)
    assert est.estimate == pytest.approx(4 / 0.25 * 9) and est.stderr == 0
    # kappa is identically 1 for a linear form, so the default integrand is constant too
    est = mc_integral_bound(linear_form(2), 1, samples=1000)
    assert est.estimate == pytest.approx(4 * 2 ** 7 * 4)
    assert est.stderr <= 1e-9 * est.estimate


def test_reference_run_agreement():
    f = random_poly(np.random.default_rng(8), 2, 3)
    small = mc_integral_bound(f, 1, samples=20_000, rng=1)
    ref = mc_integral_bound(f, 1, samples=1_000_000, rng=2)
    assert abs(small.estimate - ref.estimate) <= 3 * math.hypot(small.stderr, ref.stderr)
    strat = mc_integral_bound(f, 1, samples=20_000, rng=3, stratified=True)
    assert abs(strat.estimate - ref.estimate) <= 3 * math.hypot(strat.stderr, ref.stderr) + 0.05 * ref.estimate


def test_stderr_scales_with_samples():
    f = random_poly(np.random.default_rng(9), 2, 4)
    ratios = []
    for s in range(5):
        a = mc_kappa_moment(f, 1, samples=20_000, rng=s).stderr
        b = mc_kappa_moment(f, 1, samples=40_000, rng=100 + s).stderr
        ratios.append(b / a)
    assert np.median(ratios) == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_integral_bounds_box_counts(rng):
    for _ in range(4):
        f = random_poly(rng, 2, int(rng.integers(2, 6)))
        for run in (pv_interval, pv_effective):
            ok, est = box_count_check(run(f, 1), f, samples=20_000, rng=0)
            assert ok, est


def test_infinite_samples_are_flagged():
    f = linear_form(2)
    est = mc_integral_bound(f, 1, lambda X: np.where(X[:, 0] > 0.9, 0.0, 1.0), samples=1000, rng=0)
    assert est.estimate == math.inf and est.infinite > 0


def test_moments():
    m = mc_kappa_moment(linear_form(2, 0), 1, samples=1000)
    assert m.estimate == pytest.approx(1) and m.stderr < 1e-12
    assert mc_kappa_moment(linear_form(2, 0), 1, samples=1000, log_squared=True).estimate == pytest.approx(0, abs=1e-20)
    f = random_poly(np.random.default_rng(10), 2, 4)
    X = np.random.default_rng(11).uniform(-1, 1, (5000, 2))
    k = kappa_many(f, X)
    if k.min() >= 1:
        lo = mc_kappa_moment(f, 1, 2, samples=5000, rng=11).estimate
        hi = mc_kappa_moment(f, 1, 2.5, samples=5000, rng=11).estimate
        assert lo <= hi
    est = mc_kappa_moment(f, 1, samples=5000, rng=11)
    assert est.estimate == pytest.approx(float(np.mean(k ** 2)))
    assert instance_bound_interval(2, 4, 1, est.estimate) == pytest.approx(16 * 2 ** (2 + 9) * est.estimate)
    with pytest.raises(ValueError):
        mc_kappa_moment(f, 1, samples=1)


def test_tail_bound_formula():
    for (n, d, s) in ((2, 3, None), (2, 5, 0.1), (3, 2, 1.0)):
        N = math.comb(n + d, d)
        for t in (math.e, 10, 100, 1e4):
            assert tail_bound(n, d, 0.4, t, s) == pytest.approx(tail_formula(N, n, 0.4, t, s))
    assert tail_bound(2, 3, 1, 1e300) < 1e-200
    assert tail_bound(2, 3, 1, 10, binomial=True) >= tail_bound(2, 3, 1, 10)
    with pytest.raises(ValueError):
        tail_bound(2, 3, 1, 2.0)


def test_empirical_tail_kss():
    spec = DobroSpec("kss", 2, 3, seed=7)
    rows = empirical_tail(spec, [0, 0], [math.e, 10, 100, 1e9], trials=10_000)
    assert all(r.ok for r in rows)
    assert rows[-1].frequency == 0
    assert [r.frequency for r in rows] == sorted((r.frequency for r in rows), reverse=True)
    with pytest.raises(ValueError):
        empirical_tail(spec, [0, 0], [2.0], trials=10_000)
    with pytest.raises(ValueError):
        empirical_tail(spec, [0, 0], [10], trials=10)


def test_empirical_tail_smoothed():
    f = figure1_quartic().rescale_domain(10)
    spec = DobroSpec("kss", 2, 4, seed=3)
    rows = empirical_tail(spec, [0.25, -0.5], [math.e, 10, 100], trials=2000, center=f, sigma=0.1)
    assert all(r.ok for r in rows)
    assert rows[0].bound == 1.0


def test_average_bounds():
    b = average_bound_interval(2, 3, 1, 1 / math.sqrt(2 * math.pi))
    assert b == pytest.approx(9 * 10 ** 1.5 * 2 ** 32 * (2 * math.pi) ** -1.5)
    assert average_bound_interval(2, 3, 1, 0.5, sigma=1) == pytest.approx(8 * average_bound_interval(2, 3, 1, 0.5))
    assert average_bound_effective(2, 3, 2, 1.0) == pytest.approx(9 * 10 ** 1.5 * 4 * 2 ** 42)


def test_avg_boxes_small_and_deterministic():
    rows = avg_boxes("kss", 2, [2, 3], trials=4, seed=5, moment_samples=200)
    assert [r["d"] for r in rows] == [2, 3]
    for r in rows:
        assert 1 <= r["mean_boxes"] <= r["average_bound"]
    again = avg_boxes("kss", 2, [2, 3], trials=4, seed=5, moment_samples=200, workers=2)
    assert rows == again


def test_smoothed_boxes_runs():
    f = figure1_quartic().rescale_domain(10)
    rows = smoothed_boxes(f, 1, [0.1, 1.0], trials=3, seed=1)
    assert [r["sigma"] for r in rows] == [0.1, 1.0]
    assert rows[0]["smoothed_bound"] > rows[1]["smoothed_bound"]


def test_loglog_slope():
    xs = [3, 4, 5, 6]
    assert loglog_slope(xs, [7 * x ** 3 for x in xs]) == pytest.approx(3)
