import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import polys, random_poly, random_rational_point
from size_bound_oracle import box_below_volume, region_half_width
from pvsubdiv.boxes import contains
from pvsubdiv.condition import (CoefficientBatch, bgt_bound_report, kappa_aff, kappa_many, kappa_sq_via_projection,
                                kappa_via_projection, local_size_bound, local_size_bound_fp, projection_norm_sq,
                                regularity_check, representers, instance_bound_interval, instance_bound_effective)
from pvsubdiv.effective import cf_fp_test, working_precision
from pvsubdiv.interval import cf_box_test
from pvsubdiv.poly import AffinePoly, PolynomialError, from_terms, linear_form


def test_linear_form_is_perfectly_conditioned(rng):
    f = linear_form(3, 1)
    for _ in range(20):
        x = random_rational_point(rng, 3, -5, 5)
        kv = kappa_aff(f, x)
        assert kv.kappa_sq == 1
        assert kv.value_term + kv.gradient_term == pytest.approx(1)
    assert kappa_many(f, rng.uniform(-9, 9, (100, 3))) == pytest.approx(np.ones(100))


def test_singular_point():
    f = from_terms(2, 2, [((2, 0), 1)])
    kv = kappa_aff(f, [0, 0])
    assert kv.is_singular and kv.kappa == math.inf
    assert kappa_via_projection(f, [0, 0]) == math.inf
    assert local_size_bound(f, [0, 0]) == 0 and local_size_bound_fp(f, [0, 0]) == 0


def test_zero_polynomial():
    with pytest.raises(PolynomialError):
        kappa_aff(AffinePoly(1, 2, [0, 0, 0]), [0])


@given(polys(), st.sampled_from([-5, -1, Fraction(2, 3), 9]))
def test_scale_invariance_exact(f, t):
    x = [Fraction(1, 3 + i) for i in range(f.n)]
    a, b = kappa_aff(f, x), kappa_aff(f.scale(t), x)
    assert a.kappa_sq == b.kappa_sq


@given(polys())
def test_kappa_at_least_one_over_sqrt2(f):
    x = [Fraction(-3, 7)] * f.n
    kv = kappa_aff(f, x)
    assert kv.is_singular or kv.kappa_sq >= Fraction(1, 2)
    assert kv.value_term <= kv.norm_sq * (1 + 1e-12)
    assert kv.gradient_term <= kv.norm_sq * (1 + 1e-12)


def test_projection_oracle_agrees(rng):
    for _ in range(150):
        n, d = int(rng.integers(1, 4)), int(rng.integers(1, 7))
        f = random_poly(rng, n, d)
        x = random_rational_point(rng, n)
        a = kappa_aff(f, x).kappa_sq
        b = kappa_sq_via_projection(f, x)
        assert a == b
        assert abs(kappa_via_projection(f, x) - math.sqrt(a)) <= 1e-9 * math.sqrt(a)


def test_float_path_close_to_exact(rng):
    f = random_poly(rng, 2, 5)
    X = rng.uniform(-2, 2, (50, 2))
    many = kappa_many(f, X)
    for x, k in zip(X, many):
        exact = math.sqrt(kappa_aff(f, [Fraction(v) for v in x]).kappa_sq)
        assert k == pytest.approx(exact, rel=1e-8)
        assert kappa_aff(f, list(x)).kappa == pytest.approx(exact, rel=1e-8)


def test_coefficient_batch_matches_single(rng):
    n, d = 2, 4
    polys_ = [random_poly(rng, n, d) for _ in range(5)]
    C = np.array([[float(c) for c in f.coeffs] for f in polys_])
    X = rng.uniform(-1, 1, (5, n))
    batch = CoefficientBatch(n, d, C)
    k = batch.kappa(X)
    for i, f in enumerate(polys_):
        assert k[i] == pytest.approx(kappa_many(f, X[i:i + 1])[0], rel=1e-10)
    fh, gh, rhs = batch.regularity(X)
    for i, f in enumerate(polys_):
        a, b, c = regularity_check(f, list(X[i]))
        assert (fh[i], gh[i], rhs[i]) == pytest.approx((a, b, c), rel=1e-9)
    shared = batch.kappa(X[:1])
    assert shared[2] == pytest.approx(kappa_many(polys_[2], X[:1])[0], rel=1e-10)


def test_member_of_sigma_x_and_representer():
    x = [Fraction(1, 2), Fraction(-1, 3)]
    # (X1 - 1/2)^2 + (X2 + 1/3)^2 vanishes to second order at x
    f = from_terms(2, 2, [((2, 0), 1), ((1, 0), -1), ((0, 2), 1), ((0, 1), Fraction(2, 3)),
                          ((0, 0), Fraction(1, 4) + Fraction(1, 9))])
    assert projection_norm_sq(f, x) == 0
    assert kappa_via_projection(f, x) == math.inf
    r = AffinePoly(2, 3, representers((2, 3), x)[0])
    assert projection_norm_sq(r, x) == r.weyl_norm_sq
    assert kappa_sq_via_projection(r, x) == 1 == kappa_aff(r, x).kappa_sq


def test_regularity_examples(rng):
    fh, gh, rhs = regularity_check(linear_form(2, 0), [0, 0])
    assert (fh, gh) == (0, pytest.approx(1)) and rhs == pytest.approx(1 / (2 * math.sqrt(2)))
    # near-singular input: rhs goes to zero
    f = from_terms(2, 2, [((2, 0), 1), ((0, 0), Fraction(-1, 10 ** 12))])
    assert regularity_check(f, [0, 0])[2] < 1e-5
    for _ in range(500):
        n, d = int(rng.integers(1, 4)), int(rng.integers(1, 7))
        f = random_poly(rng, n, d)
        a, b, c = regularity_check(f, list(rng.uniform(-3, 3, n)))
        assert max(a, b) > c


def test_size_bound_examples():
    f = linear_form(2, 0)
    # (2^(5/2) * 1 * 2 * 1)^-2 = 2^-7
    assert local_size_bound(f, [0, 0]) == pytest.approx(2.0 ** -7)
    assert local_size_bound_fp(f, [0, 0]) == pytest.approx(2.0 ** -14)
    for n in (1, 2, 3):
        g = linear_form(n, 0)
        x = [Fraction(1, 5)] * n
        assert local_size_bound(g, x) / local_size_bound_fp(g, x) == pytest.approx(2 ** (3.5 * n))


@settings(max_examples=150)
@given(st.integers(0, 2 ** 32 - 1))
def test_size_bounds_force_acceptance(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(1, 4)), int(rng.integers(1, 7))
    f = random_poly(rng, n, d)
    x = random_rational_point(rng, n, -1, 1, 1024)
    b = local_size_bound(f, x)
    box = box_below_volume(rng, x, b)
    assert contains(box, x) and box.volume < b
    assert cf_box_test(f, box) is not None
    bfp = local_size_bound_fp(f, x)
    box = box_below_volume(rng, x, bfp)
    m = working_precision(region_half_width(box), box.width, d, n)
    assert cf_fp_test(f, box, m) is not None


def test_bound_reports():
    assert bgt_bound_report(2, 4, 1, 10) == 4 ** 4 * 2 ** 16 * 10
    k = 3.0
    ratio = bgt_bound_report(2, 5, 2, k ** 2) / instance_bound_interval(2, 5, 2, k ** 2)
    assert ratio == pytest.approx(5 ** 2 * 2 ** (12 + 4 - 2 - 9))
    assert bgt_bound_report(3, 2, 0.5, 1) == 2 ** 6 * 2 ** 33
    with pytest.raises(ValueError):
        bgt_bound_report(2, 1, 1, 1)
    assert instance_bound_interval(2, 3, 1, 1.0) == 9 * 2 ** 11
    assert instance_bound_effective(2, 3, 2, 1.0) == 9 * 4 * 2 ** 18
