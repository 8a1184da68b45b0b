import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from pvsubdiv.poly import figure1_quartic, multinomial, weyl_weights
from pvsubdiv.sampling import (DobroSpec, child_rngs, draw_coefficients, ell_cdf, sample_coeff_array, sample_dobro,
                               sample_many, smoothed)

TRIALS = 100_000


@pytest.mark.parametrize("kind", ["kss", "weyl", "ell"])
def test_coefficients_are_centered(kind):
    spec = DobroSpec(kind, 2, 3, ell=3)
    c = draw_coefficients(spec, TRIALS, np.random.default_rng(1))
    assert abs(c.mean()) <= 4 * c.std() / math.sqrt(TRIALS)


def test_weyl_uniform_coefficients_are_bounded():
    spec = DobroSpec("weyl", 2, 5)
    C = sample_coeff_array(spec, 2000, np.random.default_rng(2))
    assert (np.abs(C) <= np.sqrt(np.array(weyl_weights(2, 5), float))).all()


def test_kss_variance_is_multinomial():
    spec = DobroSpec("kss", 2, 4)
    C = sample_coeff_array(spec, TRIALS, np.random.default_rng(3))
    w = np.array(weyl_weights(2, 4), float)
    assert np.all(np.abs(C.var(axis=0) / w - 1) < 0.05)
    assert w.max() == multinomial(4, (2, 1, 1))


@pytest.mark.parametrize("ell", [2, 3, 5.5])
def test_ell_marginal_ks(ell):
    spec = DobroSpec("ell", 1, 1, ell=ell)
    c = draw_coefficients(spec, TRIALS, np.random.default_rng(4))
    res = stats.kstest(c, lambda t: ell_cdf(t, ell))
    assert res.statistic < 1.63 / math.sqrt(TRIALS)  # 1% critical value


def test_ell_cdf_for_ell_two_is_gaussian_like():
    # exp(-t^2) / sqrt(pi) is the normal law with variance 1/2
    t = np.linspace(-3, 3, 13)
    assert np.allclose(ell_cdf(t, 2), stats.norm.cdf(t, scale=math.sqrt(0.5)))


def test_spec_validation_and_constants():
    with pytest.raises(ValueError):
        DobroSpec("ell", 2, 2, ell=1.5)
    with pytest.raises(ValueError):
        DobroSpec("cauchy", 2, 2)
    with pytest.raises(ValueError):
        DobroSpec("kss", 0, 2)
    assert DobroSpec("kss", 2, 2).K_rho == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert DobroSpec("weyl", 2, 2).K_rho <= 1
    e = DobroSpec("ell", 2, 2, ell=4)
    assert e.rho <= 1 and e.K <= 1.2
    for kind in ("kss", "weyl", "ell"):
        assert DobroSpec(kind, 1, 1).K_rho >= 0.25


def test_reproducible_and_split_independent():
    spec = DobroSpec("kss", 2, 3, seed=42)
    assert sample_dobro(spec) == sample_dobro(spec)
    five = sample_many(spec, 5)
    assert five[:3] == sample_many(spec, 3)
    assert five[4] == sample_dobro(spec, child_rngs(42, 5)[4])
    assert sample_many(spec.with_seed(43), 1)[0] != five[0]


def test_all_monomials_populated():
    f = sample_dobro(DobroSpec("kss", 3, 3, seed=1))
    assert len(f.coeffs) == math.comb(6, 3) and all(c != 0 for c in f.coeffs)


def test_smoothed_model():
    f = figure1_quartic().rescale_domain(10)
    spec = DobroSpec("kss", 2, 4)
    rng = np.random.default_rng(5)
    q = smoothed(f, 0.5, spec, rng)
    g = sample_dobro(spec, np.random.default_rng(5))
    t = Fraction(0.5 * f.weyl_norm)
    diff = q - f
    assert diff == g.scale(t)
    assert diff.weyl_norm_sq == t * t * g.weyl_norm_sq
    tiny = smoothed(f, 1e-12, spec, rng)
    assert max(abs(float(a - b)) for a, b in zip(tiny.coeffs, f.coeffs)) < 1e-6 * f.weyl_norm
    with pytest.raises(ValueError):
        smoothed(f, 0, spec, rng)


def test_smoothed_second_moment():
    f = figure1_quartic().rescale_domain(10)
    spec = DobroSpec("kss", 2, 4)
    sigma = 0.3
    G = sample_coeff_array(spec, 10_000, np.random.default_rng(6))
    sq = (sigma * f.weyl_norm) ** 2 * (G ** 2 / np.array(weyl_weights(2, 4), float)).sum(axis=1)
    expect = sigma ** 2 * float(f.weyl_norm_sq) * spec.size  # E|g|^2 = N for unit normals
    assert abs(sq.mean() - expect) <= 3 * sq.std() / math.sqrt(len(sq))
