import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from pvsubdiv.poly import AffinePoly, weyl_weights

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_poly(rng, n, d, kind="kss"):
    """Weyl-scaled Gaussian polynomial with float (dyadic) coefficients."""
    scale = np.sqrt(np.array(weyl_weights(n, d), dtype=float))
    return AffinePoly(n, d, (scale * rng.standard_normal(len(scale))).tolist())


def random_rational_point(rng, n, lo=-2, hi=2, den=64):
    return [Fraction(int(rng.integers(lo * den, hi * den + 1)), den) for _ in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


small_ints = st.integers(min_value=-9, max_value=9)
dyadics = st.builds(lambda p, k: Fraction(p, 2 ** k), st.integers(-64, 64), st.integers(0, 5))


@st.composite
def polys(draw, max_n=3, max_d=4):
    n = draw(st.integers(1, max_n))
    d = draw(st.integers(1, max_d))
    N = math.comb(n + d, d)
    coeffs = draw(st.lists(small_ints, min_size=N, max_size=N).filter(any))
    return AffinePoly(n, d, coeffs)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
