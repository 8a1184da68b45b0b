"""Dobro random polynomials and the smoothed perturbation model.

A sample is f^h = sum_{|alpha| = d} multinomial(d, alpha)^(1/2) c_alpha X^alpha
with i.i.d. centered c_alpha, dehomogenized.  Three coefficient laws:

    kss      standard normal                     K rho = 1/sqrt(2 pi)
    weyl     uniform on [-1, 1]                  K = rho = 1
    ell      density exp(-|t|^l) / (2 G(1+1/l))  K = 6/5, rho = 1

Seeding goes through numpy's SeedSequence; ``sample_many`` spawns one child
per sample so sample i does not depend on how the batch is split.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .poly import AffinePoly, PolynomialError, weyl_weights

CLASSES = ("kss", "weyl", "ell")
SEED_ENV = "PVSUBDIV_SEED"

# (K, rho) per class; only the product enters the bounds
_CONSTANTS = {
    "kss": (0.5, math.sqrt(2 / math.pi)),
    "weyl": (1.0, 1.0),
    "ell": (1.2, 1.0),
}


def default_seed() -> int:
    """Seed from the environment, 0 when unset."""
    return int(os.environ.get(SEED_ENV, "0"))


@dataclass(frozen=True)
class DobroSpec:
    """A random-coefficient model on P_{n,d}.

    ``K`` and ``rho`` are bookkeeping for the bound formulas; ``sigma`` is
    only used by the smoothed experiments.
    """

    kind: str
    n: int
    d: int
    ell: float = 2.0
    seed: int = 0
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in CLASSES:
            raise ValueError(f"unknown class {self.kind!r}; expected one of {CLASSES}")
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if self.kind == "ell" and not self.ell >= 2:
            raise ValueError("the l-exponential class needs l >= 2")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def K(self) -> float:
        return _CONSTANTS[self.kind][0]

    @property
    def rho(self) -> float:
        return _CONSTANTS[self.kind][1]

    @property
    def K_rho(self) -> float:
        return self.K * self.rho

    @property
    def size(self) -> int:
        return math.comb(self.n + self.d, self.d)

    def with_seed(self, seed: int) -> "DobroSpec":
        return replace(self, seed=seed)


def draw_coefficients(spec: DobroSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Raw i.i.d. c_alpha (before the multinomial scaling)."""
    if spec.kind == "kss":
        return rng.standard_normal(shape)
    if spec.kind == "weyl":
        return rng.uniform(-1.0, 1.0, shape)
    mag = rng.gamma(1.0 / spec.ell, 1.0, shape) ** (1.0 / spec.ell)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * mag


def ell_cdf(t, ell: float):
    """CDF of the density exp(-|t|^l) / (2 Gamma(1 + 1/l))."""
    from scipy.special import gammainc

    t = np.asarray(t, dtype=float)
    return 0.5 + 0.5 * np.sign(t) * gammainc(1.0 / ell, np.abs(t) ** ell)


def _scales(n: int, d: int) -> np.ndarray:
    return np.sqrt(np.array(weyl_weights(n, d), dtype=float))


def sample_coeff_array(spec: DobroSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` samples as rows of dense coefficients (affine monomial order)."""
    return draw_coefficients(spec, (count, spec.size), rng) * _scales(spec.n, spec.d)


def sample_dobro(spec: DobroSpec, rng: np.random.Generator | None = None) -> AffinePoly:
    """One dobro polynomial; ``rng`` defaults to one seeded from ``spec.seed``."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return AffinePoly(spec.n, spec.d, sample_coeff_array(spec, 1, rng)[0].tolist())


def child_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def sample_many(spec: DobroSpec, count: int) -> list[AffinePoly]:
    """``count`` samples, sample i drawn from the i-th spawned child seed."""
    return [sample_dobro(spec, r) for r in child_rngs(spec.seed, count)]


def smoothed(f: AffinePoly, sigma: float, spec: DobroSpec, rng: np.random.Generator) -> AffinePoly:
    """q = f + sigma |f| g with g drawn from ``spec``."""
    if f.is_zero():
        raise PolynomialError("cannot smooth the zero polynomial")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if (spec.n, spec.d) != (f.n, f.d):
        raise PolynomialError("spec shape differs from f")
    g = sample_dobro(spec, rng)
    return f + g.scale(sigma * f.weyl_norm)
