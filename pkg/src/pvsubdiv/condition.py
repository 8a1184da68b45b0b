"""Local condition number kappa_aff and the quantities built on it.

kappa(F, y) = |F| / sqrt(F(y)^2 + |D_y F restricted to T_y S^n|^2 / d) and
kappa_aff(f, x) = kappa(f^h, IO(x)).  By Euler's identity the tangential
part of the gradient is grad F(y) - d F(y) y, so no tangent basis is needed.

At a rational point everything is rational up to one square root:

    F(y)^2          = f(x)^2 / S^d,               S = 1 + |x|^2
    |proj|^2        = |v|^2 / S^(d-1),            v = grad F(1, x) - d f(x) (1, x) / S

so kappa_aff^2 is computed exactly.  An independent route goes through the
orthogonal projection onto the span of the Weyl representers of
g -> g(x) and g -> d_i g(x); both give the same rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly import (AffinePoly, PolynomialError, affine_monomials, homogeneous_gradient_at_chart,
                   homogeneous_gradient_many, multinomial, weyl_weights, _is_exact)


@dataclass(frozen=True)
class ConditionValue:
    """kappa_aff(f, x) with the two terms under the square root.

    ``value_term`` is F(y)^2 and ``gradient_term`` is |proj|^2 / d, both
    relative to |F|^2 = ``norm_sq``.  ``kappa_sq`` is exact when the inputs
    were rational (a Fraction) and None at singular points.
    """

    kappa: float
    value_term: float
    gradient_term: float
    norm_sq: float
    kappa_sq: Fraction | float | None = None

    @property
    def is_singular(self) -> bool:
        return math.isinf(self.kappa)


def _require_nonzero(f: AffinePoly):
    if f.is_zero():
        raise PolynomialError("zero polynomial has no condition number")


def condition_terms_exact(f: AffinePoly, x: Sequence) -> tuple[Fraction, Fraction]:
    """(F(y)^2, |proj|^2 / d) exactly, for a rational point x."""
    pts = [Fraction(v) for v in x]
    if len(pts) != f.n:
        raise PolynomialError("dimension mismatch")
    d = f.d
    S = 1 + sum(v * v for v in pts)
    grad = homogeneous_gradient_at_chart(f, pts)
    val = f(pts)
    chart = [Fraction(1)] + pts
    v = [g - d * val * c / S for g, c in zip(grad, chart)]
    value_term = val * val / S ** d
    grad_term = sum(t * t for t in v) / (d * S ** (d - 1))
    return value_term, grad_term


def kappa_aff(f: AffinePoly, x: Sequence) -> ConditionValue:
    """kappa_aff(f, x); exact arithmetic for rational x, float otherwise."""
    _require_nonzero(f)
    if len(x) != f.n:
        raise PolynomialError("dimension mismatch")
    W = f.weyl_norm_sq
    if all(_is_exact(v) for v in x):
        vt, gt = condition_terms_exact(f, x)
        den = vt + gt
        if den == 0:
            return ConditionValue(math.inf, 0.0, 0.0, float(W), None)
        k2 = W / den
        return ConditionValue(math.sqrt(k2), float(vt), float(gt), float(W), k2)
    X = np.asarray([x], dtype=float)
    vt, gt = _terms_float(f, X)
    den = vt[0] + gt[0]
    kappa = math.inf if den == 0 else math.sqrt(float(W) / den)
    return ConditionValue(kappa, float(vt[0]), float(gt[0]), float(W), None if den == 0 else float(W) / den)


def _terms_float(f: AffinePoly, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = f.d
    val, grads = homogeneous_gradient_many(f, X)
    S = 1.0 + (X * X).sum(axis=1)
    chart = np.hstack([np.ones((X.shape[0], 1)), X])
    v = grads - (d * val / S)[:, None] * chart
    value_term = val * val / S ** d
    grad_term = (v * v).sum(axis=1) / (d * S ** (d - 1))
    return value_term, grad_term


def kappa_many(f: AffinePoly, X: np.ndarray) -> np.ndarray:
    """Float kappa_aff at every row of X (inf at singular points)."""
    _require_nonzero(f)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vt, gt = _terms_float(f, X)
    with np.errstate(divide="ignore"):
        return np.sqrt(float(f.weyl_norm_sq) / (vt + gt))


# ---------------------------------------------------------------------------
# batches of polynomials given by float coefficient arrays


class CoefficientBatch:
    """Quantities for many polynomials of one shape, rows of ``C``.

    Columns of C follow ``affine_monomials(n, d)``.  Used by the Monte-Carlo
    experiments, which would otherwise build thousands of exact polynomials.
    """

    def __init__(self, n: int, d: int, C: np.ndarray):
        self.n, self.d = n, d
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.E = np.array(affine_monomials(n, d), dtype=np.int64).reshape(-1, n)
        self.weights = np.array(weyl_weights(n, d), dtype=float)
        self.norm_sq = (self.C ** 2 / self.weights).sum(axis=1)

    def _mons(self, X, E):
        out = np.ones((X.shape[0], E.shape[0]))
        for i in range(self.n):
            out *= X[:, i:i + 1] ** E[:, i]
        return out

    def values(self, X: np.ndarray):
        """f_t(x_t), grad f^h_t(1, x_t) for paired rows (or one shared x)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] == 1 and self.C.shape[0] > 1:
            X = np.repeat(X, self.C.shape[0], axis=0)
        E, C, d = self.E, self.C, self.d
        mons = self._mons(X, E)
        val = (mons * C).sum(axis=1)
        grads = np.empty((X.shape[0], self.n + 1))
        grads[:, 0] = (mons * C * (d - E.sum(axis=1))).sum(axis=1)
        for i in range(self.n):
            Ei = E.copy()
            mask = Ei[:, i] > 0
            Ei[mask, i] -= 1
            ci = np.where(mask, C * E[:, i], 0.0)
            grads[:, i + 1] = (self._mons(X, Ei) * ci).sum(axis=1)
        return X, val, grads

    def kappa(self, X: np.ndarray) -> np.ndarray:
        X, val, grads = self.values(X)
        d = self.d
        S = 1.0 + (X * X).sum(axis=1)
        chart = np.hstack([np.ones((X.shape[0], 1)), X])
        v = grads - (d * val / S)[:, None] * chart
        den = val * val / S ** d + (v * v).sum(axis=1) / (d * S ** (d - 1))
        with np.errstate(divide="ignore"):
            return np.sqrt(self.norm_sq / den)

    def regularity(self, X: np.ndarray):
        """(|fhat|, |dfhat|, 1 / (2 sqrt(2d) kappa)) for paired rows."""
        X, val, grads = self.values(X)
        d = self.d
        S = 1.0 + (X * X).sum(axis=1)
        nrm = np.sqrt(self.norm_sq)
        fh = np.abs(val) / (nrm * S ** ((d - 1) / 2))
        gh = np.sqrt((grads[:, 1:] ** 2).sum(axis=1)) / (d * nrm * S ** (d / 2 - 1))
        kap = self.kappa(X)
        return fh, gh, 1.0 / (2 * math.sqrt(2 * d) * kap)


# ---------------------------------------------------------------------------
# projection oracle


def representers(f_shape: tuple[int, int], x: Sequence) -> list[list[Fraction]]:
    """Weyl representers of g -> g(x) and g -> d_i g(x), in affine coordinates.

    For a functional l, the representer r has r_alpha = multinomial(d, alpha) l(X^alpha),
    since the Weyl Gram matrix of the monomial basis is diagonal.
    """
    n, d = f_shape
    pts = [Fraction(v) for v in x]
    monos = affine_monomials(n, d)
    weights = weyl_weights(n, d)

    def mono_at(alpha):
        out = Fraction(1)
        for xi, a in zip(pts, alpha):
            out *= xi ** a
        return out

    reps = [[w * mono_at(a) for a, w in zip(monos, weights)]]
    for i in range(n):
        row = []
        for a, w in zip(monos, weights):
            if a[i]:
                beta = a[:i] + (a[i] - 1,) + a[i + 1:]
                row.append(w * a[i] * mono_at(beta))
            else:
                row.append(Fraction(0))
        reps.append(row)
    return reps


def _weyl_dot(u, v, weights):
    return sum((a * b / w for a, b, w in zip(u, v, weights)), Fraction(0))


def projection_norm_sq(f: AffinePoly, x: Sequence) -> Fraction:
    """|R_x f|^2 where R_x projects onto the span of the representers.

    Gram-Schmidt without normalization keeps everything rational.
    """
    weights = weyl_weights(f.n, f.d)
    basis: list = []
    for r in representers((f.n, f.d), x):
        q = list(r)
        for b, bb in basis:
            c = _weyl_dot(q, b, weights) / bb
            q = [qi - c * bi for qi, bi in zip(q, b)]
        qq = _weyl_dot(q, q, weights)
        if qq == 0:
            raise ArithmeticError("degenerate representer family")
        basis.append((q, qq))
    coeffs = list(f.coeffs)
    return sum((_weyl_dot(coeffs, q, weights) ** 2 / qq for q, qq in basis), Fraction(0))


def kappa_via_projection(f: AffinePoly, x: Sequence) -> float:
    """|f| / |R_x f|, the distance form of kappa_aff (inf when f is in Sigma_x)."""
    _require_nonzero(f)
    k2 = kappa_sq_via_projection(f, x)
    return math.inf if k2 is None else math.sqrt(k2)


def kappa_sq_via_projection(f: AffinePoly, x: Sequence) -> Fraction | None:
    p = projection_norm_sq(f, [Fraction(v) for v in x])
    return None if p == 0 else f.weyl_norm_sq / p


# ---------------------------------------------------------------------------
# derived quantities


def regularity_check(f: AffinePoly, x: Sequence) -> tuple[float, float, float]:
    """(|fhat(x)|, |dfhat(x)|, 1 / (2 sqrt(2d) kappa_aff(f, x)))."""
    from .poly import eval_dfhat, eval_fhat

    kv = kappa_aff(f, x)
    rhs = 0.0 if kv.is_singular else 1.0 / (2 * math.sqrt(2 * f.d) * kv.kappa)
    return abs(eval_fhat(f, x)), float(np.linalg.norm(eval_dfhat(f, x))), rhs


def local_size_bound(f: AffinePoly, x: Sequence) -> float:
    """b(x) = (2^(5/2) d n kappa_aff(f, x))^-n, 0 at singular points."""
    k = kappa_aff(f, x).kappa
    return size_bound_from_kappa(k, f.d, f.n, 2.5)


def local_size_bound_fp(f: AffinePoly, x: Sequence) -> float:
    """b_FP(x) = (2^6 d n kappa_aff(f, x))^-n, 0 at singular points."""
    k = kappa_aff(f, x).kappa
    return size_bound_from_kappa(k, f.d, f.n, 6.0)


def size_bound_from_kappa(kappa, d: int, n: int, log2_const: float):
    """(2^c d n kappa)^-n, elementwise for arrays."""
    return (2.0 ** log2_const * d * n * np.asarray(kappa, dtype=float)) ** (-n) + 0.0


def instance_bound_interval(n: int, d: int, a, moment: float) -> float:
    """d^n max(1, a^n) 2^(n log n + 9n/2) E[kappa^n]."""
    a = float(a)
    return d ** n * max(1.0, a ** n) * 2.0 ** (n * math.log2(n) + 4.5 * n) * moment


def instance_bound_effective(n: int, d: int, a, moment: float) -> float:
    """d^n a^n 2^(n log n + 8n) E[kappa^n], the effective-level box bound."""
    a = float(a)
    return d ** n * a ** n * 2.0 ** (n * math.log2(n) + 8 * n) * moment


def bgt_bound_report(n: int, d: int, a, moment: float) -> float:
    """d^(2n) max(1, a^n) 2^(3n^2 + 2n) E[kappa^n], the BGT-variant box bound."""
    if d <= 1:
        raise ValueError("the BGT bound needs d > 1")
    a = float(a)
    return d ** (2 * n) * max(1.0, a ** n) * 2.0 ** (3 * n * n + 2 * n) * moment
