"""Software floating point with m significant bits and the audited kernels.

A :class:`RoundedFloat` is ``mant * 2**exp`` where ``|mant|`` has exactly
``prec`` bits (or is zero).  Every operation is carried out exactly on
integers and then rounded to nearest, ties to even, so ``r(x) = x (1 + delta)``
with ``|delta| <= 2**-prec``.  The round-off unit used for error budgets is
the more conservative ``u = 2**-(m - 1)``.

The kernels below (inner product, norm, monomial powers, Weyl norm, and the
normalized evaluators) return both a value and the theta-budget the error
analysis grants them, so tests can audit measured error against the bound.

For m <= 25 a vectorized float64 twin of the evaluator kernels is provided.
Rounding a float64 result to m bits is then the same as rounding the exact
result (double rounding is harmless when 53 >= 2m + 2), so it returns the
same bits as the scalar code, only faster.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .poly import AffinePoly, PolynomialError, multinomial

log = logging.getLogger(__name__)

VECTOR_MAX_PREC = 25


class PrecisionError(ValueError):
    """Precision too low for the requested kernel's error analysis."""


# ---------------------------------------------------------------------------
# rounding core


def _round_mag(n: int, e: int, m: int, inexact: bool = False) -> tuple[int, int]:
    """Round the magnitude n * 2**e to m bits.

    With ``inexact`` the true value lies strictly between n and n + 1 units
    of 2**e; callers then supply at least m + 2 bits so the tie test is sound.
    """
    if n == 0:
        return 0, 0
    shift = n.bit_length() - m
    if shift <= 0:
        return n << -shift, e + shift
    q = n >> shift
    r = n & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    if r > half or (r == half and (inexact or q & 1)):
        q += 1
        if q >> m:
            q >>= 1
            shift += 1
    return q, e + shift


def _round_signed(n: int, e: int, m: int, inexact: bool = False) -> tuple[int, int]:
    q, ee = _round_mag(abs(n), e, m, inexact)
    return (-q if n < 0 else q), ee


def _round_ratio(p: int, q: int, e: int, m: int) -> tuple[int, int]:
    """Round (p / q) * 2**e to m bits, q > 0."""
    if p == 0:
        return 0, 0
    a = abs(p)
    k = max(0, m + 2 - (a.bit_length() - q.bit_length()) + 1)
    quo, rem = divmod(a << k, q)
    mant, ee = _round_mag(quo, e - k, m, rem != 0)
    return (-mant if p < 0 else mant), ee


class RoundedFloat:
    """Immutable m-bit binary floating-point number."""

    __slots__ = ("mant", "exp", "prec")

    def __init__(self, mant: int, exp: int, prec: int):
        if prec < 2:
            raise PrecisionError("precision must be at least 2 bits")
        if mant and abs(mant).bit_length() != prec:
            mant, exp = _round_signed(mant, exp, prec)
        if mant == 0:
            exp = 0
        object.__setattr__(self, "mant", mant)
        object.__setattr__(self, "exp", exp)
        object.__setattr__(self, "prec", prec)

    def __setattr__(self, name, value):
        raise AttributeError("RoundedFloat is immutable")

    def __reduce__(self):
        return (RoundedFloat, (self.mant, self.exp, self.prec))

    # -- construction ---------------------------------------------------------

    @classmethod
    def zero(cls, m: int) -> "RoundedFloat":
        return cls(0, 0, m)

    @classmethod
    def from_value(cls, x, m: int) -> "RoundedFloat":
        """round(x, m) for an int, Fraction, float or RoundedFloat."""
        if isinstance(x, RoundedFloat):
            return cls(*_round_signed(x.mant, x.exp, m), m)
        if isinstance(x, float):
            if not math.isfinite(x):
                raise ValueError("non-finite values are not supported")
            x = Fraction(x)
        if isinstance(x, int):
            return cls(*_round_signed(x, 0, m), m)
        x = Fraction(x)
        return cls(*_round_ratio(x.numerator, x.denominator, 0, m), m)

    # -- conversion -----------------------------------------------------------

    def to_fraction(self) -> Fraction:
        if self.exp >= 0:
            return Fraction(self.mant << self.exp)
        return Fraction(self.mant, 1 << -self.exp)

    def __float__(self) -> float:
        return math.ldexp(float(self.mant), self.exp) if self.mant else 0.0

    def __repr__(self):
        return f"RoundedFloat({float(self)!r}, m={self.prec})"

    @property
    def unit(self) -> Fraction:
        """Round-off unit u = 2**-(m-1)."""
        return Fraction(1, 1 << (self.prec - 1))

    def is_zero(self) -> bool:
        return self.mant == 0

    # -- arithmetic -------------------------------------------------------------

    def _coerce(self, other) -> "RoundedFloat":
        if isinstance(other, RoundedFloat):
            if other.prec != self.prec:
                raise PrecisionError(f"precision mismatch {self.prec} vs {other.prec}")
            return other
        return RoundedFloat.from_value(other, self.prec)

    def __neg__(self):
        return RoundedFloat(-self.mant, self.exp, self.prec)

    def __abs__(self):
        return RoundedFloat(abs(self.mant), self.exp, self.prec)

    def __add__(self, other):
        o = self._coerce(other)
        if not o.mant:
            return self
        if not self.mant:
            return o
        if self.exp >= o.exp:
            n = (self.mant << (self.exp - o.exp)) + o.mant
            e = o.exp
        else:
            n = self.mant + (o.mant << (o.exp - self.exp))
            e = self.exp
        return RoundedFloat(*_round_signed(n, e, self.prec), self.prec)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return RoundedFloat(*_round_signed(self.mant * o.mant, self.exp + o.exp, self.prec), self.prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if not o.mant:
            raise ZeroDivisionError("RoundedFloat division by zero")
        p, q = self.mant, o.mant
        if q < 0:
            p, q = -p, -q
        return RoundedFloat(*_round_ratio(p, q, self.exp - o.exp, self.prec), self.prec)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def sqrt(self) -> "RoundedFloat":
        if self.mant < 0:
            raise ValueError("square root of a negative number")
        if not self.mant:
            return self
        m = self.prec
        n, e = self.mant, self.exp
        k = max(0, 2 * (m + 2) - n.bit_length() + 2)
        if (e - k) % 2:
            k += 1
        big = n << k
        r = math.isqrt(big)
        return RoundedFloat(*_round_mag(r, (e - k) // 2, m, r * r != big), m)

    # -- comparisons (exact) ------------------------------------------------------

    def _cmp_key(self, other):
        if isinstance(other, RoundedFloat):
            return self.to_fraction(), other.to_fraction()
        return self.to_fraction(), Fraction(other)

    def __eq__(self, other):
        if not isinstance(other, (RoundedFloat, int, float, Fraction)):
            return NotImplemented
        a, b = self._cmp_key(other)
        return a == b

    def __hash__(self):
        return hash(self.to_fraction())

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b


def round_to(x, m: int) -> RoundedFloat:
    """r_m(x): round to nearest with m significant bits, ties to even."""
    return RoundedFloat.from_value(x, m)


def rounded_op(op: str, x: RoundedFloat, y: RoundedFloat | None = None) -> RoundedFloat:
    """Apply one of + - * / sqrt with a single final rounding."""
    if op == "sqrt":
        return x.sqrt()
    if y is None:
        raise ValueError(f"operator {op!r} needs two operands")
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "/":
        return x / y
    raise ValueError(f"unknown operator {op!r}")


def unit_roundoff(m: int) -> Fraction:
    return Fraction(1, 1 << (m - 1))


# ---------------------------------------------------------------------------
# theta budgets


@dataclass(frozen=True)
class ThetaBudget:
    """Error symbol theta_k: some delta with |delta| <= k u / (1 - k u)."""

    k: float
    u: Fraction

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("theta index must be non-negative")

    @classmethod
    def for_precision(cls, k: float, m: int) -> "ThetaBudget":
        return cls(k, unit_roundoff(m))

    @property
    def ku(self) -> float:
        return self.k * float(self.u)

    def valid(self) -> bool:
        return self.ku < 0.5

    def bound(self) -> float:
        """k u / (1 - k u); +inf once k u reaches 1."""
        ku = self.ku
        if ku >= 1:
            return math.inf
        return ku / (1 - ku)

    def __add__(self, other: "ThetaBudget") -> "ThetaBudget":
        # (1 + theta_s)(1 + theta_s') = 1 + theta_{s + s'}
        if self.u != other.u:
            raise ValueError("budgets at different precisions")
        return ThetaBudget(self.k + other.k, self.u)

    def inverse(self) -> "ThetaBudget":
        # (1 + theta_s)^-1 = 1 + theta_{2s}
        return ThetaBudget(2 * self.k, self.u)


def clog2(k: int) -> int:
    """ceil(log2 k), with clog2(1) = 0."""
    return max(0, (k - 1).bit_length())


# ---------------------------------------------------------------------------
# kernels


def _check_prec(values: Sequence[RoundedFloat]) -> int:
    if not values:
        raise ValueError("empty vector")
    m = values[0].prec
    for v in values:
        if v.prec != m:
            raise PrecisionError("mixed precisions in one kernel")
    return m


def _tree_sum(terms: list[RoundedFloat]) -> RoundedFloat:
    if len(terms) == 1:
        return terms[0]
    mid = len(terms) // 2
    return _tree_sum(terms[:mid]) + _tree_sum(terms[mid:])


def balanced_inner_product(x: Sequence[RoundedFloat], y: Sequence[RoundedFloat]) -> tuple[RoundedFloat, ThetaBudget]:
    """<x, y> by rounded products and a balanced summation tree.

    Absolute error at most <|x|, |y|> theta_{log L + 2} for length L.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch {len(x)} vs {len(y)}")
    m = _check_prec(list(x) + list(y))
    s = _tree_sum([a * b for a, b in zip(x, y)])
    budget = ThetaBudget.for_precision(clog2(len(x)) + 2, m)
    log.debug("inner_product len=%d m=%d theta=%s", len(x), m, budget.k)
    return s, budget


def rounded_norm(x: Sequence[RoundedFloat]) -> tuple[RoundedFloat, ThetaBudget]:
    """sqrt of the balanced sum of squares; relative error theta_{log L + 3}."""
    m = _check_prec(list(x))
    s = _tree_sum([a * a for a in x])
    return s.sqrt(), ThetaBudget.for_precision(clog2(len(x)) + 3, m)


def _rounded_ipow(x: RoundedFloat, e: int, table: dict | None = None) -> RoundedFloat:
    """x**e by binary exponentiation (squarings cached in ``table``)."""
    if e == 0:
        return RoundedFloat.from_value(1, x.prec)
    if e == 1:
        return x
    if table is not None and e in table:
        return table[e]
    half = _rounded_ipow(x, e // 2, table)
    r = half * half
    if e % 2:
        r = r * x
    if table is not None:
        table[e] = r
    return r


def rounded_power(x: Sequence[RoundedFloat], alpha: Sequence[int], tables: list | None = None) -> tuple[RoundedFloat, ThetaBudget]:
    """x**alpha; exact for |alpha| <= 1, else relative error theta_{|alpha| - 1}."""
    if len(x) != len(alpha):
        raise ValueError("dimension mismatch")
    m = _check_prec(list(x))
    deg = sum(alpha)
    r = None
    for i, (xi, a) in enumerate(zip(x, alpha)):
        if a == 0:
            continue
        p = _rounded_ipow(xi, a, None if tables is None else tables[i])
        r = p if r is None else r * p
    if r is None:
        r = RoundedFloat.from_value(1, m)
    return r, ThetaBudget.for_precision(max(0, deg - 1), m)


@lru_cache(maxsize=None)
def _weyl_scales(n: int, d: int, m: int) -> tuple[RoundedFloat, ...]:
    """Rounded sqrt of each multinomial weight (the divisor in the Weyl norm)."""
    from .poly import affine_monomials

    out = []
    for a in affine_monomials(n, d):
        w = RoundedFloat.from_value(multinomial(d, (d - sum(a),) + a), m)
        out.append(w.sqrt())
    return tuple(out)


def rounded_weyl_norm(f: AffinePoly, m: int, coeffs: Sequence[RoundedFloat] | None = None) -> tuple[RoundedFloat, ThetaBudget]:
    """Weyl norm at precision m: each coefficient divided by a rounded
    sqrt(multinomial), then :func:`rounded_norm`.

    Budget theta_{log N + 8}; theta_{log N + 9} when the coefficients have to
    be rounded from exact values first (``coeffs`` not given and f not
    representable).
    """
    if m < 2:
        raise PrecisionError("precision must be at least 2 bits")
    rounded_in = coeffs is None
    if coeffs is None:
        coeffs = [RoundedFloat.from_value(c, m) for c in f.coeffs]
    scaled = [c / s for c, s in zip(coeffs, _weyl_scales(f.n, f.d, m))]
    v, _ = rounded_norm(scaled)
    N = len(scaled)
    extra = 9 if rounded_in and any(RoundedFloat.from_value(c, m).to_fraction() != c for c in f.coeffs) else 8
    return v, ThetaBudget.for_precision(clog2(N) + extra, m)


# -- normalized evaluators -------------------------------------------------------


def evaluator_unit_ok(d: int, n: int, m: int) -> bool:
    """u <= 1 / (64 d log2(n + 1)), the precondition of the evaluator bounds."""
    return 2.0 ** -(m - 1) * 64 * d * math.log2(n + 1) <= 1.0


def _require_unit(d: int, n: int, m: int):
    if not evaluator_unit_ok(d, n, m):
        raise PrecisionError(f"m={m} too small for d={d}, n={n}: need u <= 1/(64 d log2(n+1))")


class FixedPrecisionPoly:
    """Coefficients of f and of its partials rounded to m bits, plus fl(|f|)."""

    def __init__(self, f: AffinePoly, m: int):
        self.f = f
        self.m = m
        self.monos = f.monomials
        self.coeffs = [RoundedFloat.from_value(c, m) for c in f.coeffs]
        self.partials = []
        for i in range(f.n):
            terms = []
            for a, c in f.items():
                if a[i]:
                    beta = a[:i] + (a[i] - 1,) + a[i + 1:]
                    terms.append((beta, RoundedFloat.from_value(a[i] * c, m)))
            self.partials.append(terms)
        self.norm, self.norm_budget = rounded_weyl_norm(f, m, None)

    @classmethod
    def get(cls, f: AffinePoly, m: int) -> "FixedPrecisionPoly":
        cache = f.__dict__.setdefault("_pv_fixed_prec", {})
        if m not in cache:
            cache[m] = cls(f, m)
        return cache[m]


def _rounded_point(x, m):
    return [v if isinstance(v, RoundedFloat) else RoundedFloat.from_value(v, m) for v in x]


def _pow_tables(x):
    return [dict() for _ in x]


def _eval_rounded(terms, x, tables):
    if not terms:
        return RoundedFloat.zero(x[0].prec if x else 2)
    monos = [rounded_power(x, a, tables)[0] for a, _ in terms]
    val, _ = balanced_inner_product([c for _, c in terms], monos)
    return val


def _chart_norm_power(x, e: int, m: int) -> RoundedFloat:
    """||(1, x)||**e with ||(1, x)|| from rounded_norm, e >= 0."""
    nrm, _ = rounded_norm([RoundedFloat.from_value(1, m)] + list(x))
    return _rounded_ipow(nrm, e, {}), nrm


def evaluator_bound(d: int, n: int, m: int, a=1, xnorm: float | None = None) -> float:
    """Absolute error envelope used in the evaluator audits.

    Two envelopes are in play: 64 sqrt(2) d sqrt(n+1) log2(n+1) max(1, a) u
    and sqrt(1 + |x|) theta_{32 d log2(n+1)}.  The looser one is returned.
    """
    u = 2.0 ** -(m - 1)
    lg = math.log2(n + 1)
    first = 64 * math.sqrt(2) * d * math.sqrt(n + 1) * lg * max(1.0, float(a)) * u
    if xnorm is None:
        xnorm = math.sqrt(n) * float(a)
    second = math.sqrt(1 + xnorm) * ThetaBudget(32 * d * lg, Fraction(1, 1 << (m - 1))).bound()
    return max(first, second)


def fl_fhat(f: AffinePoly, x: Sequence, m: int, *, check: bool = True) -> RoundedFloat:
    """|fhat(x)| computed with m-bit arithmetic.

    Numerator <(f_alpha), (x^alpha)> by a balanced inner product over rounded
    powers; denominator fl(|f|) * ||(1, x)||^(d-1); one rounded division.
    """
    if f.is_zero():
        raise PolynomialError("zero polynomial")
    if len(x) != f.n:
        raise PolynomialError("dimension mismatch")
    if check:
        _require_unit(f.d, f.n, m)
    fp = FixedPrecisionPoly.get(f, m)
    xr = _rounded_point(x, m)
    tables = _pow_tables(xr)
    num = abs(_eval_rounded(list(zip(fp.monos, fp.coeffs)), xr, tables))
    chart, _ = _chart_norm_power(xr, f.d - 1, m)
    den = fp.norm * chart
    out = num / den
    log.debug("fl_fhat m=%d x=%s -> %r", m, [float(v) for v in xr], out)
    return out


def fl_dfhat_norm(f: AffinePoly, x: Sequence, m: int, *, check: bool = True) -> RoundedFloat:
    """|dfhat(x)| computed with m-bit arithmetic.

    Each partial as in :func:`fl_fhat`, combined with :func:`rounded_norm`,
    divided by d * fl(|f|) * ||(1, x)||^(d-2) (multiplied by ||(1, x)|| when
    d = 1).
    """
    if f.is_zero():
        raise PolynomialError("zero polynomial")
    if len(x) != f.n:
        raise PolynomialError("dimension mismatch")
    if check:
        _require_unit(f.d, f.n, m)
    fp = FixedPrecisionPoly.get(f, m)
    xr = _rounded_point(x, m)
    tables = _pow_tables(xr)
    parts = [_eval_rounded(t, xr, tables) for t in fp.partials]
    gnorm, _ = rounded_norm(parts)
    d = f.d
    dm = RoundedFloat.from_value(d, m)
    if d >= 2:
        chart, _ = _chart_norm_power(xr, d - 2, m)
        out = gnorm / (dm * fp.norm * chart)
    else:
        _, nrm = _chart_norm_power(xr, 0, m)
        out = (gnorm * nrm) / (dm * fp.norm)
    log.debug("fl_dfhat_norm m=%d x=%s -> %r", m, [float(v) for v in xr], out)
    return out


# ---------------------------------------------------------------------------
# vectorized twin (m <= VECTOR_MAX_PREC)


def round_array(x: np.ndarray, m: int) -> np.ndarray:
    """Round float64 values to m significant bits, ties to even."""
    mant, e = np.frexp(x)
    return np.ldexp(np.rint(np.ldexp(mant, m)), e - m)


class _VecPoly:
    """Float64 copies of a :class:`FixedPrecisionPoly` (values are m-bit)."""

    def __init__(self, fp: FixedPrecisionPoly):
        self.m = fp.m
        self.E = np.array(fp.monos, dtype=np.int64).reshape(-1, fp.f.n)
        self.c = np.array([float(c) for c in fp.coeffs])
        self.parts = []
        for terms in fp.partials:
            if terms:
                E = np.array([a for a, _ in terms], dtype=np.int64)
                c = np.array([float(v) for _, v in terms])
            else:
                E = np.zeros((0, fp.f.n), dtype=np.int64)
                c = np.zeros(0)
            self.parts.append((E, c))
        self.norm = float(fp.norm)

    @classmethod
    def get(cls, f: AffinePoly, m: int) -> "_VecPoly":
        cache = f.__dict__.setdefault("_pv_vec_prec", {})
        if m not in cache:
            cache[m] = cls(FixedPrecisionPoly.get(f, m))
        return cache[m]


def _vec_ipow(x: np.ndarray, e: int, m: int, table: dict) -> np.ndarray:
    if e == 0:
        return np.ones_like(x)
    if e == 1:
        return x
    if e in table:
        return table[e]
    half = _vec_ipow(x, e // 2, m, table)
    r = round_array(half * half, m)
    if e % 2:
        r = round_array(r * x, m)
    table[e] = r
    return r


def _vec_tree_sum(cols: list, m: int) -> np.ndarray:
    if len(cols) == 1:
        return cols[0]
    mid = len(cols) // 2
    return round_array(_vec_tree_sum(cols[:mid], m) + _vec_tree_sum(cols[mid:], m), m)


def _vec_eval(E, c, X, m, tables):
    k, n = X.shape
    if len(c) == 0:
        return np.zeros(k)
    prods = []
    for alpha, ca in zip(E, c):
        r = None
        for i in range(n):
            a = int(alpha[i])
            if a == 0:
                continue
            p = _vec_ipow(X[:, i], a, m, tables[i])
            r = p if r is None else round_array(r * p, m)
        if r is None:
            r = np.ones(k)
        prods.append(round_array(ca * r, m))
    return _vec_tree_sum(prods, m)


def _vec_chart_norm(X, m):
    cols = [np.ones(X.shape[0])] + [round_array(X[:, i] * X[:, i], m) for i in range(X.shape[1])]
    return round_array(np.sqrt(_vec_tree_sum(cols, m)), m)


def fl_evaluators_batch(f: AffinePoly, X: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(fl |fhat|, fl |dfhat|) at rows of X, whose entries must be m-bit.

    Bit-identical to :func:`fl_fhat` / :func:`fl_dfhat_norm`.
    """
    if m > VECTOR_MAX_PREC:
        raise PrecisionError(f"vectorized kernels need m <= {VECTOR_MAX_PREC}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vp = _VecPoly.get(f, m)
    d = f.d
    tables = [dict() for _ in range(X.shape[1])]
    num = np.abs(_vec_eval(vp.E, vp.c, X, m, tables))
    nrm = _vec_chart_norm(X, m)
    ptab = {}
    den = round_array(vp.norm * _vec_ipow(nrm, d - 1, m, ptab), m)
    fh = round_array(num / den, m)
    parts = [_vec_eval(E, c, X, m, tables) for E, c in vp.parts]
    g = round_array(np.sqrt(_vec_tree_sum([round_array(p * p, m) for p in parts], m)), m)
    dm = float(RoundedFloat.from_value(d, m))
    if d >= 2:
        den = round_array(round_array(dm * vp.norm, m) * _vec_ipow(nrm, d - 2, m, {}), m)
        gh = round_array(g / den, m)
    else:
        gh = round_array(round_array(g * nrm, m) / round_array(dm * vp.norm, m), m)
    return fh, gh
