"""Dense multivariate polynomials, Weyl geometry and the normalized evaluators.

Affine polynomials live in P_{n,d} (all monomials of degree <= d in n
variables); homogeneous ones in H_{n,d} (n + 1 variables, exact degree d,
variable 0 being the homogenizing one).  Coefficients are stored exactly as
:class:`fractions.Fraction`, densely, in graded-lexicographic order.

Exact inputs (ints / Fractions) give exact results; floats and numpy arrays
take a floating path.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


class PolynomialError(ValueError):
    """Malformed polynomial data or an operation undefined for the input."""


# ---------------------------------------------------------------------------
# multi-indices


def multinomial(d: int, alpha: Sequence[int]) -> int:
    """Exact multinomial coefficient d! / (alpha_0! ... alpha_n!)."""
    if any(a < 0 for a in alpha) or sum(alpha) != d:
        raise PolynomialError(f"multi-index {tuple(alpha)} does not sum to {d}")
    out = 1
    rest = d
    for a in alpha:
        out *= math.comb(rest, a)
        rest -= a
    return out


def _compositions(total: int, parts: int) -> list[MultiIndex]:
    """All exponent tuples of given length summing to ``total``, lex-descending."""
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for tail in _compositions(total - first, parts - 1):
            out.append((first,) + tail)
    return out


@lru_cache(maxsize=None)
def affine_monomials(n: int, d: int) -> tuple[MultiIndex, ...]:
    """Exponents of P_{n,d} in graded-lex order (degree ascending)."""
    out: list[MultiIndex] = []
    for k in range(d + 1):
        out.extend(_compositions(k, n))
    return tuple(out)


@lru_cache(maxsize=None)
def homogeneous_monomials(nvars: int, d: int) -> tuple[MultiIndex, ...]:
    return tuple(_compositions(d, nvars))


@lru_cache(maxsize=None)
def _affine_position(n: int, d: int) -> dict[MultiIndex, int]:
    return {a: i for i, a in enumerate(affine_monomials(n, d))}


@lru_cache(maxsize=None)
def weyl_weights(n: int, d: int) -> tuple[int, ...]:
    """Multinomial weight of each affine monomial, taken on its homogenization."""
    return tuple(multinomial(d, (d - sum(a),) + a) for a in affine_monomials(n, d))


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, (float, np.floating)):
        if not math.isfinite(c):
            raise PolynomialError(f"non-finite coefficient {c!r}")
        return Fraction(float(c))
    if isinstance(c, str):
        try:
            return Fraction(c.strip())
        except ValueError as exc:
            raise PolynomialError(f"cannot parse coefficient {c!r}") from exc
    raise PolynomialError(f"unsupported coefficient type {type(c).__name__}")


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


# ---------------------------------------------------------------------------
# polynomial types


class AffinePoly:
    """Polynomial in P_{n,d}: n variables, degree bound d, exact coefficients.

    Values are immutable; ``coeffs`` is a tuple aligned with
    ``affine_monomials(n, d)``.
    """

    __slots__ = ("n", "d", "coeffs", "_hash", "__dict__")

    def __init__(self, n: int, d: int, coeffs: Mapping[Sequence[int], object] | Sequence[object]):
        if n < 1:
            raise PolynomialError("need at least one variable")
        if d < 1:
            raise PolynomialError("degree bound must be >= 1")
        monos = affine_monomials(n, d)
        if isinstance(coeffs, Mapping):
            pos = _affine_position(n, d)
            dense = [Fraction(0)] * len(monos)
            for alpha, c in coeffs.items():
                alpha = tuple(int(a) for a in alpha)
                if len(alpha) != n or any(a < 0 for a in alpha):
                    raise PolynomialError(f"bad multi-index {alpha} for n={n}")
                if alpha not in pos:
                    raise PolynomialError(f"monomial {alpha} exceeds degree {d}")
                dense[pos[alpha]] += _to_fraction(c)
        else:
            if len(coeffs) != len(monos):
                raise PolynomialError(f"expected {len(monos)} coefficients, got {len(coeffs)}")
            dense = [_to_fraction(c) for c in coeffs]
        self.n = n
        self.d = d
        self.coeffs = tuple(dense)
        self._hash = hash((n, d, self.coeffs))

    # -- basic protocol -----------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, AffinePoly):
            return NotImplemented
        return (self.n, self.d, self.coeffs) == (other.n, other.d, other.coeffs)

    def __hash__(self):
        return self._hash

    def __reduce__(self):
        return (AffinePoly, (self.n, self.d, self.coeffs))

    def __setattr__(self, name, value):
        if hasattr(self, "_hash"):
            raise AttributeError("AffinePoly is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self):
        terms = [f"{c}*x^{a}" for a, c in self.items() if c]
        return f"AffinePoly(n={self.n}, d={self.d}, {' + '.join(terms) or '0'})"

    @property
    def monomials(self) -> tuple[MultiIndex, ...]:
        return affine_monomials(self.n, self.d)

    def items(self):
        return zip(self.monomials, self.coeffs)

    def coeff(self, alpha: Sequence[int]) -> Fraction:
        return self.coeffs[_affine_position(self.n, self.d)[tuple(alpha)]]

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __add__(self, other: "AffinePoly") -> "AffinePoly":
        if (self.n, self.d) != (other.n, other.d):
            raise PolynomialError("shape mismatch")
        return AffinePoly(self.n, self.d, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "AffinePoly") -> "AffinePoly":
        return self + other.scale(-1)

    def scale(self, t) -> "AffinePoly":
        t = _to_fraction(t)
        return AffinePoly(self.n, self.d, [t * c for c in self.coeffs])

    def rescale_domain(self, s) -> "AffinePoly":
        """Return x -> f(s * x)."""
        s = _to_fraction(s)
        return AffinePoly(self.n, self.d, [c * s ** sum(a) for a, c in self.items()])

    # -- Weyl geometry --------------------------------------------------------

    @cached_property
    def weyl_norm_sq(self) -> Fraction:
        """Exact squared Weyl norm of the homogenization."""
        return sum((c * c / w for c, w in zip(self.coeffs, weyl_weights(self.n, self.d))), Fraction(0))

    @cached_property
    def weyl_norm(self) -> float:
        return math.sqrt(self.weyl_norm_sq)

    # -- evaluation -------------------------------------------------------------

    def _check_point(self, x):
        if len(x) != self.n:
            raise PolynomialError(f"point has dimension {len(x)}, polynomial has {self.n} variables")

    def __call__(self, x):
        return evaluate(self, x)

    @cached_property
    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])

    @cached_property
    def exponent_matrix(self) -> np.ndarray:
        return np.array(self.monomials, dtype=np.int64).reshape(-1, self.n)

    @cached_property
    def integer_form(self) -> "IntegerForm":
        return IntegerForm(self)


class HomoPoly:
    """Homogeneous polynomial in H_{n,d}: ``nvars`` = n + 1 variables, exact degree d."""

    __slots__ = ("nvars", "d", "coeffs", "_hash")

    def __init__(self, nvars: int, d: int, coeffs: Mapping[Sequence[int], object] | Sequence[object]):
        if nvars < 1 or d < 0:
            raise PolynomialError("bad shape")
        monos = homogeneous_monomials(nvars, d)
        if isinstance(coeffs, Mapping):
            pos = {a: i for i, a in enumerate(monos)}
            dense = [Fraction(0)] * len(monos)
            for alpha, c in coeffs.items():
                alpha = tuple(int(a) for a in alpha)
                if alpha not in pos:
                    raise PolynomialError(f"monomial {alpha} is not of degree {d} in {nvars} variables")
                dense[pos[alpha]] += _to_fraction(c)
        else:
            if len(coeffs) != len(monos):
                raise PolynomialError(f"expected {len(monos)} coefficients")
            dense = [_to_fraction(c) for c in coeffs]
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "coeffs", tuple(dense))
        object.__setattr__(self, "_hash", hash((nvars, d, self.coeffs)))

    def __setattr__(self, name, value):
        raise AttributeError("HomoPoly is immutable")

    def __eq__(self, other):
        if not isinstance(other, HomoPoly):
            return NotImplemented
        return (self.nvars, self.d, self.coeffs) == (other.nvars, other.d, other.coeffs)

    def __hash__(self):
        return self._hash

    def __reduce__(self):
        return (HomoPoly, (self.nvars, self.d, self.coeffs))

    def __repr__(self):
        terms = [f"{c}*X^{a}" for a, c in self.items() if c]
        return f"HomoPoly(nvars={self.nvars}, d={self.d}, {' + '.join(terms) or '0'})"

    @property
    def monomials(self) -> tuple[MultiIndex, ...]:
        return homogeneous_monomials(self.nvars, self.d)

    def items(self):
        return zip(self.monomials, self.coeffs)

    def coeff(self, alpha: Sequence[int]) -> Fraction:
        return dict(self.items()).get(tuple(alpha), Fraction(0))

    @property
    def weyl_norm_sq(self) -> Fraction:
        return sum((c * c / multinomial(self.d, a) for a, c in self.items()), Fraction(0))

    def __call__(self, y):
        return evaluate(self, y)


def homogenize(f: AffinePoly) -> HomoPoly:
    """X^alpha -> X_0^{d-|alpha|} X^alpha."""
    d = f.d
    return HomoPoly(f.n + 1, d, {(d - sum(a),) + a: c for a, c in f.items()})


def dehomogenize(F: HomoPoly) -> AffinePoly:
    """Set X_0 = 1."""
    if F.nvars < 2:
        raise PolynomialError("need at least two homogeneous variables")
    return AffinePoly(F.nvars - 1, F.d, {a[1:]: c for a, c in F.items()})


def weyl_inner(f: AffinePoly | HomoPoly, g: AffinePoly | HomoPoly) -> Fraction:
    if isinstance(f, AffinePoly):
        f = homogenize(f)
    if isinstance(g, AffinePoly):
        g = homogenize(g)
    if (f.nvars, f.d) != (g.nvars, g.d):
        raise PolynomialError("shape mismatch")
    return sum((a * b / multinomial(f.d, al) for (al, a), b in zip(f.items(), g.coeffs)), Fraction(0))


def weyl_norm_squared(f: AffinePoly | HomoPoly) -> Fraction:
    return f.weyl_norm_sq


def weyl_norm(f: AffinePoly | HomoPoly) -> float:
    return math.sqrt(f.weyl_norm_sq)


# ---------------------------------------------------------------------------
# evaluation


def _power_table(x, d):
    tab = []
    for xi in x:
        row = [1]
        for _ in range(d):
            row.append(row[-1] * xi)
        tab.append(row)
    return tab


def _eval_dense(monos, coeffs, x, d):
    tab = _power_table(x, d)
    total = 0
    for alpha, c in zip(monos, coeffs):
        if not c:
            continue
        term = c
        for i, a in enumerate(alpha):
            if a:
                term = term * tab[i][a]
        total = total + term
    return total


def _prepare(x):
    """Exact points stay exact; anything else goes to float."""
    x = list(x)
    if all(_is_exact(v) for v in x):
        return [Fraction(v) for v in x], True
    return [float(v) for v in x], False


def evaluate(f: AffinePoly | HomoPoly, x):
    """f(x); exact for rational x, float otherwise."""
    nv = f.n if isinstance(f, AffinePoly) else f.nvars
    if len(x) != nv:
        raise PolynomialError(f"point has dimension {len(x)}, expected {nv}")
    pts, exact = _prepare(x)
    coeffs = f.coeffs if exact else [float(c) for c in f.coeffs]
    val = _eval_dense(f.monomials, coeffs, pts, f.d)
    return Fraction(val) if exact else float(val)


def _partial_terms(monos, coeffs, i):
    """Coefficients of d/dX_i as (exponent, coeff) pairs."""
    out = []
    for alpha, c in zip(monos, coeffs):
        if alpha[i] and c:
            beta = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1:]
            out.append((beta, alpha[i] * c))
    return out


def gradient(f: AffinePoly | HomoPoly, x) -> list:
    """Gradient of f at x (length n for affine, n + 1 for homogeneous)."""
    nv = f.n if isinstance(f, AffinePoly) else f.nvars
    if len(x) != nv:
        raise PolynomialError(f"point has dimension {len(x)}, expected {nv}")
    pts, exact = _prepare(x)
    coeffs = f.coeffs if exact else [float(c) for c in f.coeffs]
    out = []
    for i in range(nv):
        terms = _partial_terms(f.monomials, coeffs, i)
        if not terms:
            out.append(Fraction(0) if exact else 0.0)
            continue
        monos, cs = zip(*terms)
        v = _eval_dense(monos, cs, pts, f.d)
        out.append(Fraction(v) if exact else float(v))
    return out


def homogeneous_gradient_at_chart(f: AffinePoly, x) -> list:
    """Gradient of f^h at (1, x) without building f^h.

    Component 0 is sum (d - |alpha|) c_alpha x^alpha; the rest is the affine
    gradient.
    """
    pts, exact = _prepare(x)
    coeffs = f.coeffs if exact else [float(c) for c in f.coeffs]
    d = f.d
    c0 = [(d - sum(a)) * c for a, c in zip(f.monomials, coeffs)]
    g0 = _eval_dense(f.monomials, c0, pts, d)
    return [Fraction(g0) if exact else float(g0)] + gradient(f, x)


def io_project(x) -> np.ndarray:
    """Central projection x -> (1, x) / sqrt(1 + |x|^2) onto the upper sphere."""
    x = np.asarray(x, dtype=float)
    v = np.concatenate(([1.0], x))
    return v / math.sqrt(1.0 + float(x @ x))


def _sq_norm_plus_one(pts):
    return 1 + sum(v * v for v in pts)


def _require_nonzero(f: AffinePoly):
    if f.is_zero():
        raise PolynomialError("zero polynomial has no normalized evaluator")


def fhat_squared(f: AffinePoly, x) -> Fraction:
    """Exact f_hat(x)^2 = f(x)^2 / (|f|^2 (1+|x|^2)^(d-1)) for rational x."""
    _require_nonzero(f)
    pts = [Fraction(v) for v in x]
    v = evaluate(f, pts)
    return v * v / (f.weyl_norm_sq * _sq_norm_plus_one(pts) ** (f.d - 1))


def dfhat_norm_squared(f: AffinePoly, x) -> Fraction:
    """Exact |dfhat(x)|^2 = |df(x)|^2 / (d^2 |f|^2 (1+|x|^2)^(d-2)) for rational x."""
    _require_nonzero(f)
    pts = [Fraction(v) for v in x]
    g = gradient(f, pts)
    return sum(c * c for c in g) / (f.d ** 2 * f.weyl_norm_sq * _sq_norm_plus_one(pts) ** (f.d - 2))


def eval_fhat(f: AffinePoly, x) -> float:
    """f(x) / (|f| (1+|x|^2)^((d-1)/2))."""
    _require_nonzero(f)
    f._check_point(x)
    pts, exact = _prepare(x)
    if exact:
        v = evaluate(f, pts)
        return math.copysign(math.sqrt(fhat_squared(f, pts)), v) if v else 0.0
    r2 = 1.0 + sum(v * v for v in pts)
    return evaluate(f, pts) / (f.weyl_norm * r2 ** ((f.d - 1) / 2))


def eval_dfhat(f: AffinePoly, x) -> np.ndarray:
    """df(x) / (d |f| (1+|x|^2)^(d/2 - 1))."""
    _require_nonzero(f)
    f._check_point(x)
    pts, _ = _prepare(x)
    g = gradient(f, pts)
    r2 = float(_sq_norm_plus_one(pts))
    scale = f.d * f.weyl_norm * r2 ** (f.d / 2 - 1)
    return np.array([float(c) for c in g]) / scale


# ---------------------------------------------------------------------------
# vectorized float evaluation, used by Monte-Carlo code


def eval_many(f: AffinePoly, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mons = _monomial_matrix(X, f.exponent_matrix, f.d)
    return mons @ f.float_coeffs


def _monomial_matrix(X, E, d):
    # powers[k, i, e] = X[k, i]**e
    powers = X[:, :, None] ** np.arange(d + 1)[None, None, :]
    k, n = X.shape
    out = np.ones((k, E.shape[0]))
    for i in range(n):
        out *= powers[:, i, E[:, i]]
    return out


def homogeneous_gradient_many(f: AffinePoly, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (f^h(1,x), grad f^h(1,x)) for every row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    E = f.exponent_matrix
    c = f.float_coeffs
    d = f.d
    mons = _monomial_matrix(X, E, d)
    val = mons @ c
    n = f.n
    grads = np.empty((X.shape[0], n + 1))
    grads[:, 0] = mons @ (c * (d - E.sum(axis=1)))
    # d/dx_i: alpha_i c_alpha x^(alpha - e_i)
    for i in range(n):
        Ei = E.copy()
        mask = Ei[:, i] > 0
        Ei[mask, i] -= 1
        ci = np.where(mask, c * E[:, i], 0.0)
        grads[:, i + 1] = _monomial_matrix(X, Ei, d) @ ci
    return val, grads


# ---------------------------------------------------------------------------
# integer form used by the exact certification path


class IntegerForm:
    """f scaled to integer coefficients, for fast exact evaluation of f^h.

    With D the common denominator, F_alpha = D * c_alpha are integers.  At a
    rational point m = M / L the homogenized values F^h(L, M) and its partials
    are integers and everything needed for exact certificate comparisons
    follows from them.
    """

    def __init__(self, f: AffinePoly):
        self.n = f.n
        self.d = f.d
        den = 1
        for c in f.coeffs:
            den = den * c.denominator // math.gcd(den, c.denominator)
        self.denominator = den
        d = f.d
        self.terms = [((d - sum(a),) + a, int(c * den)) for a, c in f.items() if c]
        self.partials = []
        for i in range(1, f.n + 1):
            part = []
            for alpha, c in self.terms:
                if alpha[i]:
                    beta = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1:]
                    part.append((beta, alpha[i] * c))
            self.partials.append(part)
        # D^2 |f|^2, exact
        self.scaled_norm_sq = f.weyl_norm_sq * den * den

    @staticmethod
    def _eval(terms, tab):
        total = 0
        for alpha, c in terms:
            t = c
            for i, a in enumerate(alpha):
                if a:
                    t *= tab[i][a]
            total += t
        return total

    def values(self, L: int, M: Sequence[int]) -> tuple[int, list[int]]:
        """F^h(L, M) and the affine partials of F^h at (L, M)."""
        tab = _power_table([L] + list(M), self.d)
        return self._eval(self.terms, tab), [self._eval(p, tab) for p in self.partials]


def rational_point(x: Sequence) -> tuple[int, list[int]]:
    """Write a rational point as M / L with a common integer denominator L."""
    fr = [Fraction(v) for v in x]
    L = 1
    for v in fr:
        L = L * v.denominator // math.gcd(L, v.denominator)
    return L, [v.numerator * (L // v.denominator) for v in fr]


# ---------------------------------------------------------------------------
# file format


def poly_to_dict(f: AffinePoly) -> dict:
    return {
        "n": f.n,
        "d": f.d,
        "terms": [{"alpha": list(a), "coeff": format_rational(c)} for a, c in f.items() if c],
    }


def poly_from_dict(data: Mapping) -> AffinePoly:
    try:
        n = int(data["n"])
        d = int(data["d"])
        terms = data["terms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise PolynomialError(f"polynomial record needs n, d and terms: {exc}") from exc
    coeffs: dict[MultiIndex, Fraction] = {}
    for t in terms:
        try:
            alpha = tuple(int(a) for a in t["alpha"])
            c = t["coeff"]
        except (KeyError, TypeError, ValueError) as exc:
            raise PolynomialError(f"bad term {t!r}") from exc
        coeffs[alpha] = coeffs.get(alpha, Fraction(0)) + _to_fraction(c)
    return AffinePoly(n, d, coeffs)


def dumps_poly(f: AffinePoly) -> str:
    return json.dumps(poly_to_dict(f), indent=1) + "\n"


def loads_poly(text: str) -> AffinePoly:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolynomialError(f"polynomial file is not valid JSON: {exc}") from exc
    return poly_from_dict(data)


def load_poly(path) -> AffinePoly:
    with open(path) as fh:
        return loads_poly(fh.read())


def save_poly(f: AffinePoly, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_poly(f))


def format_rational(q) -> str:
    """Exact decimal when the denominator is 2^i 5^j, else "p/q"."""
    q = Fraction(q)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    if q.denominator == 1:
        return str(q.numerator)
    digits = max(twos, fives)
    scaled = q * 10 ** digits
    assert scaled.denominator == 1
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    out = s[:-digits] + "." + s[-digits:]
    return ("-" if q < 0 else "") + out


def figure1_quartic() -> AffinePoly:
    """The plane quartic drawn in the Plantinga-Vegter illustration, on [-10, 10]^2."""
    return AffinePoly(2, 4, {
        (4, 0): 1, (3, 0): -6, (2, 2): 2, (2, 1): -6, (2, 0): -34,
        (1, 2): -6, (1, 1): -320, (1, 0): 376, (0, 4): 1, (0, 3): -6,
        (0, 2): -34, (0, 1): 376, (0, 0): 3128,
    })


def linear_form(n: int, i: int = 0, const=0) -> AffinePoly:
    """x_{i+1} + const as a degree-1 polynomial in n variables."""
    e = tuple(1 if j == i else 0 for j in range(n))
    return AffinePoly(n, 1, {e: 1, (0,) * n: const})


def from_terms(n: int, d: int, terms: Iterable[tuple[Sequence[int], object]]) -> AffinePoly:
    out: dict[MultiIndex, Fraction] = {}
    for a, c in terms:
        a = tuple(a)
        out[a] = out.get(a, Fraction(0)) + _to_fraction(c)
    return AffinePoly(n, d, out)
