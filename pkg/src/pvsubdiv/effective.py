"""PV-EFFECTIVE: subdivision driven by m_B-bit floating-point tests.

Each box B is tested at its own precision.  The schedule is

    m_0 = 7 + ceil(log2 sqrt(dn)),  m_B = m_0 + ceil(max(log2 a, log2(a / w(B))))

and the predicate compares fl(|fhat(m(fl B))|) against fl(4 sqrt(d) sqrt(n+1) w)
and fl(|dfhat(m(fl B))|) against fl(6 sqrt(d) (n+1) w).

The soundness argument needs u = 2^-(m-1) <= min(1, w) / (128 sqrt(dn) max(1, a))
and, for the evaluator error bounds, u <= 1 / (64 d log2(n+1)).  The schedule
alone can miss these by a small constant factor, so the working precision is
the smallest m >= m_B meeting both.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional

import numpy as np

from .boxes import NBox, box_from_index, grid_centers_float, grid_width
from .fp import (VECTOR_MAX_PREC, PrecisionError, RoundedFloat, evaluator_unit_ok, fl_dfhat_norm,
                 fl_evaluators_batch, fl_fhat, round_array)
from .interval import (CODE_OF_KIND, DEFAULT_MAX_DEPTH, FUNCTION, GRADIENT, KIND_OF_CODE, BoxCertificate,
                       CertificateKind, LevelTest, Subdivision, run_subdivision)
from .poly import AffinePoly, PolynomialError


def _ceil_log2(q) -> int:
    """Smallest integer k with 2**k >= q, for rational q > 0."""
    q = Fraction(q)
    if q <= 0:
        raise ValueError("log of a non-positive number")
    k = q.numerator.bit_length() - q.denominator.bit_length()
    while Fraction(2) ** k < q:
        k += 1
    while Fraction(2) ** (k - 1) >= q:
        k -= 1
    return k


def base_precision(d: int, n: int) -> int:
    """m_0 = 7 + ceil(log2 sqrt(dn))."""
    k = 0
    while 4 ** k < d * n:
        k += 1
    return 7 + k


def precision_schedule(a, w, d: int, n: int) -> int:
    """m_B = m_0 + ceil(max(log2 a, log2(a / w)))."""
    a, w = Fraction(a), Fraction(w)
    if a < 1:
        raise ValueError("the effective algorithm needs a >= 1")
    if w <= 0:
        raise ValueError("width must be positive")
    return base_precision(d, n) + _ceil_log2(max(a, a / w))


def precision_for_box(box: NBox, a, d: int, n: int) -> int:
    """The scheduled precision for a box (see :func:`working_precision`)."""
    return precision_schedule(a, box.width, d, n)


def theorem_unit_ok(m: int, a, w, d: int, n: int) -> bool:
    """u <= min(1, w) / (128 sqrt(dn) max(1, a)), decided exactly."""
    a, w = Fraction(a), Fraction(w)
    lhs = Fraction(128, 1 << (m - 1)) * max(Fraction(1), a)
    return lhs * lhs * d * n <= min(Fraction(1), w) ** 2


def working_precision(a, w, d: int, n: int) -> int:
    """Smallest m >= m_B for which the soundness conditions on u hold."""
    m = precision_schedule(a, w, d, n)
    while not (theorem_unit_ok(m, a, w, d, n) and evaluator_unit_ok(d, n, m)):
        m += 1
    return m


# ---------------------------------------------------------------------------
# the predicate


def _thresholds(d: int, n: int, w: RoundedFloat) -> tuple[RoundedFloat, RoundedFloat]:
    m = w.prec
    r = lambda v: RoundedFloat.from_value(v, m)
    sd = r(d).sqrt()
    tf = r(4) * sd * r(n + 1).sqrt() * w
    tg = r(6) * sd * r(n + 1) * w
    return tf, tg


def rounded_box(box: NBox, m: int) -> tuple[list[RoundedFloat], RoundedFloat]:
    """fl(B): midpoint and width rounded to m bits."""
    return [RoundedFloat.from_value(c, m) for c in box.center], RoundedFloat.from_value(box.width, m)


def cf_fp_test(f: AffinePoly, box: NBox, m: int, a=None) -> Optional[BoxCertificate]:
    """The finite-precision predicate at m bits.

    ``a`` is the half-width of the region the box lives in; it defaults to
    the smallest a >= 1 containing the box.  Raises :class:`PrecisionError`
    when m is too small for the soundness argument.
    """
    if f.is_zero():
        raise PolynomialError("zero polynomial")
    d, n = f.d, box.n
    if a is None:
        a = max([Fraction(1)] + [abs(v) for v in box.lower + box.upper])
    if not (theorem_unit_ok(m, a, box.width, d, n) and evaluator_unit_ok(d, n, m)):
        raise PrecisionError(f"m={m} is below the working precision for this box")
    center, w = rounded_box(box, m)
    tf, tg = _thresholds(d, n, w)
    v = fl_fhat(f, center, m, check=False)
    if v > tf:
        return BoxCertificate(CertificateKind.FUNCTION, float(v), float(tf))
    g = fl_dfhat_norm(f, center, m, check=False)
    if g > tg:
        return BoxCertificate(CertificateKind.GRADIENT, float(g), float(tg))
    return None


class EffectiveTest(LevelTest):
    """Batch form of :func:`cf_fp_test` at the working precision of a level."""

    def __call__(self, f, a, depth, index):
        a = Fraction(a)
        d, n = f.d, f.n
        k = len(index)
        w = grid_width(a, depth)
        m = working_precision(a, w, d, n)
        codes = np.zeros(k, dtype=np.int8)
        lhs = np.full(k, np.nan)
        thr = np.full(k, np.nan)
        X = grid_centers_float(a, depth, index)
        if X is None or m > VECTOR_MAX_PREC:
            for i in range(k):
                cert = cf_fp_test(f, box_from_index(a, depth, index[i]), m, a)
                if cert is not None:
                    codes[i] = CODE_OF_KIND[cert.kind]
                    lhs[i], thr[i] = cert.lhs, cert.threshold
            return codes, lhs, thr
        tf, tg = _thresholds(d, n, RoundedFloat.from_value(w, m))
        tf, tg = float(tf), float(tg)
        fh, gh = fl_evaluators_batch(f, round_array(X, m), m)
        fyes = fh > tf
        gyes = ~fyes & (gh > tg)
        codes[fyes] = FUNCTION
        codes[gyes] = GRADIENT
        lhs[fyes], thr[fyes] = fh[fyes], tf
        lhs[gyes], thr[gyes] = gh[gyes], tg
        return codes, lhs, thr


# ---------------------------------------------------------------------------
# the loop


def pv_effective(
    f: AffinePoly,
    a,
    max_depth: int = DEFAULT_MAX_DEPTH,
    *,
    discipline: str = "fifo",
    workers: int = 1,
    max_boxes: int | None = None,
    chunk: int = 8192,
) -> Subdivision:
    """Subdivide [-a, a]^n with the finite-precision predicate.

    ``stats`` carries the precision log of every processed box (arrays
    ``processed_depths``, ``processed_indices``, ``processed_kinds`` in
    canonical order, with ``precision_by_depth`` mapping depth to the
    (scheduled, used) precisions), the maximum precisions and a bit-cost
    estimate sum d N m_B^2.
    """
    a = Fraction(a)
    if a < 1:
        raise ValueError("the effective algorithm needs a >= 1")
    d, n = f.d, f.n
    N = len(f.coeffs)
    sub = run_subdivision(f, a, EffectiveTest(), max_depth=max_depth, discipline=discipline,
                          workers=workers, mode="effective", record_processed=True,
                          max_boxes=max_boxes, chunk=chunk)
    depths, counts = np.unique(sub.stats["processed_depths"], return_counts=True)
    by_depth = {}
    cost = 0
    for k, c in zip(depths.tolist(), counts.tolist()):
        w = grid_width(a, k)
        by_depth[k] = (precision_schedule(a, w, d, n), working_precision(a, w, d, n))
        cost += c * d * N * by_depth[k][1] ** 2
    sub.stats["precision_by_depth"] = by_depth
    sub.stats["max_scheduled_precision"] = max(v[0] for v in by_depth.values())
    sub.stats["max_precision"] = max(v[1] for v in by_depth.values())
    sub.stats["bit_cost"] = cost
    return sub


def precision_log(sub: Subdivision) -> list[dict]:
    """Per-box rows (depth, width, scheduled and used precision, kind)."""
    table = sub.stats["precision_by_depth"]
    rows = []
    for k, j, c in zip(sub.stats["processed_depths"].tolist(), sub.stats["processed_indices"].tolist(),
                       sub.stats["processed_kinds"].tolist()):
        box = box_from_index(sub.a, k, j)
        sched, used = table[k]
        rows.append({"depth": k, "center": box.center, "width": box.width, "m_scheduled": sched,
                     "m_used": used, "certificate": KIND_OF_CODE[c].value if c > 0 else None})
    return rows
