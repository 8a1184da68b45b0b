"""Exact-arithmetic PV-INTERVAL subdivision.

A box is accepted when the normalized value or the normalized gradient at its
midpoint is large compared to its width:

    |fhat(m(B))|   > (1 + sqrt(d)) sqrt(n) w(B)           (function sign)
    |dfhat(m(B))|  > sqrt(2) (1 + sqrt(d - 1)) n w(B)     (gradient cone)

Both sides are compared squared, so no square root is rounded on the
certification path.  Batches of boxes first go through a float64 evaluation
with a rigorous a-priori error bound; whatever that cannot decide is settled
in exact integer arithmetic.  Every decision is the exact one.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from .boxes import NBox, box_from_index, child_indices, grid_centers_float, grid_width
from .poly import AffinePoly, PolynomialError, rational_point

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 40


class CertificateKind(str, enum.Enum):
    FUNCTION = "function"
    GRADIENT = "gradient"


# kind codes used in arrays
REJECT, FUNCTION, GRADIENT, UNDECIDED = 0, 1, 2, -1
KIND_OF_CODE = {FUNCTION: CertificateKind.FUNCTION, GRADIENT: CertificateKind.GRADIENT}
CODE_OF_KIND = {CertificateKind.FUNCTION: FUNCTION, CertificateKind.GRADIENT: GRADIENT}


@dataclass(frozen=True)
class BoxCertificate:
    """Which branch accepted a box, with the tested quantity and threshold."""

    kind: CertificateKind
    lhs: float
    threshold: float


class DepthExceeded(RuntimeError):
    """A box reached the depth limit without being certified.

    Signals a singular or nearly singular zero set inside the region.
    """

    def __init__(self, max_depth: int, box: NBox | None = None):
        super().__init__(f"uncertified box at depth {max_depth}")
        self.max_depth = max_depth
        self.box = box


@dataclass
class Subdivision:
    """Certified boxes tiling [-a, a]^n, stored as grid indices.

    ``depths[i]`` and ``indices[i]`` locate box i (see
    :func:`boxes.box_from_index`); ``kinds`` holds FUNCTION / GRADIENT codes.
    Boxes are in canonical order: by depth, then center.
    """

    a: Fraction
    n: int
    depths: np.ndarray
    indices: np.ndarray
    kinds: np.ndarray
    lhs: np.ndarray
    thresholds: np.ndarray
    processed: int
    max_depth: int
    mode: str = "interval"
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.depths)

    @property
    def box_count(self) -> int:
        return len(self.depths)

    def box(self, i: int) -> NBox:
        return box_from_index(self.a, int(self.depths[i]), self.indices[i])

    def certificate(self, i: int) -> BoxCertificate:
        return BoxCertificate(KIND_OF_CODE[int(self.kinds[i])], float(self.lhs[i]), float(self.thresholds[i]))

    @cached_property
    def boxes(self) -> list[tuple[NBox, BoxCertificate]]:
        return [(self.box(i), self.certificate(i)) for i in range(len(self))]

    def total_volume(self) -> Fraction:
        """Exact sum of box volumes."""
        depth, counts = np.unique(self.depths, return_counts=True)
        total = Fraction(0)
        for k, c in zip(depth.tolist(), counts.tolist()):
            total += c * grid_width(self.a, k) ** self.n
        return total

    def centers_float(self) -> np.ndarray:
        side = np.ldexp(1.0, self.depths.astype(int))[:, None]
        return float(self.a) * (2 * self.indices + 1 - side) / side

    def widths_float(self) -> np.ndarray:
        return 2 * float(self.a) * np.ldexp(1.0, -self.depths.astype(int))


# ---------------------------------------------------------------------------
# exact comparisons


def exceeds_sqrt_form(lhs: Fraction, base: Fraction, coef: Fraction, radicand: int) -> bool:
    """Decide lhs > base + coef * sqrt(radicand) exactly (base, coef >= 0)."""
    diff = lhs - base
    if diff <= 0:
        return False
    return diff * diff > coef * coef * radicand


def midpoint_squares(f: AffinePoly, center) -> tuple[Fraction, Fraction]:
    """Exact (fhat(m)^2, |dfhat(m)|^2) at a rational point, via the integer form."""
    form = f.integer_form
    d = f.d
    L, M = rational_point(center)
    value, partials = form.values(L, M)
    S = L * L + sum(v * v for v in M)
    W = form.scaled_norm_sq
    fsq = Fraction(value * value, L * L * S ** (d - 1)) / W
    gnum = sum(g * g for g in partials)
    if d >= 2:
        gsq = Fraction(gnum, L * L * S ** (d - 2)) / (d * d * W)
    else:
        gsq = Fraction(gnum * S, L * L) / (d * d * W)
    return fsq, gsq


def function_threshold_sq(d: int, n: int, w: Fraction) -> tuple[Fraction, Fraction, int]:
    """((1 + sqrt d) sqrt n w)^2 as (base, coef, radicand)."""
    w2 = w * w
    return n * w2 * (1 + d), 2 * n * w2, d


def gradient_threshold_sq(d: int, n: int, w: Fraction) -> tuple[Fraction, Fraction, int]:
    """(sqrt 2 (1 + sqrt(d-1)) n w)^2 as (base, coef, radicand)."""
    w2 = w * w
    return 2 * n * n * w2 * d, 4 * n * n * w2, d - 1


def algorithm_rules(d, n, w):
    """Squared thresholds of the algorithm listing, for both branches."""
    return function_threshold_sq(d, n, w), gradient_threshold_sq(d, n, w)


def theorem_rules(d, n, w):
    """Squared thresholds with the constants 2 sqrt(dn) and 2 sqrt(2) sqrt(dn)."""
    w2 = w * w
    return (4 * d * n * w2, Fraction(0), 0), (8 * d * n * w2, Fraction(0), 0)


def _float_threshold(base, coef, radicand) -> float:
    return math.sqrt(float(base) + float(coef) * math.sqrt(radicand))


def exact_kind(f: AffinePoly, box: NBox, rules=algorithm_rules) -> Optional[CertificateKind]:
    """Outcome of a squared-threshold predicate in exact arithmetic."""
    fsq, gsq = midpoint_squares(f, box.center)
    fr, gr = rules(f.d, box.n, box.width)
    if exceeds_sqrt_form(fsq, *fr):
        return CertificateKind.FUNCTION
    if exceeds_sqrt_form(gsq, *gr):
        return CertificateKind.GRADIENT
    return None


def cf_box_test(f: AffinePoly, box: NBox) -> Optional[BoxCertificate]:
    """Interval-level box predicate; None when the box must be subdivided."""
    if f.is_zero():
        raise PolynomialError("zero polynomial")
    n, d, w = box.n, f.d, box.width
    fsq, gsq = midpoint_squares(f, box.center)
    thr = function_threshold_sq(d, n, w)
    if exceeds_sqrt_form(fsq, *thr):
        return BoxCertificate(CertificateKind.FUNCTION, math.sqrt(fsq), _float_threshold(*thr))
    thr = gradient_threshold_sq(d, n, w)
    if exceeds_sqrt_form(gsq, *thr):
        return BoxCertificate(CertificateKind.GRADIENT, math.sqrt(gsq), _float_threshold(*thr))
    return None


def theorem_constant_check(f: AffinePoly, box: NBox) -> Optional[CertificateKind]:
    """The simplified predicate with constants 2 sqrt(dn) and 2 sqrt(2) sqrt(dn).

    Squared, both thresholds are rational: 4 d n w^2 and 8 d n w^2.
    """
    n, d, w = box.n, f.d, box.width
    fsq, gsq = midpoint_squares(f, box.center)
    if fsq > 4 * d * n * w * w:
        return CertificateKind.FUNCTION
    if gsq > 8 * d * n * w * w:
        return CertificateKind.GRADIENT
    return None


# ---------------------------------------------------------------------------
# certified float filter

_U = 2.0 ** -53


def _gamma(k: int) -> float:
    return k * _U / (1 - k * _U)


class _FloatData:
    """Per-polynomial float64 arrays for the filter (built once, cached)."""

    def __init__(self, f: AffinePoly):
        E = f.exponent_matrix
        c = f.float_coeffs
        self.E = E
        self.c = c
        self.abs_c = np.abs(c)
        self.parts = []
        for i in range(f.n):
            Ei = E.copy()
            mask = Ei[:, i] > 0
            Ei[mask, i] -= 1
            ci = np.where(mask, c * E[:, i], 0.0)
            self.parts.append((Ei, ci, np.abs(ci)))
        self.W = float(f.weyl_norm_sq)
        N = E.shape[0]
        d, n = f.d, f.n
        # value error: d + n roundings per monomial, one for the coefficient,
        # one for reading it, N - 1 for the sum; doubled to cover the bound
        # itself being computed in floating point
        self.err = 2 * _gamma(2 * d + n + N + 4)
        self.rho = 2 * _gamma((n + 2) * (d + 2) + 12)
        self.ok = bool(np.all(np.isfinite(c))) and 0 < self.W < math.inf


def _float_data(f: AffinePoly) -> _FloatData:
    fd = f.__dict__.get("_pv_float_data")
    if fd is None:
        fd = _FloatData(f)
        f.__dict__["_pv_float_data"] = fd
    return fd


def _mono(X, E, d):
    # repeated multiplication keeps the rounding count explicit
    k, n = X.shape
    pw = np.ones((k, n, d + 1))
    for e in range(1, d + 1):
        pw[:, :, e] = pw[:, :, e - 1] * X
    out = np.ones((k, E.shape[0]))
    for i in range(n):
        out *= pw[:, i, E[:, i]]
    return out


def _sq_threshold_float(rule) -> float:
    base, coef, rad = rule
    return float(base) + float(coef) * math.sqrt(rad)


def float_decide(f: AffinePoly, X: np.ndarray, rules, w: Fraction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decide a squared-threshold predicate at the rows of X (all width w).

    Returns (codes, fhat, dfhat_norm): codes are FUNCTION, GRADIENT, REJECT
    or UNDECIDED; the float estimates are informational.  X must hold the
    box centers exactly.
    """
    fd = _float_data(f)
    d, n = f.d, f.n
    k = X.shape[0]
    codes = np.full(k, UNDECIDED, dtype=np.int8)
    if not fd.ok or k == 0:
        return codes, np.full(k, np.nan), np.full(k, np.nan)
    fr, gr = rules(d, n, w)
    tf, tg = _sq_threshold_float(fr), _sq_threshold_float(gr)
    mons = _mono(X, fd.E, d)
    val = (mons * fd.c).sum(axis=1)
    verr = (mons * fd.abs_c).sum(axis=1) * fd.err
    S = 1.0 + (X * X).sum(axis=1)
    Sp = np.ones_like(S)
    for _ in range(d - 1):
        Sp = Sp * S
    rf = tf * fd.W * Sp
    av = np.abs(val)
    lo = np.maximum(av - verr, 0.0)
    hi = av + verr
    slack = fd.rho + 4 * _U
    f_yes = lo * lo * (1 - 4 * _U) > rf * (1 + slack)
    f_no = hi * hi * (1 + 4 * _U) < rf * (1 - slack)
    glo = np.zeros_like(S)
    ghi = np.zeros_like(S)
    gsq = np.zeros_like(S)
    for Ei, ci, aci in fd.parts:
        m = _mono(X, Ei, d)
        g = (m * ci).sum(axis=1)
        ge = (m * aci).sum(axis=1) * fd.err
        ag = np.abs(g)
        glo += np.maximum(ag - ge, 0.0) ** 2
        ghi += (ag + ge) ** 2
        gsq += g * g
    # |grad|^2 > thr^2 d^2 |f|^2 S^(d-2), with S^(d-2) = S^(d-1) / S
    rg = tg * (d * d) * fd.W * Sp / S
    g_yes = glo * (1 - 4 * _U) > rg * (1 + slack + 2 * _U)
    g_no = ghi * (1 + 4 * _U) < rg * (1 - slack - 2 * _U)
    with np.errstate(all="ignore"):
        finite = np.isfinite(hi) & np.isfinite(ghi) & np.isfinite(rf) & np.isfinite(rg) & (rf > 0) & (rg > 0)
        fh = av / np.sqrt(fd.W * Sp)
        gh = np.sqrt(gsq * S / (d * d * fd.W * Sp))
    codes[finite & f_no & g_no] = REJECT
    codes[finite & f_no & g_yes] = GRADIENT
    codes[finite & f_yes] = FUNCTION
    return codes, fh, gh


def _exact_outcome(f, box, rules) -> tuple[int, float, float]:
    fsq, gsq = midpoint_squares(f, box.center)
    fr, gr = rules(f.d, box.n, box.width)
    if exceeds_sqrt_form(fsq, *fr):
        return FUNCTION, math.sqrt(fsq), _float_threshold(*fr)
    if exceeds_sqrt_form(gsq, *gr):
        return GRADIENT, math.sqrt(gsq), _float_threshold(*gr)
    return REJECT, math.nan, math.nan


def decide_level(f: AffinePoly, a, depth: int, index: np.ndarray, rules=algorithm_rules):
    """Exact predicate outcome for grid boxes of one depth.

    Returns (codes, lhs, thresholds) arrays.
    """
    a = Fraction(a)
    k = len(index)
    w = grid_width(a, depth)
    X = grid_centers_float(a, depth, index)
    if X is not None:
        codes, fh, gh = float_decide(f, X, rules, w)
    else:
        codes = np.full(k, UNDECIDED, dtype=np.int8)
        fh = gh = np.full(k, np.nan)
    fr, gr = rules(f.d, f.n, w)
    tf, tg = _float_threshold(*fr), _float_threshold(*gr)
    lhs = np.where(codes == FUNCTION, fh, gh)
    thr = np.where(codes == FUNCTION, tf, tg)
    for i in np.flatnonzero(codes == UNDECIDED):
        c, l, t = _exact_outcome(f, box_from_index(a, depth, index[i]), rules)
        codes[i], lhs[i], thr[i] = c, l, t
    return codes, lhs, thr


def certified_kinds(f: AffinePoly, boxes: list[NBox], rules=algorithm_rules) -> list[Optional[CertificateKind]]:
    """Exact predicate outcome for arbitrary boxes (grouped by width)."""
    if f.is_zero():
        raise PolynomialError("zero polynomial")
    out: list = [None] * len(boxes)
    groups: dict = {}
    for i, b in enumerate(boxes):
        groups.setdefault(b.width, []).append(i)
    for w, idx in groups.items():
        X = None
        if all(c.denominator & (c.denominator - 1) == 0 and abs(c.numerator) < 2 ** 53
               for i in idx for c in boxes[i].center):
            X = np.array([[float(c) for c in boxes[i].center] for i in idx], dtype=float).reshape(len(idx), -1)
        codes = float_decide(f, X, rules, w)[0] if X is not None else np.full(len(idx), UNDECIDED)
        for j, i in enumerate(idx):
            c = int(codes[j])
            if c == UNDECIDED:
                out[i] = exact_kind(f, boxes[i], rules)
            else:
                out[i] = KIND_OF_CODE.get(c)
    return out


def verify_subdivision(f: AffinePoly, sub: Subdivision, rules=algorithm_rules) -> np.ndarray:
    """Re-check every box of a subdivision against a predicate (bool array)."""
    ok = np.zeros(len(sub), dtype=bool)
    for depth in np.unique(sub.depths).tolist():
        sel = np.flatnonzero(sub.depths == depth)
        codes, _, _ = decide_level(f, sub.a, depth, sub.indices[sel], rules)
        ok[sel] = codes > 0
    return ok


# ---------------------------------------------------------------------------
# the subdivision loop


class BoxBudgetExceeded(RuntimeError):
    """More boxes were tested than the caller allowed."""

    def __init__(self, budget: int, processed: int):
        super().__init__(f"box budget of {budget} exceeded ({processed} tested)")
        self.budget = budget
        self.processed = processed


class LevelTest:
    """Batch predicate: (f, a, depth, index array) -> (codes, lhs, thresholds)."""

    def __call__(self, f, a, depth, index):
        raise NotImplementedError


class IntervalTest(LevelTest):
    def __call__(self, f, a, depth, index):
        return decide_level(f, a, depth, index, algorithm_rules)


def _test_chunk(args):
    test, f, a, depth, index = args
    return test(f, a, depth, index)


def _canonical_order(depths: np.ndarray, indices: np.ndarray) -> np.ndarray:
    keys = [indices[:, i] for i in range(indices.shape[1] - 1, -1, -1)] + [depths]
    return np.lexsort(keys)


def run_subdivision(
    f: AffinePoly,
    a,
    test: LevelTest,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    discipline: str = "fifo",
    workers: int = 1,
    mode: str = "interval",
    chunk: int = 8192,
    max_boxes: int | None = None,
    record_processed: bool = False,
) -> Subdivision:
    """Work-queue subdivision of [-a, a]^n driven by a batch test.

    Queue entries are runs of at most ``chunk`` sibling-level boxes.  FIFO
    dequeuing visits the boxes level by level; LIFO goes depth first and
    keeps memory proportional to the depth.  With ``workers > 1`` up to
    ``workers`` entries are tested at once in a process pool.  Boxes come
    back in canonical order, so the result depends neither on the
    discipline nor on the worker count.  ``max_boxes`` caps the number of
    tested boxes (:class:`BoxBudgetExceeded`).
    """
    if f.is_zero():
        raise PolynomialError("zero polynomial")
    if discipline not in ("fifo", "lifo"):
        raise ValueError(f"unknown queue discipline {discipline!r}")
    if max_depth > 60:
        raise ValueError("max_depth above 60 is not supported")
    a = Fraction(a)
    if a <= 0:
        raise ValueError("a must be positive")
    n = f.n
    acc: list = []
    seen: list = []
    processed = 0
    deepest = 0
    t0 = time.perf_counter()

    def absorb(depth, index, codes, lhs, thr):
        nonlocal processed, deepest
        processed += len(index)
        deepest = max(deepest, depth)
        if record_processed:
            seen.append((np.full(len(index), depth), index, codes))
        good = codes > 0
        if good.any():
            acc.append((np.full(int(good.sum()), depth), index[good], codes[good], lhs[good], thr[good]))
        bad = ~good
        if bad.any() and depth >= max_depth:
            first = int(np.flatnonzero(bad)[0])
            raise DepthExceeded(max_depth, box_from_index(a, depth, index[first]))
        if max_boxes is not None and processed > max_boxes:
            raise BoxBudgetExceeded(max_boxes, processed)
        return index[bad]

    queue = deque([(0, np.zeros((1, n), dtype=np.int64))])
    take = queue.popleft if discipline == "fifo" else queue.pop
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while queue:
            batch = [take() for _ in range(min(len(queue), max(1, workers)))]
            if pool is None:
                results = [test(f, a, depth, idx) for depth, idx in batch]
            else:
                results = list(pool.map(_test_chunk, [(test, f, a, depth, idx) for depth, idx in batch]))
            for (depth, idx), res in zip(batch, results):
                rest = absorb(depth, idx, *res)
                if len(rest):
                    kids = child_indices(rest)
                    for i in range(0, len(kids), chunk):
                        queue.append((depth + 1, kids[i:i + chunk]))
    finally:
        if pool is not None:
            pool.shutdown()

    def stack_cols(items, width):
        if not items:
            empty = [np.zeros(0, dtype=np.int64), np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.int8)]
            return empty + [np.zeros(0)] * (width - 3)
        return [np.concatenate([it[c] for it in items]) for c in range(width)]

    depths, indices, kinds, lhs, thr = stack_cols(acc, 5)
    order = _canonical_order(depths, indices)
    sub = Subdivision(a, n, depths[order], indices[order], kinds[order], lhs[order], thr[order],
                      processed, deepest, mode, time.perf_counter() - t0)
    if record_processed:
        pd, pi, pc = stack_cols(seen, 3)
        order = _canonical_order(pd, pi)
        sub.stats["processed_depths"] = pd[order]
        sub.stats["processed_indices"] = pi[order]
        sub.stats["processed_kinds"] = pc[order]
    log.debug("%s subdivision: %d boxes, %d processed, depth %d", mode, len(sub), processed, deepest)
    return sub


def pv_interval(
    f: AffinePoly,
    a,
    max_depth: int = DEFAULT_MAX_DEPTH,
    *,
    discipline: str = "fifo",
    workers: int = 1,
    max_boxes: int | None = None,
    chunk: int = 8192,
) -> Subdivision:
    """Subdivide [-a, a]^n until every box passes :func:`cf_box_test`.

    The caller is responsible for the zero set being smooth in the region;
    a singular input shows up as :class:`DepthExceeded`.
    """
    if Fraction(a) <= 0:
        raise ValueError("a must be positive")
    return run_subdivision(f, a, IntervalTest(), max_depth=max_depth, discipline=discipline,
                           workers=workers, mode="interval", max_boxes=max_boxes, chunk=chunk)
