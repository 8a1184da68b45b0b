"""Axis-aligned n-cubes and the standard 2^n subdivision."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass(frozen=True, order=True)
class NBox:
    """Closed cube ``center + [-width/2, width/2]^n``.

    Coordinates are exact rationals; starting from ``[-a, a]^n`` every
    descendant has center a * (dyadic) and width 2a / 2^depth.
    """

    depth: int
    center: tuple[Fraction, ...]
    width: Fraction

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("box width must be positive")

    @classmethod
    def make(cls, center: Sequence, width, depth: int = 0) -> "NBox":
        return cls(depth, tuple(Fraction(c) for c in center), Fraction(width))

    @classmethod
    def root(cls, a, n: int) -> "NBox":
        """The initial box [-a, a]^n."""
        a = Fraction(a)
        if a <= 0:
            raise ValueError("a must be positive")
        return cls(0, (Fraction(0),) * n, 2 * a)

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> Fraction:
        return self.width ** self.n

    @property
    def lower(self) -> tuple[Fraction, ...]:
        h = self.width / 2
        return tuple(c - h for c in self.center)

    @property
    def upper(self) -> tuple[Fraction, ...]:
        h = self.width / 2
        return tuple(c + h for c in self.center)


def standard_subdivision(box: NBox) -> list[NBox]:
    """The 2^n children of half width, in lexicographic sign order."""
    q = box.width / 4
    half = box.width / 2
    sides = [(ci - q, ci + q) for ci in box.center]
    depth = box.depth + 1
    return [NBox(depth, c, half) for c in itertools.product(*sides)]


def contains(box: NBox, x: Sequence) -> bool:
    """Closed-box membership, |x - m(B)|_inf <= w(B)/2."""
    if len(x) != box.n:
        raise ValueError(f"point has dimension {len(x)}, box has {box.n}")
    h = box.width / 2
    return all(abs(Fraction(xi) - ci) <= h for xi, ci in zip(x, box.center))


# ---------------------------------------------------------------------------
# integer grid coordinates
#
# A box at depth k inside [-a, a]^n is identified by an integer index vector
# j in [0, 2^k)^n: width 2a / 2^k, center a (2 j + 1 - 2^k) / 2^k.  Work
# queues hold these arrays instead of NBox objects.


def grid_width(a, depth: int) -> Fraction:
    return Fraction(2 * Fraction(a), 1 << depth)


def box_from_index(a, depth: int, index: Sequence[int]) -> NBox:
    a = Fraction(a)
    side = 1 << depth
    center = tuple(a * Fraction(2 * int(j) + 1 - side, side) for j in index)
    return NBox(depth, center, Fraction(2 * a, side))


def index_of_box(a, box: NBox) -> tuple[int, ...]:
    """Inverse of :func:`box_from_index`."""
    a = Fraction(a)
    side = 1 << box.depth
    out = []
    for c in box.center:
        t = c / a * side + side - 1
        if t.denominator != 1 or t.numerator % 2:
            raise ValueError("box is not on the dyadic grid of [-a, a]^n")
        out.append(t.numerator // 2)
    return tuple(out)


def grid_centers_float(a, depth: int, index: np.ndarray) -> np.ndarray | None:
    """Float64 centers, or None when they are not exactly representable."""
    a = Fraction(a)
    q = a.denominator
    if q & (q - 1) or abs(a.numerator).bit_length() + depth + 2 > 53:
        return None
    side = 1 << depth
    num = 2 * index.astype(np.float64) + (1 - side)
    return num * (float(a) / side)


def child_indices(index: np.ndarray) -> np.ndarray:
    """Indices of the 2^n children of every row, in standard_subdivision order."""
    k, n = index.shape
    offs = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    return (2 * index[:, None, :] + offs[None, :, :]).reshape(k * len(offs), n)
