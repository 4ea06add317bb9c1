"""Region descriptors for Lévy-measure masses.

Sign conventions: the closed orthants R+^d and R-^d contain their
boundaries; a jump is *mixed* iff it has at least one strictly positive and
one strictly negative coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POSITIVE = "positive-orthant"
NEGATIVE = "negative-orthant"
MIXED = "mixed"


def sign_tags(y):
    """Vectorised sign classification of jump vectors of shape (..., d).

    Returns an integer array: 1 positive orthant, -1 negative orthant,
    0 mixed.  The zero vector is reported as positive (callers that care
    reject it first).
    """
    y = np.asarray(y, dtype=float)
    has_pos = (y > 0).any(axis=-1)
    has_neg = (y < 0).any(axis=-1)
    return np.where(has_pos & has_neg, 0, np.where(has_neg, -1, 1))


class Region:
    """Base class; subclasses implement ``contains``."""

    touches_origin = True

    def contains(self, y):
        raise NotImplementedError

    def min_radius(self):
        """A lower bound on |y| over the region (0 if it reaches the origin)."""
        return 0.0

    def intersect_box(self, lo, hi):
        """Exact intersection with a box as a list of boxes, or None."""
        return None


@dataclass(frozen=True)
class Everything(Region):
    def contains(self, y):
        return np.ones(np.shape(y)[:-1], dtype=bool)

    def intersect_box(self, lo, hi):
        return [(np.asarray(lo, float), np.asarray(hi, float))]


@dataclass(frozen=True)
class PositiveOrthant(Region):
    def contains(self, y):
        return sign_tags(y) == 1


@dataclass(frozen=True)
class NegativeOrthant(Region):
    def contains(self, y):
        return sign_tags(y) == -1


@dataclass(frozen=True)
class MixedRegion(Region):
    """(R+^d ∪ R-^d)^c."""

    def contains(self, y):
        return sign_tags(y) == 0


@dataclass(frozen=True)
class SignPattern(Region):
    """Closed region {y : signs[i] * y[i] >= 0 for all i}."""

    signs: tuple

    def contains(self, y):
        s = np.asarray(self.signs, dtype=float)
        return (np.asarray(y) * s >= 0).all(axis=-1)


@dataclass(frozen=True)
class Rectangle(Region):
    lo: tuple
    hi: tuple

    @property
    def touches_origin(self):
        return bool(np.all(np.asarray(self.lo) <= 0) and np.all(np.asarray(self.hi) >= 0))

    def contains(self, y):
        y = np.asarray(y)
        return ((y >= np.asarray(self.lo)) & (y <= np.asarray(self.hi))).all(axis=-1)

    def min_radius(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        nearest = np.clip(0.0, lo, hi)
        return float(np.linalg.norm(nearest))

    def intersect_box(self, lo, hi):
        a = np.maximum(np.asarray(lo, float), np.asarray(self.lo, float))
        b = np.minimum(np.asarray(hi, float), np.asarray(self.hi, float))
        return [(a, b)] if np.all(b > a) else []


@dataclass(frozen=True)
class OutsideBall(Region):
    """{y : |y| >= radius}."""

    radius: float

    @property
    def touches_origin(self):
        return self.radius <= 0

    def contains(self, y):
        return np.linalg.norm(np.asarray(y), axis=-1) >= self.radius

    def min_radius(self):
        return float(self.radius)


@dataclass(frozen=True)
class Union(Region):
    """Union of pairwise disjoint regions."""

    parts: tuple

    @property
    def touches_origin(self):
        return any(p.touches_origin for p in self.parts)

    def contains(self, y):
        out = np.zeros(np.shape(y)[:-1], dtype=bool)
        for p in self.parts:
            out |= p.contains(y)
        return out

    def min_radius(self):
        return min(p.min_radius() for p in self.parts)

    def intersect_box(self, lo, hi):
        pieces = []
        for p in self.parts:
            sub = p.intersect_box(lo, hi)
            if sub is None:
                return None
            pieces.extend(sub)
        return pieces


def region_from_name(name):
    table = {
        "all": Everything(),
        "positive": PositiveOrthant(),
        "negative": NegativeOrthant(),
        "mixed": MixedRegion(),
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown region {name!r}; expected one of {sorted(table)}") from None
