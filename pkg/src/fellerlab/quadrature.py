"""Node sets for integrating against Lévy densities.

Two layouts are provided:

* annular sectors: geometric shells in the radius, with angular sectors
  aligned to the coordinate orthants (d = 1, 2, 3), tensor Gauss-Legendre
  inside each sector;
* boxes: tensor Gauss-Legendre on axis-aligned boxes, with each box split
  along the coordinate hyperplanes so that orthant indicators are constant
  on every cell.

Both return plain ``(points, weights)`` arrays so that any integrand can be
evaluated in one vectorised call.
"""

from __future__ import annotations

from functools import lru_cache
import itertools
import math

import numpy as np

__all__ = [
    "QuadratureBudget",
    "QuadratureError",
    "gauss_legendre",
    "shell_breaks",
    "annular_nodes",
    "sphere_nodes",
    "box_nodes",
    "split_box_at_axes",
]


class QuadratureError(RuntimeError):
    """Raised when a quadrature does not reach its tolerance within budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureBudget:
    """Orders and tolerances for density quadrature.

    ``order`` is the starting number of Gauss-Legendre nodes per direction;
    each refinement doubles it, at most ``max_refinements`` times.
    """

    def __init__(self, order=8, max_refinements=3, rtol=1e-6, atol=1e-9,
                 delta=1e-4, shell_ratio=2.0):
        if order < 1 or max_refinements < 1:
            raise ValueError("order and max_refinements must be positive")
        self.order = int(order)
        self.max_refinements = int(max_refinements)
        self.rtol = float(rtol)
        self.atol = float(atol)
        self.delta = float(delta)
        self.shell_ratio = float(shell_ratio)

    def orders(self):
        return [self.order * 2**k for k in range(self.max_refinements + 1)]

    def __repr__(self):
        return (f"QuadratureBudget(order={self.order}, max_refinements={self.max_refinements}, "
                f"rtol={self.rtol}, atol={self.atol}, delta={self.delta})")


DEFAULT_BUDGET = QuadratureBudget()


@lru_cache(maxsize=64)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _gl_interval(a, b, n):
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def shell_breaks(inner, outer, ratio=2.0, extra=(1.0,)):
    """Geometric radial breakpoints from ``inner`` to ``outer``.

    Points in ``extra`` that fall strictly inside are added, so the
    cut-off sphere |y| = 1 is always a shell boundary.
    """
    if not 0 < inner < outer:
        raise ValueError(f"need 0 < inner < outer, got {inner}, {outer}")
    n = max(1, math.ceil(math.log(outer / inner) / math.log(ratio)))
    br = list(np.geomspace(inner, outer, n + 1))
    for e in extra:
        if inner < e < outer:
            br.append(e)
    return tuple(sorted(set(br)))


@lru_cache(maxsize=32)
def sphere_nodes(d, n):
    """Directions and surface weights on S^{d-1}, sectors split at the axes.

    Weights sum to the surface area of the unit sphere.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        th, wt = [], []
        for k in range(4):
            t, w = _gl_interval(k * math.pi / 2, (k + 1) * math.pi / 2, n)
            th.append(t)
            wt.append(w)
        th = np.concatenate(th)
        return np.column_stack([np.cos(th), np.sin(th)]), np.concatenate(wt)
    if d == 3:
        pts, wts = [], []
        for k, j in itertools.product(range(4), range(2)):
            t, wt = _gl_interval(k * math.pi / 2, (k + 1) * math.pi / 2, n)
            p, wp = _gl_interval(j * math.pi / 2, (j + 1) * math.pi / 2, n)
            T, P = np.meshgrid(t, p, indexing="ij")
            W = np.outer(wt, wp * np.sin(p))
            pts.append(np.column_stack([
                (np.sin(P) * np.cos(T)).ravel(),
                (np.sin(P) * np.sin(T)).ravel(),
                np.cos(P).ravel(),
            ]))
            wts.append(W.ravel())
        return np.concatenate(pts), np.concatenate(wts)
    raise NotImplementedError("annular quadrature supports dimensions 1, 2 and 3")


@lru_cache(maxsize=64)
def annular_nodes(d, breaks, n):
    """Nodes for ∫_{breaks[0] <= |y| <= breaks[-1]} g(y) dy.

    ``breaks`` is a tuple of radii; each shell gets ``n`` radial nodes and
    every sector ``n`` nodes per angle.
    """
    u, wu = sphere_nodes(d, n)
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        r, wr = _gl_interval(a, b, n)
        jac = wr * r ** (d - 1)
        pts.append((r[:, None, None] * u[None, :, :]).reshape(-1, d))
        wts.append(np.outer(jac, wu).ravel())
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def split_box_at_axes(lo, hi):
    """Split a box into pieces that each lie in one closed orthant."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    edges = []
    for a, b in zip(lo, hi):
        edges.append([(a, 0.0), (0.0, b)] if a < 0.0 < b else [(a, b)])
    return [(np.array([e[0] for e in c]), np.array([e[1] for e in c]))
            for c in itertools.product(*edges)]


@lru_cache(maxsize=64)
def _box_nodes_cached(boxes, n):
    pts, wts = [], []
    for lo, hi in boxes:
        for plo, phi in split_box_at_axes(lo, hi):
            axes = [_gl_interval(a, b, n) for a, b in zip(plo, phi)]
            grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
            wgrid = np.ones_like(grids[0])
            for k, ax in enumerate(axes):
                shape = [1] * len(axes)
                shape[k] = -1
                wgrid = wgrid * ax[1].reshape(shape)
            pts.append(np.column_stack([g.ravel() for g in grids]))
            wts.append(wgrid.ravel())
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def box_nodes(boxes, n):
    """Tensor Gauss-Legendre nodes over a union of disjoint boxes."""
    key = tuple((tuple(map(float, lo)), tuple(map(float, hi))) for lo, hi in boxes)
    return _box_nodes_cached(key, n)
