"""Smooth bounded test functions with analytic derivatives.

All evaluators broadcast over leading axes: ``value`` maps (..., d) to
(...), ``gradient`` to (..., d) and ``hessian`` to (..., d, d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

__all__ = [
    "TestFunction",
    "constant",
    "coordinate_tanh",
    "coordinate_sine",
    "plateau",
    "decreasing_plateau",
    "tensor_plateau",
    "threshold_indicator",
    "product",
    "linear_combination",
    "plateau_family",
    "monotone_pairs",
]


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False  # not a pytest class

    value: Callable
    gradient: Optional[Callable]
    hessian: Optional[Callable]
    bound: float
    dim: int
    monotone: bool = False
    supermodular: bool = False
    support: tuple = ()
    name: str = "f"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    @property
    def smooth(self):
        return self.gradient is not None and self.hessian is not None

    def check(self, samples, tol=1e-12):
        """Return the list of violated declared properties on ``samples``."""
        samples = np.asarray(samples, dtype=float)
        bad = []
        if np.any(np.abs(self.value(samples)) > self.bound + tol):
            bad.append("bound")
        if self.monotone and self.gradient is not None:
            if np.any(self.gradient(samples) < -tol):
                bad.append("monotone")
        if self.supermodular and self.hessian is not None and self.dim > 1:
            H = self.hessian(samples)
            off = ~np.eye(self.dim, dtype=bool)
            if np.any(H[..., off] < -tol):
                bad.append("supermodular")
        return bad


def _zeros_like_x(x, d):
    return np.zeros(np.shape(x)[:-1] + (d,))


def constant(c, dim):
    c = float(c)
    return TestFunction(
        value=lambda x: np.full(np.shape(x)[:-1], c),
        gradient=lambda x: _zeros_like_x(x, dim),
        hessian=lambda x: np.zeros(np.shape(x)[:-1] + (dim, dim)),
        bound=abs(c), dim=dim, monotone=True, supermodular=True, support=(),
        name=f"const({c:g})", params={"kind": "constant", "c": c},
    )


def _coordinate(i, dim, f0, f1, f2, bound, name, params, monotone, supermodular=True):
    def grad(x):
        g = _zeros_like_x(x, dim)
        g[..., i] = f1(np.asarray(x)[..., i])
        return g

    def hess(x):
        h = np.zeros(np.shape(x)[:-1] + (dim, dim))
        h[..., i, i] = f2(np.asarray(x)[..., i])
        return h

    return TestFunction(
        value=lambda x: f0(np.asarray(x)[..., i]), gradient=grad, hessian=hess,
        bound=bound, dim=dim, monotone=monotone, supermodular=supermodular,
        support=(i,), name=name, params=params,
    )


def coordinate_tanh(i, dim, scale=1.0, shift=0.0):
    """x -> tanh(scale * (x_i - shift))."""
    a, c = float(scale), float(shift)

    def f1(u):
        return a / np.cosh(a * (u - c)) ** 2

    def f2(u):
        t = np.tanh(a * (u - c))
        return -2.0 * a * a * t * (1.0 - t * t)

    return _coordinate(i, dim, lambda u: np.tanh(a * (u - c)), f1, f2, 1.0,
                       f"tanh(x{i + 1})" if a == 1 and c == 0 else f"tanh({a:g}(x{i + 1}-{c:g}))",
                       {"kind": "tanh", "coord": i, "scale": a, "shift": c}, monotone=a >= 0)


def coordinate_sine(i, dim):
    return _coordinate(i, dim, np.sin, np.cos, lambda u: -np.sin(u), 1.0, f"sin(x{i + 1})",
                       {"kind": "sine", "coord": i}, monotone=False, supermodular=True)


def _logistic_parts(c, w):
    def f0(u):
        return expit((u - c) / w)

    def f1(u):
        p = expit((u - c) / w)
        return p * (1.0 - p) / w

    def f2(u):
        p = expit((u - c) / w)
        return p * (1.0 - p) * (1.0 - 2.0 * p) / (w * w)

    return f0, f1, f2


def plateau(i, center, width, dim):
    """Logistic step rising from 0 to 1 around x_i = center over ~width."""
    c, w = float(center), float(width)
    f0, f1, f2 = _logistic_parts(c, w)
    return _coordinate(i, dim, f0, f1, f2, 1.0, f"plateau(x{i + 1};{c:g},{w:g})",
                       {"kind": "plateau", "coord": i, "center": c, "width": w}, monotone=True)


def decreasing_plateau(i, center, width, dim):
    """1 - plateau: nonnegative and nonincreasing in x_i."""
    c, w = float(center), float(width)
    f0, f1, f2 = _logistic_parts(c, w)
    return _coordinate(i, dim, lambda u: 1.0 - f0(u), lambda u: -f1(u), lambda u: -f2(u), 1.0,
                       f"dplateau(x{i + 1};{c:g},{w:g})",
                       {"kind": "decreasing_plateau", "coord": i, "center": c, "width": w},
                       monotone=False)


def threshold_indicator(i, t, dim, upper=True):
    """1{x_i > t} (upper) or 1{x_i <= t}; values only, no derivatives."""
    t = float(t)
    if upper:
        val = lambda x: (np.asarray(x)[..., i] > t).astype(float)  # noqa: E731
    else:
        val = lambda x: (np.asarray(x)[..., i] <= t).astype(float)  # noqa: E731
    return TestFunction(value=val, gradient=None, hessian=None, bound=1.0, dim=dim,
                        monotone=upper, supermodular=True, support=(i,),
                        name=f"1{{x{i + 1}{'>' if upper else '<='}{t:g}}}",
                        params={"kind": "indicator", "coord": i, "t": t, "upper": upper})


def product(f, g):
    """Pointwise product with gradient and Hessian by the product rule."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")

    def val(x):
        return f.value(x) * g.value(x)

    grad = hess = None
    if f.smooth and g.smooth:
        def grad(x):
            return f.gradient(x) * g.value(x)[..., None] + g.gradient(x) * f.value(x)[..., None]

        def hess(x):
            gf, gg = f.gradient(x), g.gradient(x)
            cross = gf[..., :, None] * gg[..., None, :]
            return (f.hessian(x) * g.value(x)[..., None, None]
                    + g.hessian(x) * f.value(x)[..., None, None]
                    + cross + np.swapaxes(cross, -1, -2))

    nonneg = f.params.get("kind") in ("plateau", "tensor_plateau", "indicator") and \
        g.params.get("kind") in ("plateau", "tensor_plateau", "indicator")
    return TestFunction(
        value=val, gradient=grad, hessian=hess, bound=f.bound * g.bound, dim=f.dim,
        monotone=nonneg and f.monotone and g.monotone,
        supermodular=nonneg and f.monotone and g.monotone,
        support=tuple(sorted(set(f.support) | set(g.support))),
        name=f"({f.name})*({g.name})", params={"kind": "product", "factors": (f.params, g.params)},
    )


def tensor_plateau(centers, width, dim, coords=None):
    """prod_i plateau(x_i; c_i, w): nonnegative, monotone and supermodular."""
    coords = tuple(range(dim)) if coords is None else tuple(coords)
    centers = np.broadcast_to(np.asarray(centers, dtype=float), (len(coords),))
    fs = [plateau(i, c, width, dim) for i, c in zip(coords, centers)]
    out = fs[0]
    for f in fs[1:]:
        out = product(out, f)
    return TestFunction(
        value=out.value, gradient=out.gradient, hessian=out.hessian, bound=1.0, dim=dim,
        monotone=True, supermodular=True, support=coords,
        name=f"tplateau({','.join(f'{c:g}' for c in centers)};{width:g})",
        params={"kind": "tensor_plateau", "coords": coords, "centers": centers.tolist(),
                "width": float(width)},
    )


def linear_combination(coeffs, fs):
    coeffs = [float(a) for a in coeffs]
    dim = fs[0].dim

    def val(x):
        return sum(a * f.value(x) for a, f in zip(coeffs, fs))

    def grad(x):
        return sum(a * f.gradient(x) for a, f in zip(coeffs, fs))

    def hess(x):
        return sum(a * f.hessian(x) for a, f in zip(coeffs, fs))

    pos = all(a >= 0 for a in coeffs)
    return TestFunction(
        value=val, gradient=grad, hessian=hess,
        bound=sum(abs(a) * f.bound for a, f in zip(coeffs, fs)), dim=dim,
        monotone=pos and all(f.monotone for f in fs),
        supermodular=pos and all(f.supermodular for f in fs),
        support=tuple(sorted(set().union(*[f.support for f in fs]))),
        name="+".join(f"{a:g}*{f.name}" for a, f in zip(coeffs, fs)),
        params={"kind": "combination"},
    )


def plateau_family(dim, centers=(-1.5, -0.5, 0.5, 1.5), widths=(0.25, 1.0), tensor=True):
    """Default monotone family: single-coordinate plateaus plus tensor plateaus."""
    fam = [plateau(i, c, w, dim) for w in widths for i in range(dim) for c in centers]
    if tensor and dim > 1:
        fam += [tensor_plateau(c, w, dim) for w in widths for c in centers]
    return fam


def monotone_pairs(family):
    """All unordered pairs (with repetition) of a monotone family."""
    for f in family:
        if not f.monotone:
            raise ValueError(f"{f.name} is not flagged monotone")
    return list(itertools.combinations_with_replacement(family, 2))
