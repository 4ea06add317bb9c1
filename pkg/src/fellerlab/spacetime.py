"""Space-time homogenisation of a time-inhomogeneous triplet.

The process (s + t, X_{s+t}) is time-homogeneous on R+ x R^d with drift
(1, b_s(x)), diffusion padded by a zero row/column, and jump kernel
nu_s(x, dy) times a point mass at 0 in the time coordinate.  The point
mass is kept structural: the space-time kernel is the source kernel plus a
tag, and embedded jumps are (0, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np

from .functions import TestFunction
from .generator import apply_generator
from .kernel import JumpKernel, Triplet, cutoff, eval_symbol, integrate_jumps
from .quadrature import DEFAULT_BUDGET
from .regions import Region

__all__ = [
    "EMBEDDED_TAG",
    "SpaceTimeTriplet",
    "SpaceTimeFunction",
    "transform_triplet",
    "eval_transformed_symbol",
    "apply_transformed_generator",
    "embedded_mass",
    "ConsistencyError",
    "transformed_generator_split",
]

EMBEDDED_TAG = "embedded-at-time-coordinate-zero"
SYMBOL_CHECK_TOL = 1e-12
FD_STEP = 1e-5


class ConsistencyError(AssertionError):
    """Two routes to the same quantity disagree."""


@dataclass(frozen=True, eq=False)
class SpaceTimeTriplet:
    source: Triplet
    kernel: JumpKernel
    kernel_tag: str = EMBEDDED_TAG

    @property
    def dim(self):
        return self.source.dim + 1

    def drift(self, xt):
        s, x = _split(xt)
        return np.concatenate([[1.0], self.source.b(s, x)])

    def diffusion(self, xt):
        s, x = _split(xt)
        d = self.source.dim
        out = np.zeros((d + 1, d + 1))
        out[1:, 1:] = self.source.sigma(s, x)
        return out

    def embed_jumps(self, y):
        """Space jumps (m, d) -> space-time jumps (0, y) of shape (m, d+1)."""
        y = np.asarray(y, dtype=float)
        return np.concatenate([np.zeros(y.shape[:-1] + (1,)), y], axis=-1)

    def atoms(self, s):
        """Embedded atom locations and rates at time s (rates may depend on x)."""
        return self.embed_jumps(self.kernel.atom_points(s))


def _split(xt):
    xt = np.asarray(xt, dtype=float)
    return float(xt[0]), xt[1:]


def transform_triplet(triplet: Triplet) -> SpaceTimeTriplet:
    return SpaceTimeTriplet(source=triplet, kernel=triplet.jumps)


def embedded_mass(st: SpaceTimeTriplet, s, x, region: Region, budget=DEFAULT_BUDGET):
    """nu~((s, x), region) for a region in R^{d+1}.

    Every embedded jump has time coordinate 0, so only the slice r = 0
    of the region carries mass.
    """
    from .kernel import levy_mass

    class _Slice(Region):
        touches_origin = region.touches_origin

        def contains(self, y):
            return region.contains(st.embed_jumps(y))

        def min_radius(self):
            return region.min_radius()

    return levy_mass(st.kernel, s, x, _Slice(), budget)


def eval_transformed_symbol(st, xt, xi_t, budget=DEFAULT_BUDGET, check=True):
    """p~((s, x), (r, xi)), evaluated from the space-time characteristics.

    With ``check`` the value is compared to i r + p_s(x, xi) and a
    ConsistencyError is raised if they differ by more than 1e-12 (relative
    to the magnitude of the symbol).
    """
    s, x = _split(xt)
    xi_t = np.asarray(xi_t, dtype=float)
    r, xi = float(xi_t[0]), xi_t[1:]
    b = st.drift(xt)
    S = st.diffusion(xt)
    val = 1j * float(b @ xi_t) - 0.5 * float(xi_t @ S @ xi_t)
    k = st.kernel
    if not k.is_empty:
        def integrand(y):
            yt = st.embed_jumps(y)
            z = yt @ xi_t
            chi = cutoff(yt)
            return np.column_stack([np.cos(z) - 1.0, np.sin(z) - z * chi])

        def small(m2, m3):
            return np.array([-0.5 * float(xi @ m2 @ xi), 0.0]), float(np.linalg.norm(xi)) ** 3 / 6 * m3

        res = integrate_jumps(k, s, x, integrand, budget, small, what="space-time symbol")
        re, im = np.asarray(res.value, dtype=float).reshape(2)
        val += complex(re, im)
    if check:
        direct = 1j * r + eval_symbol(st.source, s, x, xi, budget)
        if abs(val - direct) > SYMBOL_CHECK_TOL * max(1.0, abs(direct)):
            raise ConsistencyError(f"space-time symbol {val} != i r + p_s = {direct}")
    return val


@dataclass(frozen=True, eq=False)
class SpaceTimeFunction:
    """F(s, x) with spatial derivatives and an optional analytic time partial.

    ``value``, ``gradient``, ``hessian`` take (s, x) with x of shape (..., d).
    """

    value: object
    gradient: object
    hessian: object
    dim: int
    bound: float
    time_partial: object = None
    allow_fd: bool = True
    name: str = "F"
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_spatial(cls, f: TestFunction):
        return cls(value=lambda s, x: f.value(x), gradient=lambda s, x: f.gradient(x),
                   hessian=lambda s, x: f.hessian(x), dim=f.dim, bound=f.bound,
                   time_partial=lambda s, x: np.zeros(np.shape(x)[:-1]), name=f.name)

    def at_time(self, s) -> TestFunction:
        return TestFunction(
            value=lambda x: self.value(s, x), gradient=lambda x: self.gradient(s, x),
            hessian=lambda x: self.hessian(s, x), bound=self.bound, dim=self.dim,
            name=f"{self.name}@s={s:g}",
        )

    def dt(self, s, x):
        if self.time_partial is not None:
            return float(self.time_partial(s, x))
        if not self.allow_fd:
            raise ValueError(f"{self.name} has no time partial and finite differences are disabled")
        h = FD_STEP
        d1 = (self.value(s + h, x) - self.value(s - h, x)) / (2 * h)
        d2 = (self.value(s + h / 2, x) - self.value(s - h / 2, x)) / h
        rich = (4 * d2 - d1) / 3
        if abs(d1 - d2) > 1e-6 * max(1.0, abs(rich)):
            warnings.warn(f"time partial of {self.name} unstable at s={s}: {d1} vs {d2}")
        return float(rich)


def apply_transformed_generator(st, F: SpaceTimeFunction, xt, budget=DEFAULT_BUDGET):
    """I(p~) F(s, x), from the space-time characteristics.

    Equals dF/ds(s, x) + I(p_s) F(s, .)(x); the spatial part is computed
    with the embedded drift, padded diffusion and (0, y) jumps.
    """
    s, x = _split(xt)
    b = st.drift(xt)
    S = st.diffusion(xt)
    grad_t = np.concatenate([[F.dt(s, x)], F.gradient(s, x)])
    d = st.source.dim
    hess_t = np.zeros((d + 1, d + 1))
    hess_t[1:, 1:] = F.hessian(s, x)
    out = float(b @ grad_t) + 0.5 * float(np.sum(S * hess_t))
    k = st.kernel
    if k.is_empty:
        return out
    f_s = F.at_time(s)
    f0 = float(F.value(s, x))
    g0 = F.gradient(s, x)

    def integrand(y):
        yt = st.embed_jumps(y)
        # time shift of every embedded jump is exactly 0
        return F.value(s + yt[:, 0], x + yt[:, 1:]) - f0 - (yt[:, 1:] @ g0) * cutoff(yt)

    def small(m2, m3):
        from .generator import _third_derivative_scale
        return 0.5 * float(np.sum(m2 * F.hessian(s, x))), _third_derivative_scale(f_s, x) / 6 * m3

    res = integrate_jumps(k, s, x, integrand, budget, small, what="space-time generator")
    return out + float(res.value)


def transformed_generator_split(st, F, xt, budget=DEFAULT_BUDGET):
    """dF/ds + I(p_s) F_s, the shortcut form."""
    s, x = _split(xt)
    return F.dt(s, x) + apply_generator(st.source, s, F.at_time(s), x, budget)
