"""Characteristic triplets, jump kernels and the Lévy-Khintchine symbol.

Conventions used throughout the package:

* characteristics are *instantaneous rates*; cumulative quantities are
  obtained by trapezoidal integration in time;
* callables broadcast over leading axes: ``drift(s, x)`` maps ``x`` of
  shape (..., d) to (..., d), ``diffusion(s, x)`` to (..., d, d), an atom
  rate ``rate(s, x)`` to (...), and a density ``density(s, x, y)`` to the
  broadcast of the leading axes of ``x`` and ``y``;
* the cut-off function is chi(y) = 1 for 0 < |y| < 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
from typing import Callable, Optional

import numpy as np

from .quadrature import (
    DEFAULT_BUDGET,
    QuadratureBudget,
    QuadratureError,
    annular_nodes,
    box_nodes,
    shell_breaks,
    sphere_nodes,
)
from .regions import Everything, OutsideBall, Region, sign_tags

__all__ = [
    "Atom",
    "JumpKernel",
    "Triplet",
    "QuadResult",
    "ValidationEntry",
    "ValidationReport",
    "IntegrabilityError",
    "cutoff",
    "integrate_jumps",
    "eval_symbol",
    "eval_symbol_with_residual",
    "levy_mass",
    "validate_triplet",
    "make_deterministic_volatility",
    "ConstantDrift",
    "PolynomialDrift",
    "LinearDrift",
    "ConstantDiffusion",
    "ScaledDiffusion",
]

ATOMIC_TOL = 1e-10


class IntegrabilityError(ValueError):
    """A requested Lévy mass is infinite."""


def cutoff(y):
    """chi(y) = 1_{(0,1)}(|y|), vectorised over leading axes."""
    r = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
    return ((r > 0) & (r < 1)).astype(float)


# --- parametric characteristics -------------------------------------------------


class ConstantDrift:
    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)

    def __call__(self, s, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.value, np.broadcast_shapes(x.shape, self.value.shape)).copy()

    def __repr__(self):
        return f"ConstantDrift({self.value.tolist()})"


class PolynomialDrift:
    """b(s) = sum_k coeffs[k] * s**k with vector coefficients."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))

    def __call__(self, s, x):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)[..., None]
        out = sum(c * s**k for k, c in enumerate(self.coeffs))
        return np.broadcast_to(out, np.broadcast_shapes(x.shape, np.shape(out))).copy()

    def __repr__(self):
        return f"PolynomialDrift({self.coeffs.tolist()})"


class LinearDrift:
    """b(s, x) = A x + c."""

    def __init__(self, matrix, offset=None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        d = self.matrix.shape[0]
        self.offset = np.zeros(d) if offset is None else np.asarray(offset, dtype=float)

    def __call__(self, s, x):
        x = np.asarray(x, dtype=float)
        # einsum keeps per-row results independent of the batch size
        return np.einsum("...j,ij->...i", x, self.matrix) + self.offset

    def __repr__(self):
        return f"LinearDrift({self.matrix.tolist()}, {self.offset.tolist()})"


class ConstantDiffusion:
    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))

    def __call__(self, s, x):
        x = np.asarray(x, dtype=float)
        lead = np.broadcast_shapes(x.shape[:-1], np.shape(s))
        return np.broadcast_to(self.matrix, lead + self.matrix.shape).copy()

    def __repr__(self):
        return f"ConstantDiffusion({self.matrix.tolist()})"


class ScaledDiffusion:
    """Sigma(s) = (sum_k coeffs[k] s**k) * matrix."""

    def __init__(self, matrix, coeffs):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.coeffs = np.asarray(coeffs, dtype=float)

    def __call__(self, s, x):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        scale = sum(c * s**k for k, c in enumerate(self.coeffs))
        lead = np.broadcast_shapes(x.shape[:-1], np.shape(s))
        out = np.asarray(scale)[..., None, None] * self.matrix
        return np.broadcast_to(out, lead + self.matrix.shape).copy()


# --- jump kernel ----------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """A point mass of the Lévy kernel.

    ``rate`` is either a nonnegative number or a callable ``(s, x) -> (...)``.
    """

    location: np.ndarray
    rate: object = 1.0

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=float))
        if not callable(self.rate):
            if not (float(self.rate) >= 0):
                raise ValueError(f"atom rate must be nonnegative, got {self.rate}")
            object.__setattr__(self, "rate", float(self.rate))

    def rates(self, s, x):
        x = np.asarray(x, dtype=float)
        if callable(self.rate):
            r = np.asarray(self.rate(s, x), dtype=float)
            return np.broadcast_to(r, np.broadcast_shapes(x.shape[:-1], np.shape(s))).copy()
        lead = np.broadcast_shapes(x.shape[:-1], np.shape(s))
        return np.full(lead, self.rate)


@dataclass(frozen=True)
class QuadResult:
    value: object
    residual: float


@dataclass(frozen=True, eq=False)
class JumpKernel:
    """Lévy kernel nu_s(x, dy) = atoms + density.

    A density is integrated either over declared ``boxes`` (piecewise
    smooth support away from the origin) or over the annulus
    ``inner_cutoff <= |y| <= support_radius``.  With ``inner_cutoff == 0`` the
    density must behave like |y|^-(d + small_jump_index) near the origin.

    ``linear_map`` (callable s -> d x d matrix) pushes the whole kernel
    forward under y -> M(s) y.  ``density_bound`` enables rejection
    sampling: density <= bound on boxes, or density <= bound |y|^-(d+alpha)
    on the annulus (alpha = small_jump_index, or 0).
    """

    dim: int
    atoms: tuple = ()
    density: Optional[Callable] = None
    inner_cutoff: float = 0.0
    small_jump_index: Optional[float] = None
    support_radius: float = 1.0
    boxes: Optional[tuple] = None
    density_bound: Optional[float] = None
    linear_map: Optional[Callable] = None

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for a in atoms:
            if a.location.shape != (self.dim,):
                raise ValueError(f"atom location {a.location} does not have dimension {self.dim}")
            if not np.any(a.location):
                raise ValueError("atoms at the origin are not allowed")
        if self.density is None:
            return
        if self.boxes is not None:
            boxes = tuple((np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in self.boxes)
            for lo, hi in boxes:
                if lo.shape != (self.dim,) or np.any(hi <= lo):
                    raise ValueError(f"bad box {lo}..{hi}")
                nearest = np.clip(0.0, lo, hi)
                if np.linalg.norm(nearest) == 0.0:
                    raise ValueError("density boxes must stay away from the origin")
            object.__setattr__(self, "boxes", boxes)
            r0 = min(float(np.linalg.norm(np.clip(0.0, lo, hi))) for lo, hi in boxes)
            R = max(float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)))) for lo, hi in boxes)
            object.__setattr__(self, "inner_cutoff", r0)
            object.__setattr__(self, "support_radius", R)
            return
        if self.dim > 3:
            raise ValueError("annulus densities are supported for d <= 3; declare boxes instead")
        if not self.support_radius > self.inner_cutoff >= 0:
            raise ValueError("need 0 <= inner_cutoff < support_radius")
        if self.inner_cutoff == 0:
            a = self.small_jump_index
            if a is None or not 0 <= a < 2:
                raise ValueError("inner_cutoff = 0 requires small_jump_index in [0, 2)")

    # -- structure --

    @property
    def is_empty(self):
        return not self.atoms and self.density is None

    @property
    def singular_at_origin(self):
        return self.density is not None and self.boxes is None and self.inner_cutoff == 0

    def map_at(self, s):
        if self.linear_map is None:
            return None
        m = np.atleast_2d(np.asarray(self.linear_map(s), dtype=float))
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"linear map must be {self.dim}x{self.dim}, got {m.shape}")
        return m

    def atom_points(self, s):
        if not self.atoms:
            return np.zeros((0, self.dim))
        pts = np.stack([a.location for a in self.atoms])
        m = self.map_at(s)
        return pts if m is None else pts @ m.T

    def atom_rates(self, s, x):
        """Rates of all atoms, shape (..., K)."""
        x = np.asarray(x, dtype=float)
        if not self.atoms:
            return np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(s)) + (0,))
        return np.stack([a.rates(s, x) for a in self.atoms], axis=-1)

    def base_nodes(self, order, budget=DEFAULT_BUDGET, inner=None):
        """Unmapped density nodes and geometric weights."""
        if self.boxes is not None:
            return box_nodes(self.boxes, order)
        lo = self.inner_cutoff if self.inner_cutoff > 0 else budget.delta
        if inner is not None:
            lo = max(self.inner_cutoff, inner) if self.inner_cutoff > 0 else inner
        if lo >= self.support_radius:
            return np.zeros((0, self.dim)), np.zeros(0)
        breaks = shell_breaks(lo, self.support_radius, budget.shell_ratio)
        return annular_nodes(self.dim, breaks, order)

    def jump_nodes(self, s, x, order, budget=DEFAULT_BUDGET, inner=None):
        """Density nodes mapped to jump space, weights times density."""
        y, w = self.base_nodes(order, budget, inner)
        dens = np.asarray(self.density(s, np.asarray(x, dtype=float), y), dtype=float)
        dens = np.broadcast_to(dens, w.shape)
        m = self.map_at(s)
        pts = y if m is None else y @ m.T
        return pts, w * dens, dens

    def small_ball_moments(self, s, x, budget=DEFAULT_BUDGET):
        """Second-moment matrix and third absolute moment of nu on |y| < delta.

        Uses the declared power law |y|^-(d + alpha) anchored at radius
        delta.  Zero unless the density is singular at the origin.
        """
        d = self.dim
        if not self.singular_at_origin:
            return np.zeros((d, d)), 0.0
        delta, alpha = budget.delta, self.small_jump_index
        u, wu = sphere_nodes(d, max(budget.order, 8))
        rho = np.asarray(self.density(s, np.asarray(x, float), delta * u), dtype=float)
        rho = np.broadcast_to(rho, wu.shape)
        ang = (wu * rho)[:, None, None] * (u[:, :, None] * u[:, None, :])
        m2 = delta ** (d + 2) / (2 - alpha) * ang.sum(axis=0)
        m3 = delta ** (d + 3) / (3 - alpha) * float(np.sum(wu * rho))
        m = self.map_at(s)
        if m is not None:
            m2 = m @ m2 @ m.T
            m3 *= np.linalg.norm(m, 2) ** 3
        return m2, m3

    def with_map(self, linear_map):
        """Compose ``linear_map`` after any existing map."""
        if self.linear_map is None:
            new = linear_map
        else:
            old = self.linear_map

            def new(s, _a=linear_map, _b=old):
                return np.asarray(_a(s)) @ np.asarray(_b(s))
        return replace(self, linear_map=new)


def integrate_jumps(kernel, s, x, integrand, budget=DEFAULT_BUDGET, small_ball=None, what="jump integral"):
    """Integrate ``integrand(y)`` against nu_s(x, dy).

    ``integrand`` maps points (m, d) to values of shape (m,) or (m, k).
    ``small_ball(m2, m3)`` returns (correction, remainder bound) for the
    part of the measure inside the quadrature's inner radius; it is only
    consulted for densities singular at the origin.

    Atoms are summed exactly.  The density part is computed at successive
    node doublings until two consecutive values agree to tolerance.
    """
    x = np.asarray(x, dtype=float)
    total = 0.0
    if kernel.atoms:
        pts = kernel.atom_points(s)
        rates = kernel.atom_rates(s, x)
        vals = np.asarray(integrand(pts), dtype=float)
        total = np.tensordot(rates, vals, axes=(0, 0))
    if kernel.density is None:
        return QuadResult(total, 0.0)
    prev = None
    diff = math.inf
    for n in budget.orders():
        pts, w, _ = kernel.jump_nodes(s, x, n, budget)
        val = np.tensordot(w, np.asarray(integrand(pts), dtype=float), axes=(0, 0))
        if prev is not None:
            diff = float(np.max(np.abs(val - prev)))
            scale = float(np.max(np.abs(val))) if np.size(val) else 0.0
            if diff <= max(budget.rtol * scale, budget.atol):
                break
        prev = val
    else:
        raise QuadratureError(
            f"{what} did not converge within {budget}: residual {diff:.3e}", residual=diff)
    residual = diff
    if small_ball is not None and kernel.singular_at_origin:
        m2, m3 = kernel.small_ball_moments(s, x, budget)
        corr, bound = small_ball(m2, m3)
        val = val + corr
        residual += bound
    return QuadResult(total + val, residual)


# --- triplets -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Triplet:
    """Time/state-dependent characteristics (b, Sigma, nu) in rate form."""

    dim: int
    drift: Callable
    diffusion: Callable
    jumps: JumpKernel
    spatially_homogeneous: bool = False
    rate_convention: str = "instantaneous-rate"
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rate_convention != "instantaneous-rate":
            raise ValueError("only the instantaneous-rate convention is supported")
        if self.jumps.dim != self.dim:
            raise ValueError("jump kernel dimension does not match triplet")

    @classmethod
    def build(cls, dim, drift=None, diffusion=None, jumps=None, **kw):
        """Convenience constructor accepting constant vectors/matrices."""
        if drift is None:
            drift = np.zeros(dim)
        if not callable(drift):
            drift = ConstantDrift(drift)
        if diffusion is None:
            diffusion = np.zeros((dim, dim))
        if not callable(diffusion):
            diffusion = ConstantDiffusion(diffusion)
        if jumps is None:
            jumps = JumpKernel(dim)
        return cls(dim, drift, diffusion, jumps, **kw)

    def b(self, s, x):
        return np.asarray(self.drift(s, np.asarray(x, dtype=float)), dtype=float)

    def sigma(self, s, x):
        return np.asarray(self.diffusion(s, np.asarray(x, dtype=float)), dtype=float)

    @property
    def jump_only(self):
        return isinstance(self.diffusion, ConstantDiffusion) and not np.any(self.diffusion.matrix)


# --- symbol ---------------------------------------------------------------------


def eval_symbol_with_residual(triplet, s, x, xi, budget=DEFAULT_BUDGET):
    """Symbol p_s(x, xi) together with the quadrature residual estimate."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    b = triplet.b(s, x)
    S = triplet.sigma(s, x)
    val = 1j * float(b @ xi) - 0.5 * float(xi @ S @ xi)
    k = triplet.jumps
    if k.is_empty:
        return QuadResult(val, 0.0)

    def integrand(y):
        z = y @ xi
        chi = cutoff(y)
        return np.column_stack([np.cos(z) - 1.0, np.sin(z) - z * chi])

    def small(m2, m3):
        corr = np.array([-0.5 * float(xi @ m2 @ xi), 0.0])
        return corr, float(np.linalg.norm(xi)) ** 3 / 6.0 * m3

    res = integrate_jumps(k, s, x, integrand, budget, small, what="symbol jump integral")
    re, im = np.asarray(res.value, dtype=float).reshape(2)
    return QuadResult(val + complex(re, im), res.residual)


def eval_symbol(triplet, s, x, xi, budget=DEFAULT_BUDGET):
    """p_s(x, xi) = i b.xi - xi.Sigma xi / 2 + ∫(e^{i xi.y} - 1 - i xi.y chi(y)) nu(dy)."""
    return eval_symbol_with_residual(triplet, s, x, xi, budget).value


# --- masses ---------------------------------------------------------------------


def levy_mass(kernel, s, x, region: Region = Everything(), budget=DEFAULT_BUDGET):
    """nu_s(x, region): atom rates inside the region plus the density integral."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    if kernel.atoms:
        inside = region.contains(kernel.atom_points(s))
        total += float(np.sum(kernel.atom_rates(s, x)[..., inside]))
    if kernel.density is None:
        return total
    m = kernel.map_at(s)

    if kernel.boxes is not None and m is None:
        pieces = []
        for lo, hi in kernel.boxes:
            sub = region.intersect_box(lo, hi)
            if sub is None:
                pieces = None
                break
            pieces.extend(p for p in sub if np.all(p[1] > p[0]))
        if pieces is not None:
            if not pieces:
                return total
            prev = None
            for n in budget.orders():
                y, w = box_nodes(pieces, n)
                val = float(np.sum(w * kernel.density(s, x, y)))
                if prev is not None and abs(val - prev) <= max(budget.rtol * abs(val), budget.atol):
                    return total + val
                prev = val
            raise QuadratureError("levy_mass did not converge", residual=abs(val - prev))

    inner = None
    if kernel.singular_at_origin:
        rmin = region.min_radius()
        if m is not None and rmin > 0:
            norm = np.linalg.norm(m, 2)
            rmin = rmin / norm if norm > 0 else math.inf
        if rmin > 0:
            inner = min(rmin, budget.delta)

    def integrand(y):
        return region.contains(y).astype(float)

    prev = None
    for n in budget.orders():
        y, w = kernel.base_nodes(n, budget, inner)
        dens = np.broadcast_to(np.asarray(kernel.density(s, x, y), dtype=float), w.shape)
        pts = y if m is None else y @ m.T
        val = float(np.sum(w * dens * integrand(pts)))
        if prev is not None and abs(val - prev) <= max(budget.rtol * abs(val), budget.atol):
            break
        prev = val
    else:
        raise QuadratureError("levy_mass did not converge", residual=abs(val - prev))
    if kernel.singular_at_origin and inner is None and val > 0:
        raise IntegrabilityError(
            f"region reaches the origin where the density blows up like |y|^-(d+{kernel.small_jump_index});"
            " its Lévy mass is infinite")
    return total + val


# --- validation -----------------------------------------------------------------


@dataclass(frozen=True)
class ValidationEntry:
    check: str
    point: tuple
    passed: bool
    value: float
    tolerance: float


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def add(self, check, point, passed, value, tolerance):
        self.entries.append(ValidationEntry(check, tuple(point), bool(passed), float(value), float(tolerance)))

    def to_dict(self):
        return {
            "passed": self.passed,
            "entries": [
                {"check": e.check, "point": [_jsonable(p) for p in e.point], "passed": e.passed,
                 "value": e.value, "tolerance": e.tolerance}
                for e in self.entries
            ],
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _xi_sample(d):
    eye = np.eye(d)
    base = [eye[i] for i in range(d)] + [np.ones(d) / math.sqrt(d)]
    if d > 1:
        alt = np.ones(d)
        alt[1::2] = -1
        base.append(alt / math.sqrt(d))
    return [c * v for v in base for c in (0.5, 1.0, 4.0, 16.0)]


def _lk_integrability(kernel, s, x, budget):
    def integrand(y):
        return np.minimum(1.0, np.sum(y * y, axis=-1))

    def small(m2, m3):
        return float(np.trace(m2)), 0.0

    return float(integrate_jumps(kernel, s, x, integrand, budget, small, what="integrability").value)


def _test_regions(d):
    from .regions import MixedRegion, NegativeOrthant, PositiveOrthant, Union

    regions = {}
    for r in (0.5, 1.0, 2.0):
        out = OutsideBall(r)
        regions[f"|y|>={r}"] = out
        for name, reg in (("positive", PositiveOrthant()), ("negative", NegativeOrthant()),
                          ("mixed", MixedRegion())):
            regions[f"{name}&|y|>={r}"] = _Intersection((reg, out))
    return regions


@dataclass(frozen=True)
class _Intersection(Region):
    parts: tuple

    @property
    def touches_origin(self):
        return all(p.touches_origin for p in self.parts)

    def contains(self, y):
        out = np.ones(np.shape(y)[:-1], dtype=bool)
        for p in self.parts:
            out &= p.contains(y)
        return out

    def min_radius(self):
        return max(p.min_radius() for p in self.parts)


def validate_triplet(triplet, time_grid, space_grid, tol=1e-6, symbol_bound=math.inf,
                     budget=DEFAULT_BUDGET):
    """Grid checks of the standing hypotheses on a triplet.

    Checks: Sigma PSD, Lévy integrability, s-continuity of the symbol
    (central finite-difference modulus), the growth ratio
    |p|/(1+|xi|^2), spatial homogeneity for additive triplets, and
    monotonicity of cumulative characteristics for additive triplets.
    """
    time_grid = [float(t) for t in time_grid]
    space_grid = [np.asarray(x, dtype=float) for x in space_grid]
    if not time_grid or not space_grid:
        raise ValueError("validation grids must be nonempty")
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = triplet.dim
    k = triplet.jumps
    rep = ValidationReport()
    xis = _xi_sample(d)
    h = 1e-6

    for s in time_grid:
        for x in space_grid:
            S = triplet.sigma(s, x)
            asym = float(np.max(np.abs(S - S.T)))
            rep.add("sigma-symmetric", (s, x), asym <= tol, asym, tol)
            mineig = float(np.min(np.linalg.eigvalsh(0.5 * (S + S.T))))
            rep.add("sigma-psd", (s, x), mineig >= -tol, mineig, tol)

            if k.atoms:
                r = k.atom_rates(s, x)
                rep.add("atom-rates-nonneg", (s, x), np.all(r >= 0), float(np.min(r)), 0.0)
            if k.density is not None:
                _, _, dens = k.jump_nodes(s, x, budget.order, budget)
                mind = float(np.min(dens)) if dens.size else 0.0
                rep.add("density-nonneg", (s, x), mind >= 0, mind, 0.0)
            try:
                lk = _lk_integrability(k, s, x, budget)
                ok = math.isfinite(lk)
            except (QuadratureError, FloatingPointError) as exc:
                lk, ok = getattr(exc, "residual", None) or math.inf, False
            rep.add("levy-integrability", (s, x), ok, lk, math.inf)

            cont, ratio = 0.0, 0.0
            for xi in xis:
                p0 = eval_symbol(triplet, s, x, xi, budget)
                pp = eval_symbol(triplet, s + h, x, xi, budget)
                pm = eval_symbol(triplet, max(s - h, 0.0), x, xi, budget) if s > 0 else p0
                cont = max(cont, abs(pp - p0), abs(p0 - pm))
                ratio = max(ratio, abs(p0) / (1.0 + float(xi @ xi)))
            rep.add("symbol-s-continuity", (s, x), cont <= tol, cont, tol)
            rep.add("symbol-bounded", (s, x), math.isfinite(ratio) and ratio <= symbol_bound,
                    ratio, symbol_bound)

    if triplet.spatially_homogeneous:
        x0 = space_grid[0]
        for s in time_grid:
            for x in space_grid[1:]:
                spread = 0.0
                for xi in xis[:4]:
                    spread = max(spread, abs(eval_symbol(triplet, s, x, xi, budget)
                                             - eval_symbol(triplet, s, x0, xi, budget)))
                rep.add("spatial-homogeneity", (s, x), spread <= tol, spread, tol)
        _check_cumulative_monotone(triplet, sorted(time_grid), x0, tol, budget, rep)
    return rep


def _check_cumulative_monotone(triplet, times, x0, tol, budget, rep):
    """Trapezoidal cumulative Sigma_t and nu_t(B) must be nondecreasing in t."""
    if times[0] > 0:
        times = [0.0] + times
    regions = _test_regions(triplet.dim)
    k = triplet.jumps
    for t0, t1 in zip(times[:-1], times[1:]):
        dt = t1 - t0
        inc_S = 0.5 * dt * (triplet.sigma(t0, x0) + triplet.sigma(t1, x0))
        mineig = float(np.min(np.linalg.eigvalsh(0.5 * (inc_S + inc_S.T))))
        rep.add("cumulative-sigma-monotone", (t1,), mineig >= -tol, mineig, tol)
        for name, reg in regions.items():
            m0 = levy_mass(k, t0, x0, reg, budget)
            m1 = levy_mass(k, t1, x0, reg, budget)
            inc = 0.5 * dt * (m0 + m1)
            rep.add(f"cumulative-nu-monotone[{name}]", (t1,), inc >= -tol, inc, tol)


# --- deterministic volatility ---------------------------------------------------


def make_deterministic_volatility(base, sigma, budget=DEFAULT_BUDGET):
    """Additive triplet of X_t = ∫_0^t sigma(s) dL_s for a Lévy triplet ``base``.

    Rates: drift sigma(s) b + compensator correction, diffusion
    sigma(s) Sigma sigma(s)^T, jumps pushed forward by y -> sigma(s) y.
    The correction ∫ sigma y (chi(sigma y) - chi(y)) nu(dy) keeps the law
    independent of where the cut-off sphere lands after the map.
    """
    if not base.spatially_homogeneous:
        raise ValueError("deterministic volatility needs a spatially homogeneous base triplet")
    d = base.dim
    x0 = np.zeros(d)
    m0 = np.atleast_2d(np.asarray(sigma(0.0), dtype=float))
    if m0.shape != (d, d):
        raise ValueError(f"volatility must be a square {d}x{d} matrix, got shape {m0.shape}")
    for t in (0.0, 1.0, 2.5):
        if not (np.allclose(base.b(t, x0), base.b(0.0, x0))
                and np.allclose(base.sigma(t, x0), base.sigma(0.0, x0))):
            raise ValueError("base triplet must have time-constant characteristics")
    b0 = base.b(0.0, x0)
    S0 = base.sigma(0.0, x0)
    k = base.jumps
    if k.linear_map is not None:
        raise ValueError("base jump kernel must not carry a linear map")

    def sig(s):
        return np.atleast_2d(np.asarray(sigma(float(s)), dtype=float))

    def correction(s):
        if k.is_empty:
            return np.zeros(d)
        m = sig(s)

        def integrand(y):
            z = y @ m.T
            return z * (cutoff(z) - cutoff(y))[:, None]

        return np.asarray(integrate_jumps(k, 0.0, x0, integrand, budget, what="cut-off correction").value,
                          dtype=float).reshape(d)

    class _Drift:
        def __call__(self, s, x):
            x = np.asarray(x, dtype=float)
            s_arr = np.asarray(s, dtype=float)
            uniq, inv = np.unique(s_arr.ravel(), return_inverse=True)
            vals = np.stack([sig(u) @ b0 + correction(u) for u in uniq])
            out = vals[inv].reshape(s_arr.shape + (d,))
            return np.broadcast_to(out, np.broadcast_shapes(x.shape, out.shape)).copy()

        def __repr__(self):
            return f"VolatilityDrift(b={b0.tolist()})"

    class _Diffusion:
        def __call__(self, s, x):
            x = np.asarray(x, dtype=float)
            s_arr = np.asarray(s, dtype=float)
            uniq, inv = np.unique(s_arr.ravel(), return_inverse=True)
            vals = np.stack([sig(u) @ S0 @ sig(u).T for u in uniq])
            out = vals[inv].reshape(s_arr.shape + (d, d))
            lead = np.broadcast_shapes(x.shape[:-1], s_arr.shape)
            return np.broadcast_to(out, lead + (d, d)).copy()

    jumps = k.with_map(sig) if not k.is_empty else k
    return Triplet(d, _Drift(), _Diffusion(), jumps, spatially_homogeneous=True,
                   name=f"{base.name}|volatility" if base.name else "volatility",
                   meta={"base": base, "volatility": sigma})
