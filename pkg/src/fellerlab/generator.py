"""Extended generator, carré-du-champ and grid scans of generator inequalities."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .functions import product
from .kernel import QuadResult, cutoff, integrate_jumps
from .quadrature import DEFAULT_BUDGET, QuadratureError

__all__ = [
    "InequalityReport",
    "apply_generator",
    "apply_generator_with_residual",
    "generator_batch",
    "gamma",
    "gamma_batch",
    "gamma_jump_identity",
    "check_association_generator",
    "check_generator_domination",
    "default_tolerance",
]

ATOMIC_SCAN_TOL = 1e-6
DENSITY_SCAN_TOL = 1e-4


def default_tolerance(*triplets):
    return DENSITY_SCAN_TOL if any(t.jumps.density is not None for t in triplets) else ATOMIC_SCAN_TOL


def _third_derivative_scale(f, x, h=1e-3):
    d = x.shape[-1]
    worst = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        dh = (f.hessian(x + e) - f.hessian(x - e)) / (2 * h)
        worst = max(worst, float(np.linalg.norm(dh, 2)))
    return worst


def _local_part(triplet, s, x, grads, hessians):
    b = triplet.b(s, x)
    S = triplet.sigma(s, x)
    return grads @ b + 0.5 * np.einsum("ij,kij->k", S, hessians)


def generator_batch(triplet, s, fs, x, budget=DEFAULT_BUDGET):
    """I(p_s) f(x) for several smooth functions at once; returns QuadResult."""
    x = np.asarray(x, dtype=float)
    for f in fs:
        if not f.smooth:
            raise ValueError(f"{f.name} has no gradient/Hessian; the generator needs C^2 data")
    f0 = np.array([float(f.value(x)) for f in fs])
    g0 = np.stack([f.gradient(x) for f in fs])
    h0 = np.stack([f.hessian(x) for f in fs])
    out = _local_part(triplet, s, x, g0, h0)
    k = triplet.jumps
    if k.is_empty:
        return QuadResult(out, 0.0)

    def integrand(y):
        shifted = x + y
        vals = np.stack([f.value(shifted) for f in fs], axis=-1)
        return vals - f0 - (y @ g0.T) * cutoff(y)[:, None]

    def small(m2, m3):
        corr = 0.5 * np.einsum("ij,kij->k", m2, h0)
        l3 = max(_third_derivative_scale(f, x) for f in fs)
        return corr, l3 / 6.0 * m3

    res = integrate_jumps(k, s, x, integrand, budget, small, what="generator jump integral")
    return QuadResult(out + np.asarray(res.value, dtype=float), res.residual)


def apply_generator_with_residual(triplet, s, f, x, budget=DEFAULT_BUDGET):
    res = generator_batch(triplet, s, [f], x, budget)
    return QuadResult(float(res.value[0]), res.residual)


def apply_generator(triplet, s, f, x, budget=DEFAULT_BUDGET):
    """b.grad f + tr(Sigma Hess f)/2 + ∫(f(x+y) - f(x) - grad f.y chi(y)) nu_s(x, dy)."""
    return apply_generator_with_residual(triplet, s, f, x, budget).value


def gamma_batch(triplet, s, pairs, x, budget=DEFAULT_BUDGET):
    """Gamma(f, g)(x) = I(fg) - f I(g) - g I(f) for a list of (f, g) pairs.

    Each distinct function is pushed through the generator once; the
    products are assembled with the exact product rule.
    """
    x = np.asarray(x, dtype=float)
    singles, index = [], {}
    for f, g in pairs:
        for h in (f, g):
            if id(h) not in index:
                index[id(h)] = len(singles)
                singles.append(h)
    prods = [product(f, g) for f, g in pairs]
    res = generator_batch(triplet, s, singles + prods, x, budget)
    vals = np.asarray(res.value)
    n = len(singles)
    out = np.empty(len(pairs))
    for j, (f, g) in enumerate(pairs):
        i_f, i_g = index[id(f)], index[id(g)]
        out[j] = vals[n + j] - float(f.value(x)) * vals[i_g] - float(g.value(x)) * vals[i_f]
    return QuadResult(out, res.residual)


def gamma(triplet, s, f, g, x, budget=DEFAULT_BUDGET):
    """Carré-du-champ I(fg)(x) - f(x) I(g)(x) - g(x) I(f)(x)."""
    return float(gamma_batch(triplet, s, [(f, g)], x, budget).value[0])


def gamma_jump_identity(triplet, s, f, g, x, budget=DEFAULT_BUDGET):
    """∫ (f(x+y) - f(x)) (g(x+y) - g(x)) nu_s(x, dy), computed directly."""
    x = np.asarray(x, dtype=float)
    k = triplet.jumps
    if k.is_empty:
        return 0.0
    fx, gx = float(f.value(x)), float(g.value(x))

    def integrand(y):
        return (f.value(x + y) - fx) * (g.value(x + y) - gx)

    def small(m2, m3):
        if not (f.smooth and g.smooth):
            raise QuadratureError("singular kernels need smooth f, g for the small-jump term")
        gf, gg = f.gradient(x), g.gradient(x)
        # |Δf Δg - (∇f.y)(∇g.y)| <= (|∇f| ||Hg|| + |∇g| ||Hf||) |y|^3 / 2 to leading order
        lip = float(np.linalg.norm(gf) * np.linalg.norm(g.hessian(x), 2)
                    + np.linalg.norm(gg) * np.linalg.norm(f.hessian(x), 2))
        return float(gf @ m2 @ gg), 0.5 * lip * m3

    return float(integrate_jumps(k, s, x, integrand, budget, small, what="jump product integral").value)


@dataclass
class InequalityReport:
    scanned: int
    min_slack: float
    witness: object
    verdict: str
    tolerance: float

    @property
    def holds(self):
        return self.verdict == "holds-on-grid"

    def to_dict(self):
        return {
            "scanned": self.scanned,
            "min_slack": self.min_slack,
            "witness": self.witness,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
        }


def _reduce(records, tol):
    """Deterministic reduction: smallest slack, ties broken by scan order."""
    if not records:
        raise ValueError("nothing was scanned")
    best = min(range(len(records)), key=lambda i: (records[i][0], i))
    slack, wit = records[best]
    violated = slack < -tol
    return InequalityReport(
        scanned=len(records), min_slack=float(slack),
        witness=wit if violated else None,
        verdict="violated" if violated else "holds-on-grid", tolerance=tol,
    )


def _grid(grid):
    out = []
    for s, x in grid:
        out.append((float(s), np.asarray(x, dtype=float)))
    if not out:
        raise ValueError("grid must be nonempty")
    return out


def check_association_generator(triplet, pairs, grid, tol=None, budget=DEFAULT_BUDGET, records=None):
    """Scan Gamma(f, g) >= -tol over monotone pairs and (s, x) grid points.

    ``records``, if a list, receives one dict per scanned tuple.
    """
    tol = default_tolerance(triplet) if tol is None else float(tol)
    for f, g in pairs:
        if not (f.monotone and g.monotone):
            raise ValueError(f"pair ({f.name}, {g.name}) is not monotone-flagged")
    rows = []
    for s, x in _grid(grid):
        vals = gamma_batch(triplet, s, pairs, x, budget).value
        for (f, g), v in zip(pairs, vals):
            wit = {"s": s, "x": x.tolist(), "f": f.name, "g": g.name}
            rows.append((float(v), wit))
            if records is not None:
                records.append({**wit, "gamma": float(v)})
    return _reduce(rows, tol)


def check_generator_domination(triplet_x, triplet_y, family, grid, tol=None, budget=DEFAULT_BUDGET,
                               records=None):
    """Scan I(q_s) f - I(p_s) f >= -tol (Y dominates X) over a monotone family."""
    if triplet_x.dim != triplet_y.dim:
        raise ValueError(f"dimension mismatch: {triplet_x.dim} vs {triplet_y.dim}")
    tol = default_tolerance(triplet_x, triplet_y) if tol is None else float(tol)
    for f in family:
        if not f.monotone:
            raise ValueError(f"{f.name} is not monotone-flagged")
    rows = []
    for s, x in _grid(grid):
        gx = generator_batch(triplet_x, s, family, x, budget).value
        gy = generator_batch(triplet_y, s, family, x, budget).value
        for f, a, b in zip(family, gx, gy):
            wit = {"s": s, "x": x.tolist(), "f": f.name}
            rows.append((float(b - a), wit))
            if records is not None:
                records.append({**wit, "slack": float(b - a)})
    return _reduce(rows, tol)
