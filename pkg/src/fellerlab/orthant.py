"""The mixed-orthant mass criterion nu_s(x, (R+^d ∪ R-^d)^c) = 0."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .kernel import IntegrabilityError, levy_mass
from .quadrature import DEFAULT_BUDGET
from .regions import MIXED, NEGATIVE, POSITIVE, Everything, MixedRegion, OutsideBall, sign_tags

__all__ = ["sign_region", "mixed_orthant_mass", "classify_dependence", "OrthantReport"]

ATOMIC_CRITERION_TOL = 1e-10
DENSITY_RELATIVE_FLOOR = 1e-6


def sign_region(y):
    """Tag a nonzero jump vector with its closed orthant, or ``mixed``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("sign_region takes a single vector")
    if not np.any(y):
        raise ValueError("the zero vector has no sign region")
    return {1: POSITIVE, -1: NEGATIVE, 0: MIXED}[int(sign_tags(y))]


def mixed_orthant_mass(triplet, s, x, budget=DEFAULT_BUDGET):
    """Atom rates with mixed sign pattern plus density mass on the mixed region.

    Infinite (``math.inf``) when a density singular at the origin charges
    the mixed region.
    """
    try:
        return levy_mass(triplet.jumps, s, x, MixedRegion(), budget)
    except IntegrabilityError:
        return math.inf


def _total_mass_scale(kernel, s, x, budget):
    """min(1, total mass) used for the relative density floor."""
    if kernel.density is None:
        return 1.0
    region = OutsideBall(budget.delta) if kernel.singular_at_origin else Everything()
    return min(1.0, levy_mass(kernel, s, x, region, budget))


@dataclass
class OrthantReport:
    masses: list
    max_mass: float
    witness: object
    verdict: str
    additive: bool
    time_grid: list
    space_grid: list
    tolerance: float
    caveats: list = field(default_factory=list)

    @property
    def holds(self):
        return self.verdict == "criterion-holds"

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "max_mass": self.max_mass,
            "witness": self.witness,
            "additive": self.additive,
            "time_grid": self.time_grid,
            "space_grid": self.space_grid,
            "tolerance": self.tolerance,
            "caveats": self.caveats,
            "masses": self.masses,
        }


def classify_dependence(triplet, time_grid, space_grid, tol=None, budget=DEFAULT_BUDGET):
    """Scan the mixed-orthant mass over a grid and decide the criterion.

    For additive triplets the spatial grid collapses to its first point.
    With a density kernel the effective tolerance at a point is
    max(tol, 1e-6 * min(1, total mass)).
    """
    time_grid = [float(t) for t in time_grid]
    space_grid = [np.asarray(x, dtype=float).tolist() for x in space_grid]
    if not time_grid or not space_grid:
        raise ValueError("time and space grids must be nonempty")
    tol = ATOMIC_CRITERION_TOL if tol is None else float(tol)
    k = triplet.jumps
    caveats = []
    if not triplet.jump_only:
        caveats.append("jump-criterion-only: the diffusion part is nonzero and is not assessed")
    xs = space_grid[:1] if triplet.spatially_homogeneous else space_grid
    if triplet.spatially_homogeneous:
        caveats.append(
            "additive: mixed mass is spatially constant; the verdict covers the listed times and,"
            " by continuity of the declared family, a countable dense set of times")
    masses = []
    worst, witness, fail = -1.0, None, False
    for s in time_grid:
        for x in xs:
            m = mixed_orthant_mass(triplet, s, x, budget)
            eff = tol
            if k.density is not None:
                eff = max(tol, DENSITY_RELATIVE_FLOOR * _total_mass_scale(k, s, x, budget))
            masses.append({"s": s, "x": x, "mass": m, "tolerance": eff})
            if m > eff:
                fail = True
            if m > worst:
                worst, witness = m, {"s": s, "x": x}
    return OrthantReport(
        masses=masses, max_mass=float(worst), witness=witness if fail else None,
        verdict="criterion-fails" if fail else "criterion-holds",
        additive=triplet.spatially_homogeneous, time_grid=time_grid, space_grid=xs,
        tolerance=tol, caveats=caveats,
    )
