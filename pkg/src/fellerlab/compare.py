"""Semigroup domination harness: generator hypothesis first, then Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .dependence import _mean_se, check_stochastic_monotonicity
from .generator import check_generator_domination
from .quadrature import DEFAULT_BUDGET
from .simulate import evolution_estimate, simulate

__all__ = ["DominationReport", "dominance_harness", "crn_compatible"]

Z_CRIT = 3.0


@dataclass
class DominationReport:
    hypothesis: object
    rows: list
    verdict: str
    monotonicity: str
    common_random_numbers: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "hypothesis": self.hypothesis.to_dict(),
            "monotonicity": self.monotonicity,
            "common_random_numbers": self.common_random_numbers,
            "rows": self.rows,
            "notes": self.notes,
        }


def crn_compatible(tx, ty, scheme_x, scheme_y):
    """Streams can be shared when both schemes truncate and step identically."""
    return (scheme_x.to_dict() == scheme_y.to_dict()
            and scheme_x.truncation(tx.jumps) == scheme_y.truncation(ty.jumps))


def dominance_harness(triplet_x, triplet_y, suite, times, starts, n_paths, scheme, scheme_y=None,
                      grid=None, tol=None, budget=DEFAULT_BUDGET, monotone="asserted",
                      z_crit=Z_CRIT):
    """Test S_{s,t} f <= T_{s,t} f, where X has evolution S and Y has T.

    The generator inequality I(q_s) f >= I(p_s) f is scanned first over
    ``grid`` (default: every (s, x0) from ``times`` and ``starts``); if it
    fails no simulation runs.  ``monotone`` is ``"asserted"`` (the caller
    vouches for stochastic monotonicity of X) or ``"checked"`` (screened
    empirically on ordered pairs of starts).
    """
    if triplet_x.dim != triplet_y.dim:
        raise ValueError(f"dimension mismatch: {triplet_x.dim} vs {triplet_y.dim}")
    if monotone not in ("asserted", "checked"):
        raise ValueError("monotone must be 'asserted' or 'checked'")
    times = [(float(s), float(t)) for s, t in times]
    for s, t in times:
        if not t > s:
            raise ValueError(f"need s < t, got ({s}, {t})")
    starts = [np.asarray(x, dtype=float) for x in starts]
    if grid is None:
        grid = [(s, x) for s, _ in times for x in starts]
    hyp = check_generator_domination(triplet_x, triplet_y, suite, grid, tol, budget)
    scheme_y = scheme if scheme_y is None else scheme_y
    crn = crn_compatible(triplet_x, triplet_y, scheme, scheme_y)
    notes = []
    if not hyp.holds:
        return DominationReport(hyp, [], "hypothesis-failed", monotone, crn)
    if not crn:
        warnings.warn("schemes differ; the two processes use independent streams")
        notes.append("independent streams: schemes differ")
        if scheme_y.seed == scheme.seed:
            from dataclasses import replace
            scheme_y = replace(scheme_y, seed=scheme.seed + 1)
    if monotone == "checked":
        ordered = [(a, b) for a in starts for b in starts if np.all(a <= b) and np.any(a < b)]
        for s, t in times:
            rep = check_stochastic_monotonicity(triplet_x, ordered, t - s, suite, n_paths, scheme,
                                                s=s, z_crit=z_crit, budget=budget)
            if rep.verdict == "violated":
                notes.append(f"stochastic monotonicity of X violated on ({s}, {t})")
    rows = []
    for s, t in times:
        for x0 in starts:
            ex = simulate(triplet_x, s, x0, t, [t], n_paths, scheme, budget)
            ey = simulate(triplet_y, s, x0, t, [t], n_paths, scheme_y, budget)
            for f in suite:
                a = evolution_estimate(ex, t, f)
                b = evolution_estimate(ey, t, f)
                if crn:
                    d = np.asarray(f(ey.at(t)), float) - np.asarray(f(ex.at(t)), float)
                    diff, se = _mean_se(d)
                else:
                    diff = b.estimate - a.estimate
                    se = math.hypot(a.stderr, b.stderr)
                if se > 0:
                    z = diff / se
                else:
                    z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
                rows.append({"function": f.name, "s": s, "t": t, "x0": x0.tolist(),
                             "S_f": a.estimate, "T_f": b.estimate, "difference": diff,
                             "stderr": se, "z": z})
    violated = any(r["z"] < -z_crit for r in rows)
    return DominationReport(hyp, rows, "violated" if violated else "dominates-on-suite",
                            monotone, crn, notes)
