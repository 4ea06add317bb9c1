"""Monte Carlo screens for positive dependence of X_t given X_s = x.

Every test statistic is the signed quantity whose nonnegativity the
dependence notion asserts, with a delta-method standard error.  A finite
suite can only refute: verdicts are ``consistent``, ``violated`` or
``inconclusive``, never "holds".
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .functions import (
    decreasing_plateau,
    monotone_pairs,
    plateau,
    plateau_family,
    tensor_plateau,
    threshold_indicator,
)
from .rng import StreamFactory
from .simulate import simulate

__all__ = [
    "STRUCTURES",
    "IMPLICATIONS",
    "OrthantTest",
    "DependenceReport",
    "SuiteError",
    "default_suite",
    "estimate_dependence",
    "independent_copy",
    "check_stochastic_monotonicity",
    "MonotonicityReport",
    "consistency",
    "ConsistencyVerdict",
]

STRUCTURES = ("A", "WA", "PSA", "PSD", "PUOD", "PLOD", "POD")

# direct edges of the implication map; consistency() uses the transitive closure
IMPLICATIONS = (
    ("A", "WA"),
    ("A", "PSA"),
    ("WA", "PSD"),
    ("PSA", "POD"),
    ("PSD", "POD"),
    ("POD", "PUOD"),
    ("POD", "PLOD"),
)

Z_CRIT = 3.0


class SuiteError(ValueError):
    """The suite does not match the requested structure."""


@dataclass(frozen=True)
class OrthantTest:
    """Product test E prod f_i(X_i) >= prod E f_i(X_i).

    ``marginals[i]`` acts on coordinate i; all nonnegative, nondecreasing
    for ``upper`` and nonincreasing otherwise.
    """

    marginals: tuple
    upper: bool = True

    @property
    def name(self):
        return "*".join(f.name for f in self.marginals)


def _is_antitone(f):
    kind = f.params.get("kind")
    return kind == "decreasing_plateau" or (kind == "indicator" and not f.params.get("upper", True))


def _is_nonneg_monotone(f):
    return f.params.get("kind") in ("plateau", "tensor_plateau") or (
        f.params.get("kind") == "indicator" and f.params.get("upper", False))


def default_suite(kind, dim, centers=(-1.5, -0.5, 0.5, 1.5), widths=(0.25, 1.0)):
    """Built-in suite for a structure tag."""
    if kind not in STRUCTURES:
        raise SuiteError(f"unknown structure {kind!r}")
    if kind in ("A", "PSA"):
        return monotone_pairs(plateau_family(dim, centers, widths))
    if kind == "WA":
        singles = [plateau(i, c, w, dim) for w in widths for i in range(dim) for c in centers]
        return [(f, g) for f, g in itertools.combinations(singles, 2) if not set(f.support) & set(g.support)]
    if kind == "PSD":
        return [tensor_plateau(c, w, dim) for w in widths for c in centers]
    if kind == "PUOD":
        tests = [OrthantTest(tuple(threshold_indicator(i, c, dim, upper=True) for i in range(dim)))
                 for c in centers]
        tests += [OrthantTest(tuple(plateau(i, c, w, dim) for i in range(dim)))
                  for w in widths for c in centers]
        return tests
    if kind == "PLOD":
        tests = [OrthantTest(tuple(threshold_indicator(i, c, dim, upper=False) for i in range(dim)), upper=False)
                 for c in centers]
        tests += [OrthantTest(tuple(decreasing_plateau(i, c, w, dim) for i in range(dim)), upper=False)
                  for w in widths for c in centers]
        return tests
    return {"PUOD": default_suite("PUOD", dim, centers, widths),
            "PLOD": default_suite("PLOD", dim, centers, widths)}


def _check_suite(kind, suite, dim):
    if kind in ("A", "WA", "PSA"):
        for item in suite:
            if not (isinstance(item, tuple) and len(item) == 2):
                raise SuiteError(f"{kind} suites hold (f, g) pairs")
            f, g = item
            if not (f.monotone and g.monotone):
                raise SuiteError(f"{kind} needs nondecreasing f, g; got {f.name}, {g.name}")
            if kind == "WA" and set(f.support) & set(g.support):
                raise SuiteError(f"WA needs disjoint coordinate sets; {f.name} and {g.name} overlap")
            if kind == "PSA" and not (f.supermodular and g.supermodular):
                raise SuiteError(f"PSA needs supermodular f, g; got {f.name}, {g.name}")
    elif kind == "PSD":
        for f in suite:
            if isinstance(f, tuple) or not f.supermodular:
                raise SuiteError("PSD suites hold supermodular functions")
    elif kind in ("PUOD", "PLOD"):
        for t in suite:
            if not isinstance(t, OrthantTest) or len(t.marginals) != dim:
                raise SuiteError(f"{kind} suites hold OrthantTest items with one marginal per coordinate")
            if t.upper != (kind == "PUOD"):
                raise SuiteError(f"{kind} test {t.name} has the wrong direction")
            for i, f in enumerate(t.marginals):
                if f.support != (i,):
                    raise SuiteError(f"marginal {f.name} must act on coordinate {i + 1} only")
                ok = _is_nonneg_monotone(f) if t.upper else _is_antitone(f)
                if not ok:
                    raise SuiteError(f"marginal {f.name} is not a nonnegative "
                                     f"{'nondecreasing' if t.upper else 'nonincreasing'} function")
    elif kind == "POD":
        if not (isinstance(suite, dict) and set(suite) == {"PUOD", "PLOD"}):
            raise SuiteError("POD suites are {'PUOD': [...], 'PLOD': [...]}")
        _check_suite("PUOD", suite["PUOD"], dim)
        _check_suite("PLOD", suite["PLOD"], dim)


@dataclass
class DependenceReport:
    structure: str
    tests: list
    verdict: str
    suite: str
    ensemble: dict
    z_crit: float = Z_CRIT
    parts: dict = field(default_factory=dict)

    @property
    def z_scores(self):
        return np.array([t["z"] for t in self.tests], dtype=float)

    def to_dict(self):
        return {"structure": self.structure, "verdict": self.verdict, "suite": self.suite,
                "ensemble": self.ensemble, "z_crit": self.z_crit, "tests": self.tests}


def _z(est, se):
    if se > 0:
        return est / se
    if est == 0:
        return math.nan
    return math.copysign(math.inf, est)


def _row(name, est, se, zc):
    z = _z(est, se)
    if math.isnan(z):
        status = "inconclusive"
    elif z < -zc:
        status = "violated"
    else:
        status = "consistent"
    return {"test": name, "estimate": float(est), "stderr": float(se), "z": float(z), "status": status}


def _mean_se(v):
    """Sample mean and standard error; exact zeros for a constant sample."""
    if np.all(v == v.flat[0]):
        return float(v.flat[0]), 0.0
    return float(v.mean()), float(np.std(v, ddof=1) / math.sqrt(v.size))


def _constant(v):
    return bool(np.all(v == v.flat[0]))


def _cov_stat(a, b):
    if _constant(a) or _constant(b):
        return 0.0, 0.0
    n = a.size
    ma, mb = a.mean(), b.mean()
    est = float(np.mean(a * b) - ma * mb)
    psi = (a - ma) * (b - mb) - est
    return est, float(np.std(psi, ddof=1) / math.sqrt(n))


def _product_stat(cols):
    """E prod a_i - prod E a_i with its influence-function standard error."""
    if sum(not _constant(c) for c in cols) <= 1:
        return 0.0, 0.0
    n = cols[0].size
    means = np.array([c.mean() for c in cols])
    prod_all = np.prod(np.stack(cols), axis=0)
    est = float(prod_all.mean() - np.prod(means))
    psi = prod_all - prod_all.mean()
    for i, c in enumerate(cols):
        others = np.prod(np.delete(means, i))
        psi = psi - (c - means[i]) * others
    return est, float(np.std(psi, ddof=1) / math.sqrt(n))


def independent_copy(X, seed):
    """Permute each coordinate across samples with an independent stream.

    The result has exactly the same marginal empirical distributions and
    independent coordinates.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    streams = StreamFactory(seed)
    idx = np.arange(n, dtype=np.uint64)
    out = np.empty_like(X)
    for j in range(d):
        u = streams.uniform(idx, 0, 100 + j, 1)[:, 0]
        out[:, j] = X[np.argsort(u, kind="stable"), j]
    return out


def _verdict(rows):
    if any(r["status"] == "violated" for r in rows):
        return "violated"
    if rows and all(r["status"] == "inconclusive" for r in rows):
        return "inconclusive"
    return "consistent"


def _ensemble_ref(ensemble, t):
    return {"spec_hash": ensemble.spec_hash, "seed": ensemble.scheme.seed, "t": float(t),
            "n_paths": ensemble.n_paths, "id": id(ensemble)}


def estimate_dependence(ensemble, t, kind, suite=None, z_crit=Z_CRIT, psd_seed=None, samples=None):
    """Screen one dependence structure on the ensemble's law at time t.

    ``samples`` may replace the ensemble (an (N, d) array), e.g. for
    direct tests of random vectors.
    """
    if kind not in STRUCTURES:
        raise SuiteError(f"unknown structure {kind!r}; expected one of {STRUCTURES}")
    X = ensemble.at(t) if samples is None else np.asarray(samples, dtype=float)
    d = X.shape[1]
    if suite is None:
        suite = default_suite(kind, d)
    _check_suite(kind, suite, d)
    ref = _ensemble_ref(ensemble, t) if ensemble is not None else {"t": float(t), "n_paths": X.shape[0]}
    if kind == "POD":
        up = estimate_dependence(ensemble, t, "PUOD", suite["PUOD"], z_crit, samples=samples)
        lo = estimate_dependence(ensemble, t, "PLOD", suite["PLOD"], z_crit, samples=samples)
        verdicts = {up.verdict, lo.verdict}
        if "violated" in verdicts:
            v = "violated"
        elif verdicts == {"consistent"}:
            v = "consistent"
        else:
            v = "inconclusive"
        return DependenceReport("POD", up.tests + lo.tests, v, "PUOD+PLOD", ref, z_crit,
                                parts={"PUOD": up.verdict, "PLOD": lo.verdict})
    rows = []
    if kind in ("A", "WA", "PSA"):
        cache = {}

        def vals(f):
            if id(f) not in cache:
                cache[id(f)] = np.asarray(f.value(X), dtype=float)
            return cache[id(f)]

        for f, g in suite:
            rows.append(_row(f"cov({f.name},{g.name})", *_cov_stat(vals(f), vals(g)), z_crit))
    elif kind == "PSD":
        seed = psd_seed if psd_seed is not None else (ensemble.scheme.seed + 7777 if ensemble else 7777)
        Xh = independent_copy(X, seed)
        for f in suite:
            diff = np.asarray(f.value(X), float) - np.asarray(f.value(Xh), float)
            rows.append(_row(f"E{f.name}(X)-E{f.name}(Xhat)", *_mean_se(diff), z_crit))
    else:
        for test in suite:
            cols = [np.asarray(f.value(X), dtype=float) for f in test.marginals]
            rows.append(_row(test.name, *_product_stat(cols), z_crit))
    return DependenceReport(kind, rows, _verdict(rows), f"{len(rows)} tests", ref, z_crit)


# --- stochastic monotonicity ----------------------------------------------------


@dataclass
class MonotonicityReport:
    rows: list
    verdict: str
    z_crit: float

    def to_dict(self):
        return {"rows": self.rows, "verdict": self.verdict, "z_crit": self.z_crit}


def check_stochastic_monotonicity(triplet, pairs, t, suite, n_paths, scheme, s=0.0, z_crit=Z_CRIT,
                                  budget=None):
    """One-sided tests of T_{s,t} f(y) - T_{s,t} f(x) >= 0 for ordered starts x <= y.

    Both starts share the scheme seed, so the comparison uses common
    random numbers.
    """
    from .quadrature import DEFAULT_BUDGET

    budget = budget or DEFAULT_BUDGET
    for f in suite:
        if not f.monotone:
            raise SuiteError(f"{f.name} is not monotone-flagged")
    rows = []
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(x > y):
            raise ValueError(f"start pair {x.tolist()}, {y.tolist()} is not coordinate-wise ordered")
        ex = simulate(triplet, s, x, t, [t], n_paths, scheme, budget)
        ey = simulate(triplet, s, y, t, [t], n_paths, scheme, budget)
        for f in suite:
            diff = np.asarray(f.value(ey.at(t)), float) - np.asarray(f.value(ex.at(t)), float)
            row = _row(f"{f.name}", *_mean_se(diff), z_crit)
            row.update({"x": x.tolist(), "y": y.tolist()})
            rows.append(row)
    return MonotonicityReport(rows, _verdict(rows), z_crit)


# --- implication-map consistency ------------------------------------------------


def _closure():
    reach = {s: set() for s in STRUCTURES}
    for a, b in IMPLICATIONS:
        reach[a].add(b)
    changed = True
    while changed:
        changed = False
        for a in STRUCTURES:
            new = set().union(*[reach[b] for b in reach[a]]) - reach[a]
            if new:
                reach[a] |= new
                changed = True
    return reach


@dataclass
class ConsistencyVerdict:
    passed: bool
    offending_edges: list

    def to_dict(self):
        return {"passed": self.passed, "offending_edges": self.offending_edges}


def consistency(reports):
    """Flag implications P => Q where P is strongly supported and Q is violated.

    "Strongly supported" means every finite z-score of P exceeds +z_crit.
    """
    if not reports:
        return ConsistencyVerdict(True, [])
    keys = {(r.ensemble.get("id"), r.ensemble.get("t")) for r in reports}
    if len(keys) > 1:
        raise ValueError("reports come from different ensembles or times")
    by = {r.structure: r for r in reports}
    reach = _closure()
    bad = []
    for p, rp in by.items():
        z = rp.z_scores
        z = z[np.isfinite(z)]
        strong = rp.verdict == "consistent" and z.size > 0 and bool(np.all(z > rp.z_crit))
        if not strong:
            continue
        for q in sorted(reach[p]):
            if q in by and by[q].verdict == "violated":
                bad.append(f"{p} => {q}")
    return ConsistencyVerdict(not bad, bad)
