"""Seeded Monte Carlo path ensembles and evolution estimates.

Jumps above the truncation level are simulated by thinning a dominating
Poisson clock.  Atoms use a rate bound; densities use a dominating
proposal intensity (constant on boxes, B |y|^-(d+alpha) on annuli) with a
space-time acceptance step, so no per-event quadrature is needed.

All randomness comes from :class:`fellerlab.rng.StreamFactory`, addressed
by (path, step, tag, index).  Paths never share draws, so an ensemble is
bit-identical however the paths are split across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import math
import os

import numpy as np
from scipy.special import ndtri
from scipy.stats import poisson

from .kernel import cutoff
from .quadrature import DEFAULT_BUDGET
from .rng import StreamFactory

__all__ = [
    "SimulationScheme",
    "SimulationError",
    "PathEnsemble",
    "EvolutionEstimate",
    "simulate_additive",
    "simulate_state_dependent",
    "simulate",
    "evolution_estimate",
    "ck_check",
    "CKReport",
    "save_ensemble",
    "load_ensemble",
]

TAG_GAUSS = 1
TAG_COUNT = 2
TAG_TIME = 3
TAG_MARK = 4

ENSEMBLE_MAGIC = b"FLENS001"


class SimulationError(RuntimeError):
    """Thinning bound violated or unsupported kernel for the simulator."""


@dataclass(frozen=True)
class SimulationScheme:
    """Discretisation and randomness settings.

    ``rate_bound`` dominates the total atom rate; when omitted it is the sum
    of constant atom rates (callable rates then require it).
    """

    dt: float = 0.01
    eps: float | None = None
    small_jumps: str = "discard"
    rate_bound: float | None = None
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.small_jumps not in ("discard", "gaussian"):
            raise ValueError("small_jumps must be 'discard' or 'gaussian'")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.rate_bound is not None and self.rate_bound < 0:
            raise ValueError("rate_bound must be nonnegative")

    def truncation(self, kernel):
        eps = max(kernel.inner_cutoff, 1e-3) if self.eps is None else self.eps
        if self.small_jumps == "discard" and kernel.density is not None and eps < kernel.inner_cutoff:
            raise ValueError("eps must be >= the kernel's inner cut-off")
        return eps

    def to_dict(self):
        return {"dt": self.dt, "eps": self.eps, "small_jumps": self.small_jumps,
                "rate_bound": self.rate_bound, "seed": self.seed}


@dataclass
class PathEnsemble:
    start_time: float
    x0: np.ndarray
    horizon: float
    times: np.ndarray
    states: np.ndarray  # (N, len(times), d)
    scheme: SimulationScheme
    stats: dict = field(default_factory=dict)
    seed_record: dict = field(default_factory=dict)
    spec_hash: str = ""

    @property
    def n_paths(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[2]

    def at(self, t):
        idx = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"time {t} is not an observation time; have {self.times.tolist()}")
        return self.states[:, idx[0], :]


@dataclass(frozen=True)
class EvolutionEstimate:
    function: str
    estimate: float
    stderr: float
    n_paths: int

    def to_dict(self):
        return {"function": self.function, "estimate": self.estimate, "stderr": self.stderr,
                "n_paths": self.n_paths}


# --- step grid ------------------------------------------------------------------


def _step_grid(s0, horizon, observe, dt):
    obs = sorted({float(t) for t in observe})
    if not obs:
        raise ValueError("need at least one observation time")
    if obs[0] < s0 - 1e-12 or obs[-1] > horizon + 1e-12:
        raise ValueError("observation times must lie in [start, horizon]")
    marks = sorted({float(s0), float(horizon), *obs})
    grid = [marks[0]]
    for a, b in zip(marks[:-1], marks[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        grid.extend(a + (b - a) * np.arange(1, n + 1) / n)
        grid[-1] = b
    grid = np.asarray(grid)
    obs_idx = [int(np.argmin(np.abs(grid - t))) for t in obs]
    return grid, np.asarray(obs), obs_idx


# --- jump proposal machinery ----------------------------------------------------


def _sphere_area(d):
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


class _Proposal:
    """Dominating intensities for atoms and the density above eps."""

    def __init__(self, kernel, scheme):
        self.k = kernel
        self.d = kernel.dim
        self.eps = scheme.truncation(kernel)
        atoms = kernel.atoms
        if atoms:
            if scheme.rate_bound is not None:
                self.atom_bound = float(scheme.rate_bound)
            elif all(not callable(a.rate) for a in atoms):
                self.atom_bound = float(sum(a.rate for a in atoms))
            else:
                raise SimulationError("state/time-dependent atom rates need a declared rate_bound")
        else:
            self.atom_bound = 0.0
        self.dens_bound = 0.0
        if kernel.density is None:
            return
        if kernel.density_bound is None:
            raise SimulationError(
                "the density has no normalised sampler: declare density_bound (rejection"
                " box/annulus envelope) or use an atom-only kernel")
        B = float(kernel.density_bound)
        if kernel.boxes is not None:
            self.vols = np.array([np.prod(hi - lo) for lo, hi in kernel.boxes])
            self.dens_bound = B * float(self.vols.sum())
        else:
            self.lo = max(self.eps, kernel.inner_cutoff)
            self.hi = kernel.support_radius
            self.alpha = kernel.small_jump_index or 0.0
            if self.lo >= self.hi:
                self.radial_int = 0.0
            elif self.alpha == 0:
                self.radial_int = math.log(self.hi / self.lo)
            else:
                self.radial_int = (self.lo ** -self.alpha - self.hi ** -self.alpha) / self.alpha
            self.dens_bound = B * _sphere_area(self.d) * self.radial_int
        self.B = B

    @property
    def mark_blocks(self):
        return -(-(3 + self.d) // 4)

    def propose_density(self, u):
        """Base-coordinate proposals from uniforms u (n, 3 + d); returns (y, envelope)."""
        k, d = self.k, self.d
        n = u.shape[0]
        if k.boxes is not None:
            cum = np.cumsum(self.vols) / self.vols.sum()
            which = np.minimum(np.searchsorted(cum, u[:, 1], side="right"), len(self.vols) - 1)
            lo = np.stack([k.boxes[i][0] for i in range(len(k.boxes))])[which]
            hi = np.stack([k.boxes[i][1] for i in range(len(k.boxes))])[which]
            y = lo + (hi - lo) * u[:, 3:3 + d]
            env = np.full(n, self.B)
            return y, env
        a, b, al = self.lo, self.hi, self.alpha
        if al == 0:
            r = a * (b / a) ** u[:, 2]
        else:
            r = (a ** -al - u[:, 2] * (a ** -al - b ** -al)) ** (-1.0 / al)
        if d == 1:
            dirn = np.where(u[:, 3:4] < 0.5, -1.0, 1.0)
        else:
            z = ndtri(u[:, 3:3 + d])
            dirn = z / np.linalg.norm(z, axis=1, keepdims=True)
        y = r[:, None] * dirn
        env = self.B * r ** (-(d + al))
        return y, env


def _map_points(kernel, taus, y):
    """Apply the kernel's linear map at per-candidate times."""
    if kernel.linear_map is None:
        return y
    out = np.empty_like(y)
    for i, (t, v) in enumerate(zip(taus, y)):
        out[i] = kernel.map_at(float(t)) @ v
    return out


def _atom_points_at(kernel, taus):
    """Atom locations at per-candidate times, shape (n, K, d)."""
    base = kernel.atom_points(0.0) if kernel.linear_map is None else None
    if base is not None:
        return np.broadcast_to(base, (len(taus),) + base.shape)
    return np.stack([kernel.atom_points(float(t)) for t in taus])


def _moment_nodes(kernel, s, X, budget, lo, hi):
    """Density moments over base radii lo <= |y| < hi, per row of X.

    Returns (first moment of y chi(y), second moment matrix), both in
    mapped coordinates; shapes (n, d) and (n, d, d).
    """
    d = kernel.dim
    n = X.shape[0]
    first = np.zeros((n, d))
    second = np.zeros((n, d, d))
    if kernel.density is None or hi <= lo:
        return first, second
    order = budget.orders()[1]
    y, w = kernel.base_nodes(order, budget, inner=lo if not kernel.boxes else None)
    r = np.linalg.norm(y, axis=1)
    keep = (r >= lo) & (r < hi)
    y, w = y[keep], w[keep]
    if y.shape[0] == 0:
        return first, second
    m = kernel.map_at(s)
    z = y if m is None else np.einsum("ij,mj->mi", m, y)
    dens = np.asarray(kernel.density(s, X[:, None, :], y[None, :, :]), dtype=float)
    dens = np.broadcast_to(dens, (n, y.shape[0]))
    wd = dens * w
    first = np.einsum("nm,mi->ni", wd, z * cutoff(z)[:, None])
    second = np.einsum("nm,mi,mj->nij", wd, z, z)
    return first, second


class _Dynamics:
    """Compensated drift and small-jump covariance used by the stepper."""

    def __init__(self, triplet, scheme, prop, budget):
        self.t = triplet
        self.k = triplet.jumps
        self.scheme = scheme
        self.prop = prop
        self.budget = budget
        self.eps = prop.eps

    def _lower(self):
        k = self.k
        return max(self.eps, k.inner_cutoff) if k.density is not None else self.eps

    def drift(self, s, X):
        """b(s, x) minus the compensator of simulated jumps inside the unit ball."""
        X = np.atleast_2d(X)
        b = np.asarray(self.t.drift(s, X), dtype=float)
        b = np.broadcast_to(b, X.shape).copy()
        k = self.k
        if k.atoms:
            s_arr = np.broadcast_to(np.asarray(s, dtype=float), X.shape[:1])
            if k.linear_map is None:
                pts = k.atom_points(0.0)
                chi = cutoff(pts)
                if np.any(chi):
                    rates = k.atom_rates(s_arr, X)
                    b -= np.einsum("nk,ki->ni", rates * chi, pts)
            else:
                for i, si in enumerate(s_arr):
                    pts = k.atom_points(float(si))
                    chi = cutoff(pts)
                    if np.any(chi):
                        rates = k.atom_rates(float(si), X[i])
                        b[i] -= np.einsum("k,ki->i", rates * chi, pts)
        if k.density is not None:
            s_arr = np.broadcast_to(np.asarray(s, dtype=float), X.shape[:1])
            uniq = np.unique(s_arr)
            for su in uniq:
                rows = s_arr == su
                first, _ = _moment_nodes(k, float(su), X[rows], self.budget, self._lower(), math.inf)
                b[rows] -= first
        return b

    def small_cov(self, s, X):
        X = np.atleast_2d(X)
        d = self.k.dim
        if self.scheme.small_jumps != "gaussian" or self.k.density is None:
            return np.zeros((X.shape[0], d, d))
        k = self.k
        lo = k.inner_cutoff if k.inner_cutoff > 0 else self.budget.delta
        _, second = _moment_nodes(k, s, X, self.budget, lo, self._lower())
        if k.singular_at_origin:
            m2 = np.stack([k.small_ball_moments(s, x, self.budget)[0] for x in X])
            second = second + m2
        return second


def _sqrt_psd(C):
    """Batch symmetric square roots (n, d, d) of PSD matrices."""
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    lam, V = np.linalg.eigh(C)
    return np.einsum("...ij,...j,...kj->...ik", V, np.sqrt(np.clip(lam, 0, None)), V)


# --- core stepper ---------------------------------------------------------------


def _run_chunk(triplet, paths, x0, grid, obs_idx, scheme, budget, additive):
    d = triplet.dim
    n = len(paths)
    streams = StreamFactory(scheme.seed)
    k = triplet.jumps
    prop = _Proposal(k, scheme)
    dyn = _Dynamics(triplet, scheme, prop, budget)
    X = np.array(np.broadcast_to(x0, (n, d)), dtype=float)
    out = np.empty((n, len(obs_idx), d))
    obs_pos = {i: j for j, i in enumerate(obs_idx)}
    cand_total = np.zeros(n, dtype=np.int64)
    acc_total = np.zeros(n, dtype=np.int64)
    rate_sum = np.zeros(n)
    if 0 in obs_pos:
        out[:, obs_pos[0], :] = X
    lam_a, lam_d = prop.atom_bound, prop.dens_bound
    if not additive:
        S0 = np.asarray(triplet.sigma(grid[0], X[:1]), dtype=float)
        if np.any(np.abs(S0[0] - np.diag(np.diag(S0[0]))) > 0):
            raise SimulationError("state-dependent simulation supports diagonal diffusion only")

    for step in range(len(grid) - 1):
        t0, t1 = float(grid[step]), float(grid[step + 1])
        h = t1 - t0
        gauss = None
        if additive:
            b0 = dyn.drift(t0, X[:1])[0]
            b1 = dyn.drift(t1, X[:1])[0]
            cov = 0.5 * h * (np.asarray(triplet.sigma(t0, X[0]), float) + np.asarray(triplet.sigma(t1, X[0]), float))
            cov = cov + 0.5 * h * (dyn.small_cov(t0, X[:1])[0] + dyn.small_cov(t1, X[:1])[0])
            drift_inc = 0.5 * h * (b0 + b1)
            if np.any(cov):
                root = _sqrt_psd(cov)
                z = streams.normal(paths, step, TAG_GAUSS, d)
                gauss = np.einsum("ij,nj->ni", root, z)
            X = X + drift_inc
        else:
            Sd = np.asarray(triplet.sigma(t0, X), float)
            Sd = np.broadcast_to(Sd, (n, d, d))
            cov = Sd * h + dyn.small_cov(t0, X) * h
            if np.any(cov):
                off = cov - np.einsum("nii->ni", cov)[..., None] * np.eye(d)
                if np.any(np.abs(off) > 0):
                    raise SimulationError("state-dependent simulation supports diagonal diffusion only")
                z = streams.normal(paths, step, TAG_GAUSS, d)
                gauss = np.sqrt(np.clip(np.einsum("nii->ni", cov), 0, None)) * z

        # candidate counts
        u_cnt = streams.uniform(paths, step, TAG_COUNT, 2)
        n_a = poisson.ppf(u_cnt[:, 0], lam_a * h).astype(np.int64) if lam_a > 0 else np.zeros(n, np.int64)
        n_d = poisson.ppf(u_cnt[:, 1], lam_d * h).astype(np.int64) if lam_d > 0 else np.zeros(n, np.int64)
        n_c = n_a + n_d
        cand_total += n_c
        M = int(n_c.max()) if n else 0
        cur_t = np.full(n, t0)
        if M:
            times = np.full((n, M), np.inf)
            for j in range(M):
                act = n_c > j
                if np.any(act):
                    u = streams.uniform(paths[act], step, TAG_TIME, 1, offset=j)[:, 0]
                    times[act, j] = t0 + h * u
            order = np.argsort(times, axis=1, kind="stable")
            for col in range(M):
                orig = order[:, col]
                act = np.isfinite(times[np.arange(n), orig])
                if not np.any(act):
                    continue
                rows = np.flatnonzero(act)
                tau = times[rows, orig[rows]]
                if not additive:
                    X[rows] = _heun(dyn, cur_t[rows], tau, X[rows])
                    cur_t[rows] = tau
                mb = prop.mark_blocks
                u = streams.uniform(paths[rows], step, TAG_MARK, 4 * mb, offset=orig[rows] * mb)
                is_atom = orig[rows] < n_a[rows]
                jump = np.zeros((rows.size, d))
                accepted = np.zeros(rows.size, dtype=bool)
                if np.any(is_atom):
                    ia = np.flatnonzero(is_atom)
                    xa = X[rows[ia]]
                    rates = np.broadcast_to(k.atom_rates(tau[ia], xa), (ia.size, len(k.atoms)))
                    tot = rates.sum(axis=1)
                    if np.any(tot > lam_a * (1 + 1e-12)):
                        bad = int(np.argmax(tot))
                        raise SimulationError(
                            f"atom rate {tot[bad]:.6g} at s={tau[bad]:.6g}, x={xa[bad].tolist()}"
                            f" exceeds the declared bound {lam_a:.6g}")
                    rate_sum[rows[ia]] += tot
                    cum = np.cumsum(rates, axis=1)
                    pick = (cum <= (u[ia, 0] * lam_a)[:, None]).sum(axis=1)
                    ok = pick < len(k.atoms)
                    if np.any(ok):
                        pts = _atom_points_at(k, tau[ia[ok]])
                        jump[ia[ok]] = pts[np.arange(ok.sum()), pick[ok]]
                        accepted[ia[ok]] = True
                if np.any(~is_atom):
                    idn = np.flatnonzero(~is_atom)
                    y, env = prop.propose_density(u[idn])
                    xd = X[rows[idn]]
                    dens = np.asarray(k.density(tau[idn], xd, y), dtype=float)
                    dens = np.broadcast_to(dens, env.shape)
                    if k.boxes is not None:
                        dens = np.where(np.linalg.norm(y, axis=1) >= prop.eps, dens, 0.0)
                    if np.any(dens > env * (1 + 1e-12)):
                        bad = int(np.argmax(dens / env))
                        raise SimulationError(
                            f"density {dens[bad]:.6g} at y={y[bad].tolist()} exceeds the declared"
                            f" envelope {env[bad]:.6g}; raise density_bound")
                    ok = u[idn, 0] * env < dens
                    if np.any(ok):
                        jump[idn[ok]] = _map_points(k, tau[idn[ok]], y[ok])
                        accepted[idn[ok]] = True
                X[rows] = X[rows] + jump
                acc_total[rows] += accepted
        if not additive:
            X = _heun(dyn, cur_t, np.full(n, t1), X)
        if gauss is not None:
            X = X + gauss
        if step + 1 in obs_pos:
            out[:, obs_pos[step + 1], :] = X
    return out, cand_total, acc_total, rate_sum


def _heun(dyn, a, b, X):
    h = (b - a)[:, None]
    if not np.any(h):
        return X
    k1 = dyn.drift(a, X)
    k2 = dyn.drift(b, X + h * k1)
    return X + 0.5 * h * (k1 + k2)


def _simulate(triplet, s0, x0, horizon, observe, n_paths, scheme, budget, additive, workers=None):
    if n_paths < 1:
        raise ValueError("need at least one path")
    grid, obs, obs_idx = _step_grid(float(s0), float(horizon), observe, scheme.dt)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape not in ((triplet.dim,), (n_paths, triplet.dim)):
        raise ValueError(f"start must have shape ({triplet.dim},) or ({n_paths}, {triplet.dim})")
    workers = workers or scheme.workers or int(os.environ.get("FELLERLAB_WORKERS", "1"))
    paths = np.arange(n_paths, dtype=np.uint64)
    chunks = np.array_split(np.arange(n_paths), max(1, min(workers, n_paths)))

    def job(idx):
        xs = x0 if x0.ndim == 1 else x0[idx]
        return _run_chunk(triplet, paths[idx], xs, grid, obs_idx, scheme, budget, additive)

    if len(chunks) == 1:
        results = [job(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            results = list(ex.map(job, chunks))
    states = np.concatenate([r[0] for r in results])
    stats = {
        "candidates": np.concatenate([r[1] for r in results]),
        "accepted": np.concatenate([r[2] for r in results]),
        "rate_sum_at_atom_candidates": np.concatenate([r[3] for r in results]),
        "atom_bound": _Proposal(triplet.jumps, scheme).atom_bound,
        "mode": "additive" if additive else "state-dependent",
        "n_steps": len(grid) - 1,
    }
    return PathEnsemble(
        start_time=float(s0), x0=x0, horizon=float(horizon), times=obs, states=states,
        scheme=scheme, stats=stats,
        seed_record={"base_seed": scheme.seed,
                     "derivation": "philox4x64-10 key=(path, sha256(seed)[:8]) counter=(index, step, tag, 0)"},
    )


def simulate_additive(triplet, s0, x0, horizon, observe, n_paths, scheme, budget=DEFAULT_BUDGET, workers=None):
    """Ensemble for a spatially homogeneous triplet.

    Per step: trapezoidal drift and covariance increments, jumps above eps
    by thinning, small jumps dropped or replaced by a Gaussian.
    """
    if not triplet.spatially_homogeneous:
        raise ValueError("simulate_additive needs a spatially homogeneous triplet")
    return _simulate(triplet, s0, x0, horizon, observe, n_paths, scheme, budget, True, workers)


def simulate_state_dependent(triplet, s0, x0, horizon, observe, n_paths, scheme, budget=DEFAULT_BUDGET,
                             workers=None):
    """Ensemble by thinning with drift integrated (Heun) between candidate events."""
    return _simulate(triplet, s0, x0, horizon, observe, n_paths, scheme, budget, False, workers)


def simulate(triplet, s0, x0, horizon, observe, n_paths, scheme, budget=DEFAULT_BUDGET, workers=None):
    fn = simulate_additive if triplet.spatially_homogeneous else simulate_state_dependent
    return fn(triplet, s0, x0, horizon, observe, n_paths, scheme, budget, workers)


# --- estimates ------------------------------------------------------------------


def evolution_estimate(ensemble, t, f):
    """Sample mean of f(X_t) with standard error sd / sqrt(N)."""
    vals = np.asarray(f(ensemble.at(t)), dtype=float)
    n = vals.size
    if n and np.all(vals == vals.flat[0]):
        # degenerate law: report it exactly rather than with rounding noise
        return EvolutionEstimate(getattr(f, "name", "f"), float(vals.flat[0]), 0.0, n)
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EvolutionEstimate(getattr(f, "name", "f"), float(np.mean(vals)), se, n)


@dataclass
class CKReport:
    rows: list
    max_abs_z: float
    passed: bool
    threshold: float

    def to_dict(self):
        return {"rows": self.rows, "max_abs_z": self.max_abs_z, "passed": self.passed,
                "threshold": self.threshold}


def ck_check(triplet, s, u, t, suite, n_paths, scheme, x0=None, budget=DEFAULT_BUDGET,
             threshold=3.0, broken_restart=False):
    """Chapman-Kolmogorov check: direct s->t against s->u->t restarted from X_u.

    The two arms use independent seeds.  ``broken_restart`` restarts the
    second stage at the stale time s (a regression fixture).
    """
    if not s < u < t:
        raise ValueError("need s < u < t")
    if not suite:
        raise ValueError("function suite is empty")
    x0 = np.zeros(triplet.dim) if x0 is None else np.asarray(x0, dtype=float)
    sim = simulate
    direct = sim(triplet, s, x0, t, [t], n_paths, scheme, budget)
    s1 = _reseed(scheme, 1)
    first = sim(triplet, s, x0, u, [u], n_paths, s1, budget)
    xu = first.at(u)
    r0 = s if broken_restart else u
    second = sim(triplet, r0, xu, r0 + (t - u), [r0 + (t - u)], n_paths, _reseed(scheme, 2), budget)
    rows = []
    worst = 0.0
    for f in suite:
        a = evolution_estimate(direct, t, f)
        b = evolution_estimate(second, r0 + (t - u), f)
        pooled = math.hypot(a.stderr, b.stderr)
        diff = a.estimate - b.estimate
        z = diff / pooled if pooled > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        worst = max(worst, abs(z))
        rows.append({"function": a.function, "direct": a.estimate, "two_stage": b.estimate,
                     "pooled_se": pooled, "z": z})
    return CKReport(rows, worst, worst <= threshold, threshold)


def _reseed(scheme, k):
    from dataclasses import replace
    return replace(scheme, seed=(scheme.seed * 1_000_003 + 7919 * k) % 2**63)


# --- persistence ----------------------------------------------------------------


def save_ensemble(ensemble, path):
    """Binary layout: magic, uint32 header length, JSON header, then one
    float64 block of shape (n_obs, d) per path, path-major, little-endian."""
    header = {
        "spec_hash": ensemble.spec_hash,
        "start_time": ensemble.start_time,
        "x0": np.asarray(ensemble.x0).tolist() if np.ndim(ensemble.x0) == 1 else "per-path",
        "horizon": ensemble.horizon,
        "times": ensemble.times.tolist(),
        "n_paths": ensemble.n_paths,
        "dim": ensemble.dim,
        "scheme": ensemble.scheme.to_dict(),
        "seed_record": ensemble.seed_record,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(np.uint32(len(blob)).astype("<u4").tobytes())
        fh.write(blob)
        fh.write(np.ascontiguousarray(ensemble.states, dtype="<f8").tobytes())


def load_ensemble(path):
    with open(path, "rb") as fh:
        if fh.read(8) != ENSEMBLE_MAGIC:
            raise ValueError(f"{path} is not an ensemble file")
        n = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        header = json.loads(fh.read(n))
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = (header["n_paths"], len(header["times"]), header["dim"])
    states = data.reshape(shape).copy()
    sch = header["scheme"]
    scheme = SimulationScheme(dt=sch["dt"], eps=sch["eps"], small_jumps=sch["small_jumps"],
                              rate_bound=sch["rate_bound"], seed=sch["seed"])
    x0 = header["x0"]
    return PathEnsemble(
        start_time=header["start_time"], x0=np.asarray(x0 if x0 != "per-path" else states[:, 0, :]),
        horizon=header["horizon"], times=np.asarray(header["times"]), states=states,
        scheme=scheme, seed_record=header["seed_record"], spec_hash=header["spec_hash"],
    )
