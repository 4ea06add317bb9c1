"""TOML process specifications and experiment plans.

A spec file has a ``[process]`` table (either ``catalog = "name"`` or an
explicit triplet) and optional ``[grids]``, ``[scheme]`` and ``[suite]``
tables.  Unknown keys are rejected with their dotted location.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json
import math
import os

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import catalog
from .functions import coordinate_tanh, monotone_pairs, plateau_family
from .kernel import (
    Atom,
    JumpKernel,
    LinearDrift,
    PolynomialDrift,
    ScaledDiffusion,
    Triplet,
    make_deterministic_volatility,
)
from .simulate import SimulationScheme

__all__ = ["SpecError", "ExperimentPlan", "ProcessSpec", "parse_spec", "load_process", "build_suite",
           "plan_hash", "canonical_json"]


class SpecError(ValueError):
    """Invalid specification; the message names the offending location."""


_ALLOWED = {
    "": {"process", "grids", "scheme", "suite"},
    "process": {"catalog", "dimension", "additive", "drift", "drift_poly", "drift_matrix", "diffusion",
                "diffusion_poly", "atoms", "density", "volatility", "name"},
    "process.atoms": {"location", "rate"},
    "process.density": {"kind", "value", "boxes", "alpha", "radius", "inner", "scale", "orthants"},
    "process.volatility": {"matrix", "time_power"},
    "grids": {"times", "space"},
    "scheme": {"dt", "eps", "small_jumps", "rate_bound", "seed"},
    "suite": {"family", "centers", "widths", "tensor"},
}


def _check_keys(table, where):
    allowed = _ALLOWED[where]
    for key in table:
        if key not in allowed:
            loc = f"{where}.{key}" if where else key
            raise SpecError(f"unknown key '{loc}' (allowed here: {', '.join(sorted(allowed))})")


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{where}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise SpecError(f"{where}: must be finite")
    return float(v)


def _vec(v, d, where):
    if not isinstance(v, list) or len(v) != d:
        raise SpecError(f"{where}: expected a list of {d} numbers")
    return np.array([_num(a, f"{where}[{i}]") for i, a in enumerate(v)])


def _mat(v, d, where):
    if not isinstance(v, list) or len(v) != d:
        raise SpecError(f"{where}: expected a {d}x{d} matrix")
    return np.stack([_vec(r, d, f"{where}[{i}]") for i, r in enumerate(v)])


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def plan_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


# --- process ----------------------------------------------------------------------


def _constant_density(value):
    def dens(s, x, y):
        return np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]), value)
    return dens


def _radial_density(scale, alpha, d, orthants):
    def dens(s, x, y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        with np.errstate(divide="ignore"):
            val = scale * r ** -(d + alpha)
        if orthants == "concordant":
            val = np.where(np.all(y >= 0, axis=-1) | np.all(y <= 0, axis=-1), val, 0.0)
        return np.broadcast_to(val, np.broadcast_shapes(np.shape(x)[:-1], val.shape))
    return dens


def _density(cfg, d):
    _check_keys(cfg, "process.density")
    kind = cfg.get("kind")
    if kind == "uniform-boxes":
        value = _num(cfg.get("value", 1.0), "process.density.value")
        if value < 0:
            raise SpecError("process.density.value: density must be nonnegative")
        raw = cfg.get("boxes")
        if not isinstance(raw, list) or not raw:
            raise SpecError("process.density.boxes: need a nonempty list of [lo, hi] pairs")
        boxes = []
        for i, b in enumerate(raw):
            if not isinstance(b, list) or len(b) != 2:
                raise SpecError(f"process.density.boxes[{i}]: expected [lo, hi]")
            boxes.append((_vec(b[0], d, f"process.density.boxes[{i}][0]"),
                          _vec(b[1], d, f"process.density.boxes[{i}][1]")))
        try:
            return JumpKernel(d, density=_constant_density(value), boxes=tuple(boxes),
                              density_bound=max(value, 1e-300))
        except ValueError as exc:
            raise SpecError(f"process.density.boxes: {exc}") from None
    if kind == "radial-power":
        alpha = _num(cfg.get("alpha", 0.5), "process.density.alpha")
        scale = _num(cfg.get("scale", 1.0), "process.density.scale")
        if scale < 0:
            raise SpecError("process.density.scale: density must be nonnegative")
        radius = _num(cfg.get("radius", 1.0), "process.density.radius")
        inner = _num(cfg.get("inner", 0.0), "process.density.inner")
        orth = cfg.get("orthants", "all")
        if orth not in ("all", "concordant"):
            raise SpecError("process.density.orthants: expected 'all' or 'concordant'")
        try:
            return JumpKernel(d, density=_radial_density(scale, alpha, d, orth), inner_cutoff=inner,
                              small_jump_index=alpha, support_radius=radius,
                              density_bound=max(scale, 1e-300))
        except ValueError as exc:
            raise SpecError(f"process.density: {exc}") from None
    raise SpecError(f"process.density.kind: expected 'uniform-boxes' or 'radial-power', got {kind!r}")


@dataclass(frozen=True)
class ProcessSpec:
    triplet: Triplet
    rate_bound: float | None
    source: dict
    catalog_entry: object = None


def load_process(cfg):
    """Build a triplet from a ``[process]`` table."""
    if not isinstance(cfg, dict):
        raise SpecError("process: expected a table")
    _check_keys(cfg, "process")
    if "catalog" in cfg:
        extra = set(cfg) - {"catalog"}
        if extra:
            raise SpecError(f"process: 'catalog' cannot be combined with {sorted(extra)}")
        try:
            entry = catalog.get(cfg["catalog"])
        except KeyError as exc:
            raise SpecError(str(exc.args[0])) from None
        return ProcessSpec(entry.triplet, entry.rate_bound, cfg, entry)
    if "dimension" not in cfg:
        raise SpecError("process.dimension is required without a catalog name")
    d = cfg["dimension"]
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise SpecError("process.dimension: expected a positive integer")
    additive = cfg.get("additive", True)
    if not isinstance(additive, bool):
        raise SpecError("process.additive: expected true or false")
    drift = _vec(cfg["drift"], d, "process.drift") if "drift" in cfg else np.zeros(d)
    if "drift_poly" in cfg:
        if "drift" in cfg:
            raise SpecError("process.drift_poly: give either drift or drift_poly")
        raw = cfg["drift_poly"]
        if not isinstance(raw, list) or not raw:
            raise SpecError("process.drift_poly: expected a list of coefficient vectors")
        drift = PolynomialDrift([_vec(c, d, f"process.drift_poly[{k}]") for k, c in enumerate(raw)])
    if "drift_matrix" in cfg:
        if "drift_poly" in cfg:
            raise SpecError("process.drift_matrix: cannot be combined with drift_poly")
        if additive:
            raise SpecError("process.drift_matrix: a state-dependent drift needs additive = false")
        drift = LinearDrift(_mat(cfg["drift_matrix"], d, "process.drift_matrix"), drift)
    S = _mat(cfg["diffusion"], d, "process.diffusion") if "diffusion" in cfg else np.zeros((d, d))
    if not np.allclose(S, S.T) or np.linalg.eigvalsh(0.5 * (S + S.T)).min() < -1e-12:
        raise SpecError("process.diffusion: must be symmetric positive semidefinite")
    diffusion = S
    if "diffusion_poly" in cfg:
        raw = cfg["diffusion_poly"]
        if not isinstance(raw, list) or not raw:
            raise SpecError("process.diffusion_poly: expected a list of coefficients")
        diffusion = ScaledDiffusion(S, [_num(c, f"process.diffusion_poly[{k}]") for k, c in enumerate(raw)])
    atoms = []
    for i, a in enumerate(cfg.get("atoms", [])):
        where = f"process.atoms[{i}]"
        if not isinstance(a, dict):
            raise SpecError(f"{where}: expected a table")
        _check_keys(a, "process.atoms")
        if "location" not in a:
            raise SpecError(f"{where}.location is required")
        loc = _vec(a["location"], d, f"{where}.location")
        rate = _num(a.get("rate", 1.0), f"{where}.rate")
        if rate < 0:
            raise SpecError(f"{where}.rate: rate must be nonnegative, got {rate}")
        if not np.any(loc):
            raise SpecError(f"{where}.location: atoms at the origin are not allowed")
        atoms.append(Atom(loc, rate))
    if "density" in cfg:
        if not isinstance(cfg["density"], dict):
            raise SpecError("process.density: expected a table")
        kernel = _density(cfg["density"], d)
        kernel = JumpKernel(d, atoms=tuple(atoms), density=kernel.density, inner_cutoff=kernel.inner_cutoff,
                            small_jump_index=kernel.small_jump_index, support_radius=kernel.support_radius,
                            boxes=kernel.boxes, density_bound=kernel.density_bound)
    else:
        kernel = JumpKernel(d, atoms=tuple(atoms))
    name = str(cfg.get("name", "spec"))
    triplet = Triplet.build(d, drift=drift, diffusion=diffusion, jumps=kernel, spatially_homogeneous=additive,
                            name=name)
    if "volatility" in cfg:
        vol = cfg["volatility"]
        if not isinstance(vol, dict):
            raise SpecError("process.volatility: expected a table")
        _check_keys(vol, "process.volatility")
        M = _mat(vol.get("matrix", np.eye(d).tolist()), d, "process.volatility.matrix")
        p = _num(vol.get("time_power", 1.0), "process.volatility.time_power")
        if p < 0:
            raise SpecError("process.volatility.time_power: must be nonnegative")
        try:
            triplet = make_deterministic_volatility(triplet, lambda s: (s ** p) * M)
        except ValueError as exc:
            raise SpecError(f"process.volatility: {exc}") from None
    return ProcessSpec(triplet, None, cfg)


# --- suites, grids, scheme ----------------------------------------------------------


def build_suite(cfg, dim):
    """Monotone family from a ``[suite]`` table (default: plateaus)."""
    cfg = cfg or {}
    _check_keys(cfg, "suite")
    fam = cfg.get("family", "plateau")
    if fam == "plateau":
        centers = [_num(c, "suite.centers") for c in cfg.get("centers", [-1.5, -0.5, 0.5, 1.5])]
        widths = [_num(w, "suite.widths") for w in cfg.get("widths", [0.25, 1.0])]
        if not centers or not widths or min(widths) <= 0:
            raise SpecError("suite: need nonempty centers and positive widths")
        return plateau_family(dim, centers, widths, bool(cfg.get("tensor", True)))
    if fam == "tanh":
        return [coordinate_tanh(i, dim) for i in range(dim)]
    raise SpecError(f"suite.family: expected 'plateau' or 'tanh', got {fam!r}")


def _grids(cfg, dim):
    cfg = cfg or {}
    _check_keys(cfg, "grids")
    times = cfg.get("times", [0.0])
    space = cfg.get("space", [[0.0] * dim])
    if not isinstance(times, list) or not times:
        raise SpecError("grids.times: need a nonempty list")
    if not isinstance(space, list) or not space:
        raise SpecError("grids.space: need a nonempty list")
    return ([_num(t, "grids.times") for t in times],
            [_vec(x, dim, f"grids.space[{i}]").tolist() for i, x in enumerate(space)])


def _scheme(cfg, seed_override, rate_bound):
    cfg = dict(cfg or {})
    _check_keys(cfg, "scheme")
    if seed_override is not None:
        cfg["seed"] = seed_override
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise SpecError("scheme.seed: expected a nonnegative integer")
    rb = cfg.get("rate_bound", rate_bound)
    try:
        return SimulationScheme(dt=_num(cfg.get("dt", 0.01), "scheme.dt"),
                                eps=None if cfg.get("eps") is None else _num(cfg["eps"], "scheme.eps"),
                                small_jumps=cfg.get("small_jumps", "discard"),
                                rate_bound=None if rb is None else _num(rb, "scheme.rate_bound"),
                                seed=seed)
    except ValueError as exc:
        raise SpecError(f"scheme: {exc}") from None


@dataclass
class ExperimentPlan:
    command: str
    spec_path: str
    process: ProcessSpec
    time_grid: list
    space_grid: list
    suite_cfg: dict
    scheme: SimulationScheme
    options: dict = field(default_factory=dict)
    extra_specs: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def triplet(self):
        return self.process.triplet

    @property
    def seed(self):
        return self.scheme.seed

    def suite(self):
        return build_suite(self.suite_cfg, self.triplet.dim)

    def pairs(self):
        return monotone_pairs(self.suite())

    def hash(self):
        """Digest of everything that determines the numbers (not workers or paths of outputs)."""
        return plan_hash({"command": self.command, "spec": self.raw, "options": self.options,
                          "extra": {k: v for k, v in self.extra_specs.items()}})


def read_toml(path):
    if not os.path.exists(path):
        raise SpecError(f"{path}: file not found")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None


def parse_spec(path, command="validate", options=None, seed=None, extra_paths=None):
    """Parse a spec file into a validated plan.

    ``extra_paths`` maps labels to further spec files (e.g. the two
    processes of a comparison); their raw contents enter the plan hash.
    """
    raw = read_toml(path)
    try:
        _check_keys(raw, "")
        if "process" not in raw:
            raise SpecError("missing [process] table")
        proc = load_process(raw["process"])
        times, space = _grids(raw.get("grids"), proc.triplet.dim)
        scheme = _scheme(raw.get("scheme"), seed, proc.rate_bound)
        suite_cfg = raw.get("suite", {})
        build_suite(suite_cfg, proc.triplet.dim)
    except SpecError as exc:
        raise SpecError(f"{path}: {exc}") from None
    extra = {}
    for label, p in (extra_paths or {}).items():
        extra[label] = read_toml(p)
    return ExperimentPlan(command, str(path), proc, times, space, suite_cfg, scheme,
                          dict(options or {}), extra, raw)
