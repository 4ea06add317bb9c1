"""Command-line entry point.

Every command reads a TOML spec, writes JSON-lines records (stdout or
``--out``) and exits 0 when the verdict holds or is consistent, 2 when it
is violated or the criterion fails, and 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .compare import dominance_harness
from .config import SpecError, load_process, parse_spec
from .dependence import STRUCTURES, default_suite, estimate_dependence
from .functions import coordinate_tanh, plateau
from .generator import apply_generator_with_residual, check_association_generator
from .kernel import validate_triplet
from .orthant import classify_dependence
from .simulate import ck_check, load_ensemble, save_ensemble, simulate
from .spacetime import eval_transformed_symbol, transform_triplet

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, complex):
        return {"re": _clean(v.real), "im": _clean(v.imag)}
    return v


class Emitter:
    def __init__(self, plan, stream):
        self.base = {"plan_hash": plan.hash(), "seed": plan.seed, "version": __version__,
                     "command": plan.command}
        self.stream = stream

    def emit(self, record_type, payload):
        rec = {"record": record_type, **self.base, **_clean(payload)}
        self.stream.write(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n")


def _floats(text, what):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _points(text, dim, what):
    out = []
    for part in text.split(";"):
        if part.strip():
            v = _floats(part, what)
            if len(v) != dim:
                raise UsageError(f"{what}: point {part!r} does not have dimension {dim}")
            out.append(v)
    if not out:
        raise UsageError(f"{what}: no points given")
    return out


def _function(text, dim):
    """``tanh:i`` or ``plateau:i:center:width`` (coordinates are 1-based)."""
    parts = text.split(":")
    try:
        i = int(parts[1]) - 1
        if not 0 <= i < dim:
            raise ValueError
        if parts[0] == "tanh" and len(parts) == 2:
            return coordinate_tanh(i, dim)
        if parts[0] == "plateau" and len(parts) == 4:
            return plateau(i, float(parts[2]), float(parts[3]), dim)
    except (IndexError, ValueError):
        pass
    raise UsageError(f"--function: expected tanh:i or plateau:i:center:width, got {text!r}")


def _grid(plan):
    return [(s, np.asarray(x)) for s in plan.time_grid for x in plan.space_grid]


# --- commands -----------------------------------------------------------------


def cmd_validate(plan, args, out):
    rep = validate_triplet(plan.triplet, plan.time_grid, plan.space_grid, tol=args.tol)
    out.emit("validation", rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_VIOLATED


def cmd_check_orthant(plan, args, out):
    rep = classify_dependence(plan.triplet, plan.time_grid, plan.space_grid, tol=args.tol)
    if args.csv:
        _write_csv(args.csv, rep.masses)
    out.emit("orthant", rep.to_dict())
    return EXIT_OK if rep.holds else EXIT_VIOLATED


def cmd_eval_generator(plan, args, out):
    f = _function(args.function, plan.triplet.dim)
    for s, x in _grid(plan):
        res = apply_generator_with_residual(plan.triplet, s, f, x)
        out.emit("generator", {"s": s, "x": x, "function": f.name, "value": res.value,
                               "residual": res.residual})
    return EXIT_OK


def cmd_check_association_generator(plan, args, out):
    records = []
    rep = check_association_generator(plan.triplet, plan.pairs(), _grid(plan), tol=args.tol, records=records)
    if args.csv:
        _write_csv(args.csv, records)
    if args.verbose:
        for r in records:
            out.emit("gamma", r)
    out.emit("association-generator", rep.to_dict())
    return EXIT_OK if rep.holds else EXIT_VIOLATED


def cmd_transform(plan, args, out):
    st = transform_triplet(plan.triplet)
    d = plan.triplet.dim
    rng_xi = [np.concatenate([[r], np.full(d, c)]) for r in (0.0, 1.0) for c in (0.0, 0.5, -1.0)]
    for s, x in _grid(plan):
        xt = np.concatenate([[s], x])
        checks = [abs(eval_transformed_symbol(st, xt, xi)) for xi in rng_xi]
        out.emit("space-time", {
            "s": s, "x": x, "drift": st.drift(xt), "diffusion": st.diffusion(xt),
            "atoms": st.atoms(s), "atom_rates": plan.triplet.jumps.atom_rates(s, x),
            "kernel_tag": st.kernel_tag, "symbol_checks": len(checks),
        })
    return EXIT_OK


def _ensemble(plan, args):
    d = plan.triplet.dim
    x0 = _floats(args.x0, "--x0") if args.x0 else [0.0] * d
    if len(x0) != d:
        raise UsageError(f"--x0 must have {d} entries")
    observe = _floats(args.observe, "--observe") if args.observe else [args.horizon]
    ens = simulate(plan.triplet, args.s0, np.asarray(x0), args.horizon, observe, args.paths, plan.scheme,
                   workers=args.workers)
    ens.spec_hash = plan.hash()
    return ens


def _moments(ens):
    rows = []
    for t in ens.times:
        X = ens.at(t)
        rows.append({"t": float(t), "mean": X.mean(axis=0),
                     "cov": np.atleast_2d(np.cov(X, rowvar=False)) if X.shape[0] > 1 else None})
    return rows


def cmd_simulate(plan, args, out):
    ens = _ensemble(plan, args)
    if args.ensemble_out:
        save_ensemble(ens, args.ensemble_out)
    out.emit("ensemble", {"n_paths": ens.n_paths, "dim": ens.dim, "times": ens.times,
                          "scheme": plan.scheme.to_dict(), "moments": _moments(ens),
                          "candidates": int(ens.stats["candidates"].sum()),
                          "accepted": int(ens.stats["accepted"].sum()),
                          "ensemble_file": bool(args.ensemble_out)})
    return EXIT_OK


def cmd_estimate_dependence(plan, args, out):
    if args.ensemble:
        ens = load_ensemble(args.ensemble)
    elif args.paths:
        ens = _ensemble(plan, args)
    else:
        raise UsageError("estimate-dependence needs --ensemble FILE or --paths N")
    t = args.time if args.time is not None else float(ens.times[-1])
    cfg = plan.suite_cfg
    suite = default_suite(args.kind, ens.dim, cfg.get("centers", (-1.5, -0.5, 0.5, 1.5)),
                          cfg.get("widths", (0.25, 1.0)))
    rep = estimate_dependence(ens, t, args.kind, suite, z_crit=args.zcrit)
    for row in rep.tests:
        out.emit("dependence-test", {"structure": rep.structure, "t": t, **row})
    if args.csv:
        _write_csv(args.csv, rep.tests)
    summary = rep.to_dict()
    summary.pop("tests")
    summary["ensemble"] = {k: v for k, v in summary["ensemble"].items() if k != "id"}
    out.emit("dependence-summary", {**summary, "parts": rep.parts})
    return EXIT_VIOLATED if rep.verdict == "violated" else EXIT_OK


def cmd_ck_check(plan, args, out):
    d = plan.triplet.dim
    x0 = np.asarray(_floats(args.x0, "--x0")) if args.x0 else np.zeros(d)
    rep = ck_check(plan.triplet, args.s, args.u, args.t, plan.suite(), args.paths, plan.scheme, x0=x0)
    out.emit("chapman-kolmogorov", rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_VIOLATED


def cmd_compare(plan, args, out):
    px = plan.extra_specs["x"]
    py = plan.extra_specs["y"]
    try:
        tx = load_process(px.get("process", {})).triplet
        ty = load_process(py.get("process", {})).triplet
    except SpecError as exc:
        raise SpecError(f"compare: {exc}") from None
    times = []
    for part in args.times.split(";"):
        st = _floats(part, "--times")
        if len(st) != 2:
            raise UsageError("--times: expected 's,t;s,t;...'")
        times.append(tuple(st))
    starts = _points(args.starts, tx.dim, "--starts")
    if args.suite is not None:
        plan.suite_cfg = {**(plan.suite_cfg or {}), "family": args.suite}
    suite = plan.suite()
    rep = dominance_harness(tx, ty, suite, times, starts, args.paths, plan.scheme,
                            grid=_grid(plan) if args.spec else None, monotone=args.monotone)
    for row in rep.rows:
        out.emit("domination-test", row)
    summary = rep.to_dict()
    summary.pop("rows")
    out.emit("domination-summary", summary)
    return EXIT_OK if rep.verdict == "dominates-on-suite" else EXIT_VIOLATED


def _write_csv(path, rows):
    if not rows:
        open(path, "w").close()
        return
    keys = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(_clean(r[k])) if isinstance(r.get(k), (list, dict)) else _clean(r.get(k))
                        for k in keys})


COMMANDS = {
    "validate": cmd_validate,
    "check-orthant": cmd_check_orthant,
    "eval-generator": cmd_eval_generator,
    "check-association-generator": cmd_check_association_generator,
    "transform": cmd_transform,
    "simulate": cmd_simulate,
    "estimate-dependence": cmd_estimate_dependence,
    "ck-check": cmd_ck_check,
    "compare": cmd_compare,
}


def _sim_args(p, required):
    p.add_argument("--paths", type=int, required=required)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--s0", type=float, default=0.0)
    p.add_argument("--x0", help="comma-separated start point (default: origin)")
    p.add_argument("--observe", help="comma-separated observation times (default: horizon)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $FELLERLAB_WORKERS or 1); never changes results")


def build_parser():
    p = _Parser(prog="fellerlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fellerlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(name, needs_spec=True):
        c = sub.add_parser(name)
        c.add_argument("--spec", required=needs_spec, help="TOML process spec")
        c.add_argument("--seed", type=int, default=None, help="override scheme.seed")
        c.add_argument("--out", help="JSON-lines output file (default: stdout)")
        c.add_argument("--time-grid", help="comma-separated times (overrides grids.times)")
        c.add_argument("--space-grid", help="'x1,x2;x1,x2' points (overrides grids.space)")
        c.add_argument("--dt", type=float, default=None, help="override scheme.dt")
        c.add_argument("--eps", type=float, default=None, help="override scheme.eps")
        return c

    c = common("validate")
    c.add_argument("--tol", type=float, default=1e-6)
    c = common("check-orthant")
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--csv", help="per-point masses")
    c = common("eval-generator")
    c.add_argument("--function", required=True, help="tanh:i or plateau:i:center:width")
    c = common("check-association-generator")
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--csv")
    c.add_argument("--verbose", action="store_true", help="one record per scanned tuple")
    common("transform")
    c = common("simulate")
    _sim_args(c, True)
    c.add_argument("--ensemble-out", help="write the binary ensemble here")
    c = common("estimate-dependence")
    _sim_args(c, False)
    c.add_argument("--ensemble", help="binary ensemble written by simulate")
    c.add_argument("--kind", required=True, choices=STRUCTURES)
    c.add_argument("--time", type=float, default=None)
    c.add_argument("--zcrit", type=float, default=3.0)
    c.add_argument("--csv")
    c = common("ck-check")
    c.add_argument("--paths", type=int, required=True)
    c.add_argument("--s", type=float, default=0.0)
    c.add_argument("--u", type=float, default=0.5)
    c.add_argument("--t", type=float, default=1.0)
    c.add_argument("--x0")
    c = common("compare", needs_spec=False)
    c.add_argument("--spec-x", required=True)
    c.add_argument("--spec-y", required=True)
    c.add_argument("--times", default="0,1", help="'s,t;s,t'")
    c.add_argument("--starts", default=None, help="'x1,x2;x1,x2' (default: origin)")
    c.add_argument("--paths", type=int, required=True)
    c.add_argument("--monotone", choices=("asserted", "checked"), default="asserted")
    c.add_argument("--suite", choices=("plateau", "tanh"), default=None,
                   help="monotone family (overrides suite.family)")
    return p


def _options(args):
    skip = {"spec", "seed", "out", "workers", "csv", "ensemble_out", "command", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _apply_overrides(plan, args):
    from dataclasses import replace

    d = plan.triplet.dim
    if args.time_grid:
        plan.time_grid = _floats(args.time_grid, "--time-grid")
        if not plan.time_grid:
            raise UsageError("--time-grid: no times given")
    if args.space_grid:
        plan.space_grid = _points(args.space_grid, d, "--space-grid")
    changes = {k: getattr(args, k) for k in ("dt", "eps") if getattr(args, k) is not None}
    if changes:
        try:
            plan.scheme = replace(plan.scheme, **changes)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        spec = args.spec
        extra = None
        if args.command == "compare":
            spec = spec or args.spec_x
            extra = {"x": args.spec_x, "y": args.spec_y}
        plan = parse_spec(spec, args.command, _options(args), args.seed, extra)
        _apply_overrides(plan, args)
        if args.command == "compare" and args.starts is None:
            args.starts = ",".join(["0"] * plan.triplet.dim)
        if getattr(args, "paths", None) is not None and args.paths < 1:
            raise UsageError("--paths must be positive")
        fh = open(args.out, "w") if args.out else stdout
        try:
            return COMMANDS[args.command](plan, args, Emitter(plan, fh))
        finally:
            if args.out:
                fh.close()
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    except (SpecError, OSError, ValueError, KeyError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_ERROR


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
