"""Command-line entry point.

Subcommands: constant | tail | compare | expansion-check | formula | sample.

``tail`` and ``compare`` read an experiment config (see :mod:`gaussex.config`).
The other subcommands take flags; ``--config FILE`` may supply them instead
from a TOML table named after the subcommand (``[constant]``, ``[formula]``,
``[expansion_check]``, ``[sample]``) whose keys are the flag names with
underscores.  Flags given on the command line win over the file.

Exit codes: 0 ok, 2 usage error, 3 model/domain error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import __version__
from .asymptotics import chi_formula, perf_table_formula
from .config import (
    load_config,
    formula_from_config,
    grid_from_config,
    model_from_config,
    rows_csv,
    store_csv,
    store_record,
)
from .constants import (
    generalized_piterbarg_estimate,
    hw_estimate,
    known_value,
    pickands_estimate,
    piterbarg_estimate,
)
from .core import fbm_kernel, sample_paths, subfbm_kernel
from .errors import ConfigError, GaussexError, UsageError
from .grids import interval_grid, points_grid
from .harness import check_coverage, ratio_table, tail_from_sups
from .models import ChiSpec, PerfTableSpec, check_expansions
from .svg import write_ratio_plot

KERNELS = {"fbm": fbm_kernel, "subfbm": subfbm_kernel}


def _floats(text: str) -> list:
    try:
        return [float(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    g.add_argument("--threads", type=int, default=None, help="worker threads (fallback: GAUSSEX_THREADS)")
    g.add_argument("--out-dir", default=None, help="directory for written artifacts")
    g.add_argument("--format", choices=("csv", "json"), default=None, help="table format (default csv)")
    g.add_argument("--config", default=None, help="TOML file supplying options")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussex", description="Extreme-value numerics for Gaussian fields.")
    parser.add_argument("--version", action="version", version=f"gaussex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constant", help="Monte Carlo estimate of a Pickands-type constant")
    p.add_argument("kind", choices=("pickands", "piterbarg", "generalized-piterbarg", "hw"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--lambda", dest="lam", type=float, help="window length (Pickands, H_W)")
    p.add_argument("--horizon", type=float, help="truncation horizon S (Piterbarg)")
    p.add_argument("--mesh", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--levels", type=int, help="mesh-Richardson levels")
    p.add_argument("--extrapolate", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--family", choices=tuple(KERNELS), help="Y family for generalized-piterbarg")
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=_floats, help="comma-separated weights (hw)")
    _common(p)

    for name, helptext in (("tail", "supremum tail estimates from a config"), ("compare", "empirical vs asymptotic ratios")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--reps", type=int, help="override run.n_reps")
        _common(p)

    p = sub.add_parser("expansion-check", help="relative error of the local expansions near the optimizer")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=_floats)
    p.add_argument("--deltas", type=_floats, help="comma-separated deltas (default 0.1,0.01)")
    p.add_argument("--probes", type=int)
    _common(p)

    p = sub.add_parser("formula", help="asymptotic formula and its factor breakdown")
    p.add_argument("model", choices=("perf", "chi"))
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=_floats)
    p.add_argument("--b", type=float)
    p.add_argument("--hw", type=float)
    p.add_argument("--pickands", type=float)
    p.add_argument("--p-const", dest="p_const", type=float)
    p.add_argument("--regime", choices=("lt1", "eq1", "gt1"))
    p.add_argument("--family", choices=tuple(KERNELS))
    p.add_argument("--u", type=_floats, help="evaluate at these levels")
    _common(p)

    p = sub.add_parser("sample", help="sample kernel paths on an interval grid")
    p.add_argument("--family", choices=tuple(KERNELS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--mesh", type=float)
    p.add_argument("--points", type=_floats, help="explicit comma-separated grid points")
    p.add_argument("--reps", type=int)
    _common(p)
    return parser


FLAG_DEFAULTS = {
    "seed": 0,
    "format": "csv",
    "extrapolate": True,
    "family": "fbm",
    "deltas": [0.1, 0.01],
    "probes": 200,
    "lo": 0.0,
    "hi": 1.0,
}


def _merge_config(args, parser):
    """Fill unset flags from the subcommand's table in --config."""
    if args.config is None or args.command in ("tail", "compare"):
        return
    section = args.command.replace("-", "_")
    try:
        data = tomli.loads(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    for sec in data:
        if sec != section:
            raise ConfigError(f"unexpected section [{sec}] for '{args.command}'", field=sec)
    known = {a.dest: a for a in parser._subparsers._group_actions[0].choices[args.command]._actions}
    for key, value in data.get(section, {}).items():
        dest = {"lambda": "lam", "p-const": "p_const"}.get(key, key)
        if dest not in known or dest in ("help", "config"):
            raise ConfigError(f"unknown field '{section}.{key}'", field=f"{section}.{key}")
        if getattr(args, dest) is None:
            action = known[dest]
            if action.type is not None and not isinstance(value, list):
                value = action.type(str(value)) if action.type is _floats else action.type(value)
            elif isinstance(value, list):
                value = [float(v) for v in value]
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"{section}.{key} must be one of {list(action.choices)}", field=f"{section}.{key}")
            setattr(args, dest, value)


def _need(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            flag = {"lam": "lambda", "p_const": "p-const"}.get(name, name).replace("_", "-")
            raise UsageError(f"missing required flag --{flag}")


def _out(args) -> Optional[Path]:
    if args.out_dir is None:
        return None
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_table(args, stem: str, rows: list, columns: tuple, artifacts: list):
    out = _out(args)
    if out is None:
        return
    if args.format == "json":
        path = out / f"{stem}.json"
        path.write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n")
    else:
        path = out / f"{stem}.csv"
        path.write_text(rows_csv(rows, columns))
    artifacts.append(str(path))


# ---------------------------------------------------------------------------
# subcommands


def cmd_constant(args) -> list:
    kw = {k: v for k, v in (("mesh", args.mesh), ("n_reps", args.reps), ("levels", args.levels)) if v is not None}
    kw.update(seed=args.seed, threads=args.threads)
    kind = args.kind
    if kind == "pickands":
        _need(args, "alpha")
        if args.lam is not None:
            kw["lam"] = args.lam
        est = pickands_estimate(args.alpha, extrapolated=args.extrapolate, **kw)
        known = known_value("pickands", args.alpha)
    elif kind in ("piterbarg", "generalized-piterbarg"):
        _need(args, "alpha", "b")
        if args.horizon is not None:
            kw["horizon"] = args.horizon
        if kind == "piterbarg":
            est = piterbarg_estimate(args.alpha, args.b, **kw)
            known = known_value("piterbarg", args.alpha, args.b)
        else:
            est = generalized_piterbarg_estimate(KERNELS[args.family](args.alpha), args.alpha, args.b, **kw)
            known = known_value("piterbarg", args.alpha, args.b) if args.family == "fbm" else None
    else:
        _need(args, "n", "a")
        spec = PerfTableSpec(args.n, 1.0, tuple(args.a))
        if args.lam is not None:
            kw["lam"] = args.lam
        if not args.extrapolate:
            kw["extrapolate_from"] = ()
        est = hw_estimate(spec, **kw)
        known = known_value("h_w", spec=spec)
    print(f"{est.kind}: {est.value:.6f} +- {est.stderr:.6f}  (lambda={est.lam:g}, mesh={est.mesh:g}, reps={est.n_reps})")
    row = {"kind": est.kind, "value": est.value, "stderr": est.stderr, "lambda": est.lam, "mesh": est.mesh,
           "n_reps": est.n_reps, "extrapolated": est.extrapolated}
    cols = ("kind", "value", "stderr", "lambda", "mesh", "n_reps", "extrapolated")
    if known is not None:
        print(f"known value {known:.6f}, |value - known| = {abs(est.value - known):.6f}")
        row["known"] = known
        row["abs_delta"] = abs(est.value - known)
        cols += ("known", "abs_delta")
    artifacts = []
    _write_table(args, "constant", [row], cols, artifacts)
    return artifacts


def _experiment(args):
    if args.config is None:
        raise UsageError("missing required flag --config")
    cfg = load_config(args.config)
    run = cfg.run
    if args.seed is not None:
        run.seed = args.seed
    if args.reps is not None:
        run.n_reps = args.reps
    if args.threads is not None:
        run.threads = args.threads
    out = Path(args.out_dir) if args.out_dir is not None else Path(run.out)
    return cfg, out


def cmd_tail(args) -> list:
    cfg, out = _experiment(args)
    model = model_from_config(cfg)
    grid = grid_from_config(cfg, model)
    check_coverage(model, grid)
    sups = model.sample_sups(grid, cfg.run.n_reps, cfg.run.seed, cfg.run.threads)
    rows = [tail_from_sups(sups, u, grid, cfg.run.seed).to_dict() for u in cfg.run.u]
    for r in rows:
        print(f"u = {r['u']:g}: p_hat = {r['p_hat']:.6g}  95% CI [{r['ci_lo']:.6g}, {r['ci_hi']:.6g}]")
    args.out_dir = str(out)
    artifacts = []
    _write_table(args, "tail", rows, ("u", "p_hat", "ci_lo", "ci_hi", "exceedances", "n_reps"), artifacts)
    return artifacts


def cmd_compare(args) -> list:
    cfg, out = _experiment(args)
    model = model_from_config(cfg)
    formula = formula_from_config(cfg)
    if formula is None:
        raise UsageError("compare needs a model with an asymptotic formula (perf_table or chi)")
    grid = grid_from_config(cfg, model)
    rec = ratio_table(
        model, formula, cfg.run.u, grid, cfg.run.n_reps, cfg.run.seed,
        config_hash=cfg.config_hash(), threads=cfg.run.threads,
    )
    for r in rec.rows:
        mark = "  [mismatch]" if r["flag"] else ""
        print(f"u = {r['u']:g}: p_hat = {r['p_hat']:.6g}, asymptotic = {r['asymptotic']:.6g}, ratio = {r['ratio']:.4f} "
              f"[{r['ratio_lo']:.4f}, {r['ratio_hi']:.4f}]{mark}")
    out.mkdir(parents=True, exist_ok=True)
    paths = [store_record(rec, out / "record.json"), store_csv(rec, out / "ratios.csv"),
             write_ratio_plot(rec.rows, out / "ratios.svg", model.name)]
    return [str(p) for p in paths]


def cmd_expansion_check(args) -> list:
    _need(args, "n", "alpha", "a")
    spec = PerfTableSpec(args.n, args.alpha, tuple(args.a))
    rows = []
    for d in args.deltas:
        errs = check_expansions(spec, d, probe_count=args.probes, seed=args.seed)
        for name, err in errs.items():
            rows.append({"delta": d, "expansion": name, "max_rel_error": err})
            print(f"delta = {d:g}  {name:8s} max relative error = {err:.3e}")
    artifacts = []
    _write_table(args, "expansion_check", rows, ("delta", "expansion", "max_rel_error"), artifacts)
    return artifacts


def cmd_formula(args) -> list:
    if args.model == "perf":
        _need(args, "n", "alpha", "a")
        f = perf_table_formula(PerfTableSpec(args.n, args.alpha, tuple(args.a)), hw=args.hw, pickands=args.pickands,
                               regime=args.regime)
    else:
        _need(args, "n", "alpha", "a", "b")
        spec = ChiSpec(args.n, args.alpha, args.a[0], args.b, y_family=args.family)
        p = args.p_const
        if p is None and args.family == "fbm":
            p = known_value("piterbarg", args.alpha, spec.drift)
        if p is None:
            raise UsageError("missing required flag --p-const")
        f = chi_formula(spec, p)
    print(f.description)
    print(f"C = {f.constant_C:.6f}")
    print(f"exponent = {f.u_exponent:g}")
    print(f"sigma_* = {f.sigma_star:.6f}")
    for k, v in f.factors.items():
        print(f"  {k} = {v:.6g}" if isinstance(v, float) else f"  {k} = {v}")
    rows = []
    for u in args.u or []:
        val = f.evaluate(u)
        rows.append({"u": u, "asymptotic": val})
        print(f"u = {u:g}: {val:.6e}")
    artifacts = []
    out = _out(args)
    if out is not None:
        path = out / "formula.json"
        path.write_text(json.dumps({"formula": f.to_dict(), "values": rows}, sort_keys=True, indent=2) + "\n")
        artifacts.append(str(path))
    return artifacts


def cmd_sample(args) -> list:
    _need(args, "alpha", "reps")
    kern = KERNELS[args.family](args.alpha)
    if args.points:
        grid = points_grid(args.points)
    else:
        _need(args, "mesh")
        grid = interval_grid(args.lo, args.hi, args.mesh)
    batch = sample_paths(kern, grid, args.reps, args.seed, threads=args.threads)
    v = batch.values
    print(f"{args.reps} paths of {kern.name} on {len(grid)} points; sup mean = {v.max(axis=1).mean():.6f}")
    out = _out(args)
    if out is None:
        return []
    ts = [format(float(t), ".17g") for t in grid.points[:, 0]]
    if args.format == "json":
        path = out / "samples.json"
        path.write_text(json.dumps({"t": grid.points[:, 0].tolist(), "values": v.tolist(), "seed": args.seed}) + "\n")
    else:
        path = out / "samples.csv"
        lines = [",".join(["rep"] + ts)]
        lines += [",".join([str(i)] + [format(float(x), ".17g") for x in row]) for i, row in enumerate(v)]
        path.write_text("\n".join(lines) + "\n")
    return [str(path)]


COMMANDS = {
    "constant": cmd_constant,
    "tail": cmd_tail,
    "compare": cmd_compare,
    "expansion-check": cmd_expansion_check,
    "formula": cmd_formula,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args, parser)
        for k, v in FLAG_DEFAULTS.items():
            if getattr(args, k, "absent") is None and not (k == "seed" and args.command in ("tail", "compare")):
                setattr(args, k, v)
        artifacts = COMMANDS[args.command](args)
    except GaussexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for a in artifacts:
        print(f"wrote {a}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
