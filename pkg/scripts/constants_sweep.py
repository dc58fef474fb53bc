#!/usr/bin/env python3
"""Sweep Pickands constants over alpha and Piterbarg constants over b; print and optionally save CSV."""

import argparse
import time

from gaussex.config import rows_csv
from gaussex.constants import known_value, pickands_estimate, piterbarg_estimate

COLS = ("kind", "alpha", "b", "value", "stderr", "known", "seconds")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0])
    ap.add_argument("--bs", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--lam", type=float, default=10.0)
    ap.add_argument("--horizon", type=float, default=8.0)
    ap.add_argument("--mesh", type=float, default=0.02)
    ap.add_argument("--n-reps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--csv", help="write the table here")
    args = ap.parse_args(argv)

    rows = []
    for alpha in args.alphas:
        t0 = time.perf_counter()
        e = pickands_estimate(alpha, lam=args.lam, mesh=args.mesh, n_reps=args.n_reps, seed=args.seed,
                              extrapolated=True, threads=args.threads)
        rows.append({"kind": "pickands", "alpha": alpha, "b": "", "value": e.value, "stderr": e.stderr,
                     "known": known_value("pickands", alpha) or "", "seconds": time.perf_counter() - t0})
    for b in args.bs:
        t0 = time.perf_counter()
        e = piterbarg_estimate(1.0, b, horizon=args.horizon, mesh=args.mesh, n_reps=args.n_reps,
                               seed=args.seed, threads=args.threads)
        rows.append({"kind": "piterbarg", "alpha": 1.0, "b": b, "value": e.value, "stderr": e.stderr,
                     "known": known_value("piterbarg", 1.0, b) or "", "seconds": time.perf_counter() - t0})

    for r in rows:
        known = f"{r['known']:.4f}" if r["known"] != "" else "   -  "
        b = f"{r['b']:g}" if r["b"] != "" else "-"
        print(f"{r['kind']:>9} alpha={r['alpha']:<4g} b={b:<4} {r['value']:.4f} +- {r['stderr']:.4f}"
              f"  known {known}  ({r['seconds']:.1f} s)")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(rows_csv(rows, COLS))


if __name__ == "__main__":
    main()
