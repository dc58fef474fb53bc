#!/usr/bin/env python3
"""Run empirical-versus-asymptotic comparisons for TOML configs.

Each config gets <out>/<stem>/{record.json, ratios.csv, ratios.svg}.
"""

import argparse
import time
from pathlib import Path

from gaussex.config import formula_from_config, grid_from_config, load_config, model_from_config, store_csv, store_record
from gaussex.harness import ratio_table
from gaussex.svg import write_ratio_plot

ROOT = Path(__file__).resolve().parents[1]


def run(path: Path, out: Path, n_reps=None, threads=None):
    cfg = load_config(path)
    model = model_from_config(cfg)
    grid = grid_from_config(cfg, model)
    t0 = time.perf_counter()
    rec = ratio_table(model, formula_from_config(cfg), cfg.run.u, grid, n_reps or cfg.run.n_reps, cfg.run.seed,
                      config_hash=cfg.config_hash(), threads=threads)
    dest = out / path.stem
    store_record(rec, dest / "record.json")
    store_csv(rec, dest / "ratios.csv")
    write_ratio_plot(rec.rows, dest / "ratios.svg", title=model.name)
    print(f"{path.name}: {len(grid)} grid points, {rec.n_reps} reps, {time.perf_counter() - t0:.1f} s")
    for r in rec.rows:
        flag = "  MISMATCH" if r["flag"] else ""
        print(f"  u={r['u']:<5g} p_hat={r['p_hat']:.4e} asym={r['asymptotic']:.4e} "
              f"ratio={r['ratio']:.3f} [{r['ratio_lo']:.3f}, {r['ratio_hi']:.3f}]{flag}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path, help="defaults to every configs/*.toml")
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--n-reps", type=int, help="override run.n_reps (quick looks)")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args(argv)
    for path in args.configs or sorted((ROOT / "configs").glob("*.toml")):
        run(path, args.out, args.n_reps, args.threads)


if __name__ == "__main__":
    main()
