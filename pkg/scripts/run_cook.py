#!/usr/bin/env python3
"""Reproduce the adaptive benchmark run through the command-line harness.

Writes a config file, runs it end to end (history CSV, final estimator
report, equilibration diagnostics), then prints the fitted log-log rate
of the total estimator against the dof count.
"""

from __future__ import annotations

import argparse
import csv
import pathlib
import sys

import numpy as np

from stresseq.harness import main as cli


def fit_rate(ns: np.ndarray, etas: np.ndarray, window: int) -> float:
    w = min(window, len(ns))
    return float(np.polyfit(np.log(ns[-w:]), np.log(etas[-w:]), 1)[0])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=14, help="refinement steps")
    ap.add_argument("--theta", type=float, default=0.5, help="marking fraction")
    ap.add_argument("--inv-lambda", type=float, default=0.0,
                    help="1/lambda; 0 is the incompressible limit")
    ap.add_argument("--mu", type=float, default=1.0, help="shear modulus")
    ap.add_argument("--out", default="out/cook", help="output directory")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = out / "run.cfg"
    config.write_text(
        "problem = cook\n"
        "k = 1\n"
        f"mu = {args.mu}\n"
        f"inv_lambda = {args.inv_lambda}\n"
        f"theta = {args.theta}\n"
        f"steps = {args.steps}\n"
        f"output_dir = {out}\n"
    )
    rc = cli(["run", str(config)])
    if rc != 0:
        return rc

    with open(out / "history.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    ns = np.array([float(r["N"]) for r in rows])
    print(f"\n{'step':>4} {'N':>7} {'eta_total':>12} {'bound':>12} {'effectivity':>11}")
    for r in rows:
        eff = f"{float(r['effectivity']):>11.2f}" if r["effectivity"] else f"{'-':>11}"
        print(
            f"{int(r['step']):>4} {int(r['N']):>7} "
            f"{float(r['eta_total']):>12.4e} {float(r['bound']):>12.4e} {eff}"
        )
    for name in ("eta_total", "eta_A", "eta_B", "eta_C"):
        vals = np.array([float(r[name]) for r in rows])
        print(f"rate of {name} vs N over the last 6 steps: "
              f"{fit_rate(ns, vals, 6):+.3f}  (optimal is -1)")
    print(f"outputs in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
