"""Delay against |log false-alarm| curves and their fitted slopes.

Runs the fig4 preset (Shiryaev, ADD against PFA) and the fig6 preset (CuSum,
worst-case delay against FAR), writes one CSV row per threshold and prints
the least-squares slope next to its first-order value.

    python scripts/tradeoff_curves.py --output tradeoff.csv
"""

import argparse
import csv
import math
import sys

from qcdkit.config import load_config
from qcdkit.dist_models import GeometricPrior, NeverChange
from qcdkit.sim_harness import TrialPlan, fit_slope, tradeoff_sweep


def sweep(preset: str, trials: int | None):
    cfg = load_config(preset=preset)
    mode = cfg.get("simulation", "mode")
    thresholds = cfg.require("detector", "thresholds")
    law = GeometricPrior(cfg.prior_rho()) if mode == "bayesian" else NeverChange()
    plan = TrialPlan(cfg.model(), law, cfg.detector(thresholds[0]), trials or cfg.trials, cfg.horizon_cap, cfg.seed)
    rows = tradeoff_sweep(plan, thresholds, mode, far_trials=cfg.get("simulation", "far_trials"))
    kl = cfg.model().kl()
    d = -math.log1p(-cfg.prior_rho()) if mode == "bayesian" else 0.0
    return rows, fit_slope(rows), 1.0 / (kl + d)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=None, help="override each preset's trial count")
    parser.add_argument("--output", default="-")
    args = parser.parse_args()
    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["preset", "threshold", "constraint", "constraint_se", "delay", "delay_se"])
    for preset in ("fig4", "fig6"):
        rows, fit, first_order = sweep(preset, args.trials)
        for r in rows:
            writer.writerow([preset, r.threshold, r.constraint.value, r.constraint.std_error, r.delay.value, r.delay.std_error])
        print(f"{preset}: slope {fit.slope:.3f} +- {fit.slope_std_error:.3f}, first-order {first_order:.3f}", file=sys.stderr)
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
