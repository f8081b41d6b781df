"""Fusion rules on a network of CuSum sensors across false-alarm levels.

For each alpha, every rule uses its own per-sensor threshold heuristic.  The
script measures the achieved FAR (no change) and the delay (change at time 1)
and prints delay / |log FAR| next to the centralized first-order slope
1 / (L * D).

    python scripts/fusion_rules.py --sensors 2 --alpha 1e-2 1e-3 1e-4
"""

import argparse
import math

from qcdkit.decentralized import SensorNetworkConfig, fusion_thresholds, simulate_fusion
from qcdkit.dist_models import FixedChange, GaussianMeanShift, NeverChange

RULES = ("min", "max", "all", "sum", "centralized")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sensors", type=int, default=2)
    parser.add_argument("--alpha", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    parser.add_argument("--levels", type=int, default=None, help="quantizer levels (default: raw statistics)")
    parser.add_argument("--far-trials", type=int, default=1000)
    parser.add_argument("--delay-trials", type=int, default=20_000)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    model = GaussianMeanShift(0.0, 1.0)
    slope = 1.0 / (args.sensors * model.kl())
    print(f"centralized first-order slope {slope:.3f}")
    print(f"{'alpha':>8} {'rule':>12} {'local thr':>9} {'FAR':>10} {'delay':>8} {'delay/|log FAR|':>16}")
    for alpha in args.alpha:
        base = abs(math.log(alpha))
        for rule in RULES:
            thr = fusion_thresholds("max" if rule == "centralized" else rule, alpha, args.sensors)
            cfg = SensorNetworkConfig(
                args.sensors, model, (thr,), quantizer_levels=args.levels, fusion_rule="min" if rule == "centralized" else rule,
                sum_threshold=base, centralized_threshold=base,
            )
            only = dict(rules=[rule])
            far = simulate_fusion(cfg, NeverChange(), args.far_trials, args.seed, horizon_cap=10**7, **only)
            delay = simulate_fusion(cfg, FixedChange(1), args.delay_trials, args.seed + 1, **only)
            far, delay = far.estimates(rule)[0], delay.estimates(rule)[0]
            ratio = delay.value / abs(math.log(far.value))
            print(f"{alpha:8.0e} {rule:>12} {thr:9.3f} {far.value:10.3e} {delay.value:8.3f} {ratio:16.3f}")


if __name__ == "__main__":
    main()
