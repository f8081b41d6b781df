"""Observation cost against delay for data-efficient Shiryaev.

N(0,1) -> N(0.75,1), geometric prior rate 0.01.  Every detector is
calibrated to the same PFA.  For each skip threshold B the script reports
ADD and ANO, next to plain Shiryaev (B = 0) and to fractional sampling, which
observes every ``period``-th slot.

    python scripts/de_shiryaev_tradeoff.py --alpha 5e-3 --lower 0.02 0.04 0.06 0.1
"""

import argparse

from qcdkit.detectors.specs import DeShiryaev, FractionalShiryaev, Shiryaev
from qcdkit.dist_models import GaussianMeanShift, GeometricPrior
from qcdkit.sim_harness import TrialPlan, calibrate_threshold, estimate_add_pfa, estimate_ano, run_trials


def calibrated_row(plan: TrialPlan, alpha: float):
    cal = calibrate_threshold(plan, alpha, "pfa")
    batch = run_trials(plan.with_detector(plan.detector.with_log_threshold(cal.calibrated_threshold)))
    add, pfa = estimate_add_pfa(batch)
    return cal.calibrated_threshold, add, pfa, estimate_ano(batch)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alpha", type=float, default=5e-3)
    parser.add_argument("--lower", type=float, nargs="+", default=[0.02, 0.04, 0.06, 0.08, 0.12])
    parser.add_argument("--period", type=int, default=2)
    parser.add_argument("--trials", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=61)
    args = parser.parse_args()

    model, rho = GaussianMeanShift(0.0, 0.75), 0.01
    base = TrialPlan(model, GeometricPrior(rho), Shiryaev(5.0, rho), args.trials, base_seed=args.seed)
    detectors = [("shiryaev", Shiryaev(5.0, rho)), (f"fractional/{args.period}", FractionalShiryaev(5.0, rho, args.period))]
    detectors += [(f"de B={b:g}", DeShiryaev(5.0, rho, b)) for b in args.lower]
    print(f"{'detector':>16} {'log thr':>8} {'PFA':>10} {'ADD':>8} {'ANO':>8}")
    for label, det in detectors:
        thr, add, pfa, ano = calibrated_row(base.with_detector(det), args.alpha)
        print(f"{label:>16} {thr:8.3f} {pfa.value:10.3e} {add.value:8.2f} {ano.value:8.2f}")


if __name__ == "__main__":
    main()
