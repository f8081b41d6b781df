"""Command-line front end.

``qcdkit <command> [CONFIG] [--preset NAME] [--set section.key=value ...]``

Commands: ``simulate``, ``tradeoff``, ``overshoot``, ``decentralized``.  Each
writes a CSV with the header ``detector,threshold,metric,value,std_error,
trials,capped_fraction,seed``.  Exit codes: 0 success, 2 configuration
error, 3 estimation or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from typing import Sequence

import numpy as np

from .asymptotics import (
    DeterministicIncrement,
    FirstOrderInputs,
    estimate_overshoot,
    first_order_add,
    second_order_add,
    second_order_pfa,
)
from .config import PRESETS, ConfigError, ExperimentConfig, load_config, validate_required
from .decentralized import FusionRule, SensorNetworkConfig, fusion_thresholds, simulate_fusion
from .detectors.specs import DeShiryaev, FractionalShiryaev
from .dist_models import GeometricPrior, NeverChange
from .errors import CalibrationError, ContractError, EstimationError, InputError, NumericalError
from .sim_harness import (
    MetricEstimate,
    TrialPlan,
    estimate_add_pfa,
    estimate_ano,
    estimate_delay,
    estimate_far,
    estimate_mean_time_to_false_alarm,
    estimate_wadd_cadd,
    fit_slope,
    run_trials,
    tradeoff_sweep,
)

HEADER = ("detector", "threshold", "metric", "value", "std_error", "trials", "capped_fraction", "seed")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def format_number(v) -> str:
    """Locale-independent: '.' decimal point, scientific notation below 1e-3."""
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0.0:
        return "0"
    if abs(v) < 1e-3:
        return f"{v:.6e}"
    return f"{v:.10g}"


class Table:
    def __init__(self, seed: int):
        self.rows: list[tuple] = []
        self.seed = seed

    def add(self, detector: str, threshold, metric: str, value, std_error=0.0, trials="", capped_fraction=0.0):
        self.rows.append((detector, threshold, metric, value, std_error, trials, capped_fraction, self.seed))

    def add_estimate(self, detector: str, threshold, est: MetricEstimate):
        metric = est.name.value if hasattr(est.name, "value") else str(est.name)
        self.add(detector, threshold, metric, est.value, est.std_error, est.trials, est.capped_fraction)

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for row in self.rows:
            w.writerow([row[0], format_number(row[1]), row[2], *(format_number(v) for v in row[3:])])
        return buf.getvalue()


# --- commands ----------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig) -> Table:
    """Estimate delay and false-alarm metrics at each configured threshold."""
    validate_required(cfg, ("model", "change", "detector", "simulation"))
    model, law = cfg.model(), cfg.change_law()
    table = Table(cfg.seed)
    groups: dict[str, list] = {}
    for det in cfg.detectors():
        plan = TrialPlan(model, law, det, cfg.trials, cfg.horizon_cap, cfg.seed)
        batch = run_trials(plan, cfg.threads)
        if isinstance(law, GeometricPrior):
            ests = list(estimate_add_pfa(batch))
            if isinstance(det, (DeShiryaev, FractionalShiryaev)):
                ests.append(estimate_ano(batch))
        elif isinstance(law, NeverChange):
            ests = [estimate_far(batch), estimate_mean_time_to_false_alarm(batch)]
        elif law.gamma == 1 and det.worst_case_at_start:
            ests = [estimate_wadd_cadd(plan, cfg.threads)]
        else:
            ests = [estimate_delay(batch)]
        for e in ests:
            groups.setdefault(e.name.value, []).append((det.name, det.log_threshold, e))
    for rows in groups.values():
        for name, thr, e in rows:
            table.add_estimate(name, thr, e)
    return table


def cmd_tradeoff(cfg: ExperimentConfig) -> Table:
    """Sweep thresholds and fit the delay-versus-|log constraint| slope."""
    validate_required(cfg, ("model", "detector", "simulation"))
    thresholds = cfg.require("detector", "thresholds")
    if len(thresholds) < 3:
        raise ConfigError("detector.thresholds: a trade-off sweep needs at least 3 thresholds")
    mode = cfg.get("simulation", "mode")
    if mode is None:
        mode = "bayesian" if cfg.get("change", "law") == "geometric" else "minimax"
    if mode == "bayesian":
        validate_required(cfg, ("change",))
        law = cfg.change_law()
        if not isinstance(law, GeometricPrior):
            raise ConfigError("change.law must be geometric for a Bayesian trade-off")
    else:
        law = NeverChange()
    det = cfg.detector(thresholds[0])
    plan = TrialPlan(cfg.model(), law, det, cfg.trials, cfg.horizon_cap, cfg.seed)
    rows = tradeoff_sweep(plan, thresholds, mode, far_trials=cfg.get("simulation", "far_trials"), threads=cfg.threads)
    table = Table(cfg.seed)
    for r in rows:
        table.add_estimate(det.name, r.threshold, r.constraint)
        table.add_estimate(det.name, r.threshold, r.delay)
    fit = fit_slope(rows)
    table.add(det.name, "", "SLOPE", fit.slope, fit.slope_std_error, fit.points, "")
    return table


def cmd_overshoot(cfg: ExperimentConfig) -> Table:
    """Monte Carlo overshoot constants and second-order predictions."""
    validate_required(cfg, ("model",))
    rho = cfg.prior_rho()
    crossings = cfg.get("overshoot", "crossings", 100_000)
    thresholds = cfg.get("overshoot", "thresholds", (5.0, 15.0, 25.0))
    step = cfg.get("overshoot", "degenerate_step")
    model = DeterministicIncrement(step) if step is not None else cfg.model()
    est = estimate_overshoot(
        model, rho, crossings, thresholds, cfg.seed, eta_trials=cfg.get("overshoot", "eta_trials"), threads=cfg.threads
    )
    kl = step if step is not None else model.kl()
    d = -math.log1p(-rho)
    table = Table(cfg.seed)
    top = est.thresholds[-1]
    table.add("shiryaev", top, "KAPPA", est.kappa, est.kappa_se, est.num_crossings)
    table.add("shiryaev", top, "ZETA", est.zeta, est.zeta_se, est.num_crossings)
    table.add("shiryaev", top, "ETA_MEAN", est.eta_mean, est.eta_se, est.num_crossings)
    table.add("shiryaev", top, "FLAGGED", 1 if est.flagged else 0, 0.0, est.num_crossings)
    for b in cfg.get("overshoot", "predict", cfg.get("detector", "thresholds", ())):
        table.add("shiryaev", b, "SECOND_ORDER_PFA", second_order_pfa(b, est), 0.0, est.num_crossings)
        table.add("shiryaev", b, "SECOND_ORDER_ADD", second_order_add(b, est, kl, d), 0.0, est.num_crossings)
        table.add("shiryaev", b, "FIRST_ORDER_ADD", first_order_add(FirstOrderInputs(math.exp(-b), kl, d)), 0.0, "")
    return table


def cmd_decentralized(cfg: ExperimentConfig) -> Table:
    """Simulate a sensor network under each fusion rule."""
    validate_required(cfg, ("model", "change", "simulation"))
    if not cfg.has_section("network"):
        raise ConfigError("missing section [network]")
    model, law = cfg.model(), cfg.change_law()
    sensors = cfg.require("network", "sensors")
    try:
        rules = [FusionRule(r) for r in cfg.get("network", "rules", ("min", "max", "all", "sum"))]
    except ValueError as exc:
        raise ConfigError(f"network.rules: {exc}") from exc
    alpha = cfg.get("network", "alpha")
    local = cfg.get("network", "local_thresholds")
    if alpha is None and local is None:
        raise ConfigError("missing required key network.local_thresholds (or network.alpha)")
    base_sum = cfg.get("network", "sum_threshold", abs(math.log(alpha)) if alpha else None)
    base_central = cfg.get("network", "centralized_threshold", abs(math.log(alpha)) if alpha else None)
    common = dict(
        num_sensors=sensors,
        model=model,
        quantizer_levels=cfg.get("network", "quantizer_levels"),
        local_detector=cfg.get("network", "local_detector", "cusum"),
        sum_threshold=base_sum,
        centralized_threshold=base_central,
        rho=cfg.get("change", "rho", 0.0) or 0.0,
    )
    table = Table(cfg.seed)

    def network(thr) -> SensorNetworkConfig:
        try:
            return SensorNetworkConfig(local_thresholds=thr, **common)
        except InputError as exc:
            raise ConfigError(f"network: {exc}") from exc

    shared = network(local if local is not None else (fusion_thresholds("all", alpha, sensors),))
    shared_run = simulate_fusion(shared, law, cfg.trials, cfg.seed, horizon_cap=cfg.horizon_cap, threads=cfg.threads)
    for rule in rules + [FusionRule.CENTRALIZED]:
        if rule is FusionRule.CENTRALIZED and base_central is None:
            continue
        if rule is FusionRule.SUM and base_sum is None:
            continue
        run = shared_run
        if alpha is not None and local is None and rule not in (FusionRule.SUM, FusionRule.CENTRALIZED):
            run = simulate_fusion(
                network((fusion_thresholds(rule, alpha, sensors),)), law, cfg.trials, cfg.seed,
                horizon_cap=cfg.horizon_cap, threads=cfg.threads,
            )
        thr = {FusionRule.SUM: base_sum, FusionRule.CENTRALIZED: base_central}.get(rule, run.config.local_thresholds[0])
        for est in run.estimates(rule):
            table.add_estimate(f"fusion_{rule.value}", thr, est)
            if est.name.value == "DELAY" and alpha is not None:
                scale = abs(math.log(alpha))
                table.add(f"fusion_{rule.value}", thr, "DELAY_PER_LOG_ALPHA", est.value / scale, est.std_error / scale, est.trials)
    t = {r: shared_run.stopping_times(r) for r in (FusionRule.MIN, FusionRule.MAX, FusionRule.ALL)}
    ordered = np.mean(t[FusionRule.MIN] <= np.minimum(t[FusionRule.MAX], t[FusionRule.ALL]))
    thr0 = shared.local_thresholds[0]
    table.add("fusion", thr0, "ORDERING_HOLDS", float(ordered), 0.0, cfg.trials)
    if sensors == 1:
        same = np.mean((t[FusionRule.MIN] == t[FusionRule.MAX]) & (t[FusionRule.MAX] == t[FusionRule.ALL]))
        table.add("fusion", thr0, "SINGLE_SENSOR_EQUIVALENCE", float(same), 0.0, cfg.trials)
    table.add("centralized", "", "FIRST_ORDER_SLOPE", 1.0 / (sensors * model.kl()), 0.0, "")
    if shared.quantizer is not None:
        table.add("quantizer", "", "KL_QUANTIZED", shared.quantizer.kl_quantized, 0.0, "")
        table.add("quantizer", "", "KL_RAW", shared.quantizer.kl_raw, 0.0, "")
    return table


COMMANDS = {
    "simulate": cmd_simulate,
    "tradeoff": cmd_tradeoff,
    "overshoot": cmd_overshoot,
    "decentralized": cmd_decentralized,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcdkit", description="Quickest change detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.strip().splitlines()[0])
        p.add_argument("config", nargs="?", help="INI experiment file (optional with --preset)")
        p.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in experiment")
        p.add_argument("--trials", type=int, help="override simulation.trials")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--threads", type=int, help="worker threads; results do not depend on this")
        p.add_argument("--output", help="CSV destination ('-' for stdout); overrides output.path")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="override any config value (repeatable)",
        )
    return parser


def _overrides(args) -> list[str]:
    out = list(args.overrides)
    for flag, key in (("trials", "simulation.trials"), ("seed", "simulation.seed"), ("threads", "simulation.threads")):
        v = getattr(args, flag)
        if v is not None:
            out.append(f"{key}={v}")
    if args.output is not None:
        out.append(f"output.path={args.output}")
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.config is None and args.preset is None:
            raise ConfigError("give a config file or --preset")
        cfg = load_config(args.config, preset=args.preset, overrides=_overrides(args))
        table = COMMANDS[args.command](cfg)
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimationError, CalibrationError, NumericalError, ContractError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = table.render()
    path = cfg.get("output", "path", "-")
    if path == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {path}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
