"""Seeded Monte Carlo engine: trials, metric estimates, calibration, sweeps.

A :class:`TrialPlan` fixes everything about an experiment.  Trial ``i`` is a
pure function of ``(plan.base_seed, i)``: the change point comes from one
uniform on the change stream and the observation at time n from counter n of
the observation stream.  Two execution routes exist:

* the compiled route (i.i.d. :class:`~qcdkit.dist_models.DensityPair` models and
  detectors with a kernel code), parallel over trials;
* the reference route, which steps the Python state machines and also
  handles GLR/mixture detectors and arbitrary :class:`LlrStream` sources.

On i.i.d. models with kernel-backed detectors the two routes agree trial by
trial, which the test suite checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numba
import numpy as np
from scipy import stats

from ._kernels import run_block
from .detectors.specs import DeShiryaev, DetectorSpec
from .detectors.streams import IidLlrStream, LlrStream
from .errors import CalibrationError, EstimationError, InputError
from .dist_models import NEVER, ChangePointLaw, DensityPair, FixedChange, GeometricPrior, NeverChange
from .rng import STREAM_CHANGE, STREAM_OBS, RngState, trial_key, uniform

#: a run whose capped fraction exceeds this is flagged as unreliable
MAX_CAPPED_FRACTION = 1e-3
DEFAULT_HORIZON_CAP = 10**6
#: change points at which CADD is probed when the worst case is not known to sit at 1
CADD_GRID = (1, 2, 5, 10, 20, 50, 100)


class Metric(str, enum.Enum):
    ADD = "ADD"
    PFA = "PFA"
    FAR = "FAR"
    WADD_CADD = "WADD_CADD"
    CADD_LOWER_BOUND = "CADD_LOWER_BOUND"
    ANO = "ANO"
    DELAY = "DELAY"  # E_gamma[tau - gamma | tau >= gamma] at a fixed change point
    MEAN_TIME_TO_FALSE_ALARM = "MeanTimeToFalseAlarm"


@dataclass(frozen=True)
class TrialPlan:
    model: DensityPair | LlrStream
    change_law: ChangePointLaw
    detector: DetectorSpec
    num_trials: int
    horizon_cap: int = DEFAULT_HORIZON_CAP
    base_seed: int = 0

    def __post_init__(self):
        if int(self.num_trials) != self.num_trials or self.num_trials < 1:
            raise InputError(f"num_trials must be a positive integer, got {self.num_trials!r}")
        if int(self.horizon_cap) != self.horizon_cap or self.horizon_cap < 1:
            raise InputError(f"horizon_cap must be a positive integer, got {self.horizon_cap!r}")
        if not 0 <= self.base_seed < 2**64:
            raise InputError("base_seed must be an unsigned 64-bit integer")
        if not isinstance(self.model, (DensityPair, LlrStream)):
            raise InputError("model must be a DensityPair or an LlrStream")

    @property
    def compiled(self) -> bool:
        return isinstance(self.model, DensityPair) and self.detector.kernel_code is not None

    def with_detector(self, detector: DetectorSpec) -> "TrialPlan":
        return replace(self, detector=detector)

    def with_law(self, law: ChangePointLaw) -> "TrialPlan":
        return replace(self, change_law=law)

    def with_trials(self, num_trials: int) -> "TrialPlan":
        return replace(self, num_trials=num_trials)


@dataclass(frozen=True)
class TrialOutcome:
    tau: int
    gamma: int | None  # None: the change never happens
    capped: bool
    observations_used: int
    pre_change_observations: int
    terminal_statistic: float


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Columnar outcomes of ``plan.num_trials`` trials (gamma = ``NEVER`` for no change)."""

    plan: TrialPlan
    tau: np.ndarray
    gamma: np.ndarray
    capped: np.ndarray
    observations_used: np.ndarray
    pre_change_observations: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return self.tau.shape[0]

    @property
    def capped_fraction(self) -> float:
        return float(self.capped.mean())

    def outcome(self, i: int) -> TrialOutcome:
        g = int(self.gamma[i])
        return TrialOutcome(
            int(self.tau[i]),
            None if g >= NEVER else g,
            bool(self.capped[i]),
            int(self.observations_used[i]),
            int(self.pre_change_observations[i]),
            float(self.terminal[i]),
        )


@dataclass(frozen=True)
class MetricEstimate:
    name: Metric
    value: float
    std_error: float
    trials: int
    capped_fraction: float = 0.0
    note: str = ""

    @property
    def flagged(self) -> bool:
        return self.capped_fraction > MAX_CAPPED_FRACTION

    def within(self, target: float, num_se: float = 3.0) -> bool:
        return abs(self.value - target) <= num_se * self.std_error

    def at_most(self, bound: float, num_se: float = 3.0) -> bool:
        return self.value <= bound + num_se * self.std_error


# --- running trials ----------------------------------------------------------


def _set_threads(threads: int | None) -> None:
    if threads is not None:
        if threads < 1:
            raise InputError("threads must be >= 1")
        numba.set_num_threads(min(int(threads), numba.config.NUMBA_NUM_THREADS))


def _run_compiled(plan: TrialPlan, first: int, num: int):
    law, rho, gamma = plan.change_law.kernel_args
    return run_block(
        np.int64(plan.detector.kernel_code),
        np.asarray(plan.detector.kernel_params(), dtype=np.float64),
        np.int64(plan.model.family_code),
        np.asarray(plan.model.params, dtype=np.float64),
        np.int64(law),
        float(rho),
        np.int64(gamma),
        np.uint64(plan.base_seed),
        np.int64(first),
        np.int64(num),
        np.int64(plan.horizon_cap),
    )


def run_trial_reference(plan: TrialPlan, trial_index: int) -> TrialOutcome:
    """Step the Python state machine; works for every detector and model.

    Before each observation the stream cursor is set to the time index, so an
    i.i.d. stream reproduces the compiled route exactly.  Streams that need
    more than one uniform per step should draw the extras from ``STREAM_AUX``.
    """
    key = np.uint64(trial_key(np.uint64(plan.base_seed), np.uint64(trial_index)))
    gamma = plan.change_law.draw(float(uniform(key, np.uint64(STREAM_CHANGE), np.uint64(0))))
    stream = IidLlrStream(plan.model) if isinstance(plan.model, DensityPair) else plan.model
    stream.reset()
    rng = RngState(plan.base_seed, trial_index, STREAM_OBS)
    det = plan.detector
    state = det.start()
    pre_used = 0
    for n in range(1, plan.horizon_cap + 1):
        post = gamma is not None and n >= gamma
        if det.wants_observation(state):
            rng.counter = n
            x, y = stream.next(post, rng)
            if not post:
                pre_used += 1
            state = det.step(state, x, y)
        else:
            state = det.step(state, None, None)
        if state.stopped:
            return TrialOutcome(n, gamma, False, det.observations_used(state), pre_used, det.terminal(state))
    cap = plan.horizon_cap
    return TrialOutcome(cap, gamma, True, det.observations_used(state), pre_used, det.terminal(state))


def run_trial(plan: TrialPlan, trial_index: int) -> TrialOutcome:
    if not 0 <= trial_index:
        raise InputError("trial_index must be non-negative")
    if not plan.compiled:
        return run_trial_reference(plan, trial_index)
    batch = TrialBatch(plan, *_run_compiled(plan, trial_index, 1))
    return batch.outcome(0)


def run_trials(plan: TrialPlan, threads: int | None = None) -> TrialBatch:
    """All ``plan.num_trials`` trials; the result does not depend on ``threads``."""
    _set_threads(threads)
    if plan.compiled:
        return TrialBatch(plan, *_run_compiled(plan, 0, plan.num_trials))
    outs = [run_trial_reference(plan, i) for i in range(plan.num_trials)]
    return TrialBatch(
        plan,
        np.array([o.tau for o in outs], dtype=np.int64),
        np.array([NEVER if o.gamma is None else o.gamma for o in outs], dtype=np.int64),
        np.array([o.capped for o in outs], dtype=bool),
        np.array([o.observations_used for o in outs], dtype=np.int64),
        np.array([o.pre_change_observations for o in outs], dtype=np.int64),
        np.array([o.terminal_statistic for o in outs], dtype=np.float64),
    )


# --- estimators --------------------------------------------------------------


def _batch(source: TrialPlan | TrialBatch, threads: int | None = None) -> TrialBatch:
    return source if isinstance(source, TrialBatch) else run_trials(source, threads)


def _check_not_all_capped(batch: TrialBatch) -> None:
    if batch.capped.all():
        raise EstimationError("every trial hit the horizon cap; no metric can be estimated")


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.shape[0]
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _cap_note(batch: TrialBatch) -> str:
    frac = batch.capped_fraction
    if frac > MAX_CAPPED_FRACTION:
        return f"capped fraction {frac:.2e} exceeds {MAX_CAPPED_FRACTION:g}; run flagged"
    return ""


def estimate_add_pfa(
    source: TrialPlan | TrialBatch, threads: int | None = None
) -> tuple[MetricEstimate, MetricEstimate]:
    """ADD = E[(tau - Gamma)^+] and PFA = P(tau < Gamma) under a geometric prior."""
    batch = _batch(source, threads)
    if not isinstance(batch.plan.change_law, GeometricPrior):
        raise InputError("ADD/PFA need a geometric change-point prior")
    _check_not_all_capped(batch)
    n = len(batch)
    delay = np.maximum(batch.tau - batch.gamma, 0).astype(np.float64)
    add, add_se = _mean_se(delay)
    pfa = float(np.count_nonzero(batch.tau < batch.gamma)) / n
    pfa_se = math.sqrt(pfa * (1.0 - pfa) / n)
    frac, note = batch.capped_fraction, _cap_note(batch)
    return (
        MetricEstimate(Metric.ADD, add, add_se, n, frac, note),
        MetricEstimate(Metric.PFA, pfa, pfa_se, n, frac, note),
    )


def _never_batch(source: TrialPlan | TrialBatch, threads: int | None) -> TrialBatch:
    batch = _batch(source, threads)
    if not isinstance(batch.plan.change_law, NeverChange):
        raise InputError("false-alarm rate needs the no-change law")
    _check_not_all_capped(batch)
    return batch


def estimate_mean_time_to_false_alarm(
    source: TrialPlan | TrialBatch, threads: int | None = None
) -> MetricEstimate:
    batch = _never_batch(source, threads)
    m, se = _mean_se(batch.tau.astype(np.float64))
    return MetricEstimate(
        Metric.MEAN_TIME_TO_FALSE_ALARM, m, se, len(batch), batch.capped_fraction, _cap_note(batch)
    )


def estimate_far(source: TrialPlan | TrialBatch, threads: int | None = None) -> MetricEstimate:
    """FAR = 1 / E_inf[tau]; delta-method standard error s / (sqrt(n) m^2)."""
    mt = estimate_mean_time_to_false_alarm(source, threads)
    far = 1.0 / mt.value
    return MetricEstimate(Metric.FAR, far, mt.std_error * far * far, mt.trials, mt.capped_fraction, mt.note)


def estimate_wadd_cadd(plan: TrialPlan, threads: int | None = None) -> MetricEstimate:
    """E_1[tau - 1], which equals both WADD and CADD for zero-start CuSum and SR."""
    if not plan.detector.worst_case_at_start:
        raise InputError(
            f"worst-case delay equals E_1[tau - 1] only for zero-start CuSum/SR, not {plan.detector.name!r}"
        )
    batch = run_trials(plan.with_law(FixedChange(1)), threads)
    _check_not_all_capped(batch)
    m, se = _mean_se((batch.tau - 1).astype(np.float64))
    return MetricEstimate(Metric.WADD_CADD, m, se, len(batch), batch.capped_fraction, _cap_note(batch))


def estimate_cadd_lower_bound(
    plan: TrialPlan, grid: Sequence[int] = CADD_GRID, threads: int | None = None
) -> MetricEstimate:
    """max over gamma in ``grid`` of E_gamma[tau - gamma | tau >= gamma].

    The true CADD is a supremum over every change point, so this is a lower
    bound; the note says so.
    """
    best: MetricEstimate | None = None
    for g in grid:
        batch = run_trials(plan.with_law(FixedChange(int(g))), threads)
        alive = batch.tau >= g
        if not alive.any():
            continue
        delay = (batch.tau[alive] - g).astype(np.float64)
        m, se = _mean_se(delay)
        if best is None or m > best.value:
            best = MetricEstimate(
                Metric.CADD_LOWER_BOUND,
                m,
                se,
                int(alive.sum()),
                batch.capped_fraction,
                f"lower bound on CADD: max over change points {tuple(grid)} (attained at {g})",
            )
    if best is None:
        raise EstimationError("detector stopped before every probed change point")
    return best


def estimate_worst_case_delay(plan: TrialPlan, threads: int | None = None) -> MetricEstimate:
    if plan.detector.worst_case_at_start:
        return estimate_wadd_cadd(plan, threads)
    return estimate_cadd_lower_bound(plan, threads=threads)


def estimate_delay(source: TrialPlan | TrialBatch, threads: int | None = None) -> MetricEstimate:
    """E_gamma[tau - gamma | tau >= gamma] for a fixed change point gamma."""
    batch = _batch(source, threads)
    law = batch.plan.change_law
    if not isinstance(law, FixedChange):
        raise InputError("conditional delay needs a fixed change point")
    _check_not_all_capped(batch)
    alive = batch.tau >= law.gamma
    if not alive.any():
        raise EstimationError("every trial stopped before the change point")
    m, se = _mean_se((batch.tau[alive] - law.gamma).astype(np.float64))
    return MetricEstimate(Metric.DELAY, m, se, int(alive.sum()), batch.capped_fraction, _cap_note(batch))


def estimate_ano(source: TrialPlan | TrialBatch, threads: int | None = None) -> MetricEstimate:
    """Mean number of observations taken at times k <= min(tau, Gamma - 1)."""
    batch = _batch(source, threads)
    _check_not_all_capped(batch)
    m, se = _mean_se(batch.pre_change_observations.astype(np.float64))
    return MetricEstimate(Metric.ANO, m, se, len(batch), batch.capped_fraction, _cap_note(batch))


# --- calibration -------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    analytic_threshold: float
    calibrated_threshold: float
    achieved: MetricEstimate
    evaluations: int
    converged: bool


def _constraint(plan: TrialPlan, target: str, threads: int | None) -> MetricEstimate:
    if target == "pfa":
        return estimate_add_pfa(plan, threads)[1]
    if target == "far":
        return estimate_far(plan.with_law(NeverChange()), threads)
    raise InputError(f"calibration target must be 'pfa' or 'far', got {target!r}")


def calibrate_threshold(
    plan: TrialPlan,
    alpha: float,
    target: str = "pfa",
    *,
    max_expansions: int = 12,
    max_evaluations: int = 40,
    threads: int | None = None,
) -> CalibrationResult:
    """Bisect the log threshold until the constraint metric lands in [0.9 alpha, alpha].

    The search starts from the detector's analytic threshold for ``alpha``.
    Every evaluation uses the same base seed (common random numbers), so the
    estimated metric is monotone in the threshold.  If the window cannot be
    hit (Monte Carlo metrics are step functions) the smallest feasible
    threshold found is returned with ``converged=False``.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    det = plan.detector
    t0 = det.analytic_log_threshold(alpha)
    evals = 0

    def metric_at(t: float) -> MetricEstimate:
        nonlocal evals
        evals += 1
        return _constraint(plan.with_detector(det.with_log_threshold(t)), target, threads)

    m0 = metric_at(t0)
    if 0.9 * alpha <= m0.value <= alpha:
        return CalibrationResult(t0, t0, m0, evals, True)
    step = 1.0
    if m0.value > alpha:
        lo, hi, m_hi = t0, None, None
        for _ in range(max_expansions):
            t = lo + step
            m = metric_at(t)
            if m.value <= alpha:
                hi, m_hi = t, m
                break
            lo, step = t, 2 * step
    else:
        hi, m_hi, lo = t0, m0, None
        for _ in range(max_expansions):
            t = hi - step
            m = metric_at(t)
            if m.value > alpha:
                lo = t
                break
            hi, m_hi, step = t, m, 2 * step
    if lo is None or hi is None:
        raise CalibrationError(f"could not bracket {target} = {alpha:g} around threshold {t0:.4g}")
    while evals < max_evaluations:
        if 0.9 * alpha <= m_hi.value <= alpha:
            return CalibrationResult(t0, hi, m_hi, evals, True)
        mid = 0.5 * (lo + hi)
        m = metric_at(mid)
        if m.value <= alpha:
            hi, m_hi = mid, m
        else:
            lo = mid
        if hi - lo < 1e-9:
            break
    return CalibrationResult(t0, hi, m_hi, evals, 0.9 * alpha <= m_hi.value <= alpha)


@dataclass(frozen=True)
class LowerThresholdResult:
    lower: float
    achieved: MetricEstimate
    evaluations: int
    converged: bool


def calibrate_lower_threshold(
    plan: TrialPlan,
    target_ano: float,
    *,
    rel_tol: float = 0.02,
    bracket: tuple[float, float] = (0.0, 0.5),
    max_evaluations: int = 30,
    threads: int | None = None,
) -> LowerThresholdResult:
    """Bisect a data-efficient detector's skip threshold B until ANO is within ``rel_tol`` of the target.

    ANO falls as B rises (more slots are skipped), so the search keeps the
    bracket ``[lo, hi]`` with ANO(lo) >= target >= ANO(hi).
    """
    det = plan.detector
    if not isinstance(det, DeShiryaev):
        raise InputError("only the data-efficient Shiryaev detector has a skip threshold")
    if not target_ano > 0:
        raise InputError("target ANO must be positive")
    lo, hi = bracket
    evals = 0

    def ano_at(b: float) -> MetricEstimate:
        nonlocal evals
        evals += 1
        return estimate_ano(plan.with_detector(replace(det, lower=b)), threads)

    a_lo, a_hi = ano_at(lo), ano_at(hi)
    if not a_lo.value >= target_ano >= a_hi.value:
        raise CalibrationError(
            f"ANO {target_ano:g} is outside [{a_hi.value:.4g}, {a_lo.value:.4g}] spanned by B in {bracket}"
        )
    best_b, best = (lo, a_lo) if abs(a_lo.value - target_ano) < abs(a_hi.value - target_ano) else (hi, a_hi)
    while evals < max_evaluations and abs(best.value - target_ano) > rel_tol * target_ano:
        mid = 0.5 * (lo + hi)
        a = ano_at(mid)
        if a.value >= target_ano:
            lo = mid
        else:
            hi = mid
        if abs(a.value - target_ano) < abs(best.value - target_ano):
            best_b, best = mid, a
    return LowerThresholdResult(best_b, best, evals, abs(best.value - target_ano) <= rel_tol * target_ano)


# --- trade-off curves --------------------------------------------------------


@dataclass(frozen=True)
class TradeoffRow:
    threshold: float
    constraint: MetricEstimate  # PFA (Bayesian) or FAR (minimax)
    delay: MetricEstimate  # ADD (Bayesian) or worst-case delay (minimax)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_std_error: float
    points: int


def tradeoff_sweep(
    plan: TrialPlan,
    thresholds: Sequence[float],
    mode: str = "bayesian",
    *,
    far_trials: int | None = None,
    threads: int | None = None,
) -> list[TradeoffRow]:
    """One (constraint, delay) pair per log threshold.

    ``mode="bayesian"`` runs the plan's geometric prior and reports (PFA, ADD).
    ``mode="minimax"`` reports FAR from a no-change run with ``far_trials``
    trials (default: the plan's) and the worst-case delay from change point 1
    (or the CADD grid lower bound when the detector does not start at zero).
    """
    if len(thresholds) < 3:
        raise InputError("a trade-off sweep needs at least 3 thresholds")
    rows = []
    for t in thresholds:
        p = plan.with_detector(plan.detector.with_log_threshold(t))
        if mode == "bayesian":
            add, pfa = estimate_add_pfa(p, threads)
            rows.append(TradeoffRow(float(t), pfa, add))
        elif mode == "minimax":
            never = p.with_law(NeverChange())
            if far_trials is not None:
                never = never.with_trials(far_trials)
            rows.append(TradeoffRow(float(t), estimate_far(never, threads), estimate_worst_case_delay(p, threads)))
        else:
            raise InputError(f"mode must be 'bayesian' or 'minimax', got {mode!r}")
    return rows


def fit_slope(rows: Sequence[TradeoffRow]) -> SlopeFit:
    """Least-squares slope of delay against |log constraint|."""
    if len(rows) < 3:
        raise InputError("slope fit needs at least 3 points")
    x = np.array([abs(math.log(r.constraint.value)) if r.constraint.value > 0 else math.inf for r in rows])
    y = np.array([r.delay.value for r in rows])
    if not np.all(np.isfinite(x)):
        raise EstimationError("a constraint estimate is zero; raise the trial count or lower the thresholds")
    fit = stats.linregress(x, y)
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.stderr), len(rows))
