"""Multi-sensor change detection with quantized messages and fusion rules.

L sensors observe independent i.i.d. streams that change at the same time.
Each sensor either runs its local detector on the raw log-likelihood ratio or
first passes the observation through a monotone-likelihood-ratio (MLR)
quantizer, in which case the local detector runs on the log-likelihood ratio
of the transmitted symbol.  The fusion center stops by one of

* ``MIN`` -- the first time any local statistic crosses its threshold;
* ``MAX`` -- once every sensor has crossed at least once (sensors freeze at
  their first crossing);
* ``ALL`` -- the first time all local statistics are above their thresholds
  simultaneously (sensors keep running);
* ``SUM`` -- the first time the sum of the sensors' real-valued CuSum
  statistics crosses ``sum_threshold``.

Every trial also runs a centralized CuSum on the summed raw log-likelihood
ratios, the benchmark the fusion rules are compared against.  All rules are
evaluated on the same simulated paths.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from numba import njit, prange
from scipy import optimize, stats

from .detectors._core import cusum_update, shiryaev_log_update
from .dist_models import (
    ChangePointLaw,
    DensityPair,
    ExponentialRate,
    GaussianMeanShift,
    GeometricPrior,
    NeverChange,
    _draw_change,
    _family_llr,
    _family_sample,
)
from .errors import EstimationError, InputError
from .rng import STREAM_CHANGE, STREAM_SENSOR, trial_key, uniform
from .sim_harness import MAX_CAPPED_FRACTION, Metric, MetricEstimate

GRID_POINTS = 2048
ASCENT_ROUNDS = 3
_TAIL = 1e-12


class FusionRule(str, enum.Enum):
    MIN = "min"
    MAX = "max"
    ALL = "all"
    SUM = "sum"
    CENTRALIZED = "centralized"


RULE_ORDER = (FusionRule.MIN, FusionRule.MAX, FusionRule.ALL, FusionRule.SUM, FusionRule.CENTRALIZED)


# --- quantizer design --------------------------------------------------------


def _affine_llr(model: DensityPair) -> tuple[float, float, object, object]:
    """llr(x) = slope * x + offset, plus the frozen scipy laws of X before/after."""
    if isinstance(model, GaussianMeanShift):
        s2 = model.sigma**2
        slope = (model.mu1 - model.mu0) / s2
        offset = -(model.mu1**2 - model.mu0**2) / (2 * s2)
        return slope, offset, stats.norm(model.mu0, model.sigma), stats.norm(model.mu1, model.sigma)
    if isinstance(model, ExponentialRate):
        slope = -(model.lam1 - model.lam0)
        offset = math.log(model.lam1 / model.lam0)
        return slope, offset, stats.expon(scale=1 / model.lam0), stats.expon(scale=1 / model.lam1)
    raise InputError(f"MLR quantizer design needs a continuous scalar family, got {type(model).__name__}")


def _llr_tails(slope, offset, law, t):
    """(P(llr < t), P(llr >= t)) computed separately so neither tail cancels to zero."""
    x = (np.asarray(t, dtype=float) - offset) / slope
    if slope > 0:
        return law.cdf(x), law.sf(x)
    return law.sf(x), law.cdf(x)


def _cell_mass(lower_a, upper_a, lower_b, upper_b):
    """Mass of [a, b) from both tail representations; keeps whichever avoids cancellation."""
    return np.maximum(lower_b - lower_a, upper_a - upper_b)


def _cell_probs(slope, offset, law, thresholds):
    t = np.concatenate([[-np.inf], np.asarray(thresholds, dtype=float), [np.inf]])
    lower, upper = _llr_tails(slope, offset, law, t)
    return _cell_mass(lower[:-1], upper[:-1], lower[1:], upper[1:])


def _kl_terms(q1, q0):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q1 > 0, q1 * (np.log(q1) - np.log(q0)), 0.0)


def _quantized_kl(q1: np.ndarray, q0: np.ndarray) -> float:
    return float(np.sum(_kl_terms(q1, q0)))


@dataclass(frozen=True)
class MlrQuantizer:
    """Symbol u = number of LLR thresholds at or below log L(x)."""

    llr_thresholds: tuple[float, ...]
    x_thresholds: tuple[float, ...]
    q0: tuple[float, ...]
    q1: tuple[float, ...]
    kl_quantized: float
    kl_raw: float

    @property
    def levels(self) -> int:
        return len(self.q0)

    @property
    def symbol_llr(self) -> np.ndarray:
        return np.log(np.asarray(self.q1)) - np.log(np.asarray(self.q0))

    def quantize(self, llr: float) -> int:
        return int(np.searchsorted(np.asarray(self.llr_thresholds), llr, side="right"))


def quantizer_kl(model: DensityPair, llr_thresholds) -> float:
    """K-L divergence between the symbol laws induced by the given LLR thresholds."""
    slope, offset, law0, law1 = _affine_llr(model)
    t = np.sort(np.asarray(llr_thresholds, dtype=float))
    return _quantized_kl(_cell_probs(slope, offset, law1, t), _cell_probs(slope, offset, law0, t))


def design_mlr_quantizer(model: DensityPair, levels: int) -> MlrQuantizer:
    """Thresholds on the log-likelihood-ratio axis maximizing the quantized K-L divergence.

    Starts from the split into ``levels`` cells of equal probability under
    f0, then runs coordinate ascent over a ``GRID_POINTS`` grid between each
    threshold's neighbours for ``ASCENT_ROUNDS`` rounds, and finally polishes
    each threshold with a bounded scalar search.
    """
    if int(levels) != levels or levels < 2:
        raise InputError("a quantizer needs at least 2 levels")
    slope, offset, law0, law1 = _affine_llr(model)
    # LLR range that carries all but ~1e-12 of the mass under either law
    xs = [law.ppf(q) for law in (law0, law1) for q in (_TAIL, 1 - _TAIL)]
    llrs = [slope * x + offset for x in xs]
    lo, hi = min(llrs), max(llrs)
    # equal-probability split under f0, expressed on the LLR axis
    qs = np.arange(1, levels) / levels
    x_init = law0.ppf(qs) if slope > 0 else law0.ppf(1 - qs)
    t = np.sort(slope * x_init + offset)

    def objective(vec):
        return quantizer_kl(model, vec)

    start = t.copy()
    start_value = objective(start)
    best = start_value
    for _ in range(ASCENT_ROUNDS):
        for k in range(levels - 1):
            left = t[k - 1] if k > 0 else lo
            right = t[k + 1] if k < levels - 2 else hi
            grid = np.linspace(left, right, GRID_POINTS)
            # moving threshold k only changes cells k and k + 1
            values = np.zeros(GRID_POINTS)
            rest = np.delete(np.arange(levels), [k, k + 1])
            q1_all = _cell_probs(slope, offset, law1, t)
            q0_all = _cell_probs(slope, offset, law0, t)
            const = float(np.sum(_kl_terms(q1_all[rest], q0_all[rest])))
            cells = {}
            for name, law in (("q1", law1), ("q0", law0)):
                la, ua = _llr_tails(slope, offset, law, left if k > 0 else -np.inf)
                lg, ug = _llr_tails(slope, offset, law, grid)
                lb, ub = _llr_tails(slope, offset, law, right if k < levels - 2 else np.inf)
                cells[name] = (_cell_mass(la, ua, lg, ug), _cell_mass(lg, ug, lb, ub))
            values = const + _kl_terms(cells["q1"][0], cells["q0"][0]) + _kl_terms(cells["q1"][1], cells["q0"][1])
            values = np.where(np.isfinite(values), values, -np.inf)
            j = int(np.argmax(values))
            if values[j] > best:
                best = float(values[j])
                t[k] = grid[j]
    for k in range(levels - 1):
        left = t[k - 1] if k > 0 else lo
        right = t[k + 1] if k < levels - 2 else hi
        if right - left <= 0:
            continue

        def neg(v, k=k):
            trial = t.copy()
            trial[k] = v
            return -objective(trial)

        res = optimize.minimize_scalar(neg, bounds=(left, right), method="bounded", options={"xatol": 1e-10})
        if res.success and -res.fun > best:
            best = float(-res.fun)
            t[k] = res.x
    if not best > start_value:
        warnings.warn("quantizer optimization did not improve on the equal-probability split", RuntimeWarning)
        t, best = start, start_value
    q0 = _cell_probs(slope, offset, law0, t)
    q1 = _cell_probs(slope, offset, law1, t)
    x_thr = tuple(float(v) for v in np.sort((t - offset) / slope))
    return MlrQuantizer(
        tuple(float(v) for v in t), x_thr, tuple(map(float, q0)), tuple(map(float, q1)), float(best), model.kl()
    )


# --- network configuration ---------------------------------------------------


@dataclass(frozen=True)
class SensorNetworkConfig:
    num_sensors: int
    model: DensityPair
    local_thresholds: tuple[float, ...]
    quantizer_levels: int | None = None
    local_detector: str = "cusum"
    fusion_rule: FusionRule = FusionRule.ALL
    sum_threshold: float | None = None
    centralized_threshold: float | None = None
    rho: float = 0.0  # prior parameter for Shiryaev local detectors
    quantizer: MlrQuantizer | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.num_sensors) != self.num_sensors or self.num_sensors < 1:
            raise InputError("num_sensors must be a positive integer")
        thr = tuple(float(b) for b in np.atleast_1d(self.local_thresholds))
        if len(thr) == 1:
            thr = thr * self.num_sensors
        if len(thr) != self.num_sensors:
            raise InputError("need one local threshold or one per sensor")
        if not all(b > 0 and math.isfinite(b) for b in thr):
            raise InputError("local thresholds must be positive and finite")
        object.__setattr__(self, "local_thresholds", thr)
        object.__setattr__(self, "fusion_rule", FusionRule(self.fusion_rule))
        if self.local_detector not in ("cusum", "shiryaev"):
            raise InputError(f"local_detector must be 'cusum' or 'shiryaev', got {self.local_detector!r}")
        if self.local_detector == "shiryaev" and not 0.0 < self.rho < 1.0:
            raise InputError("Shiryaev local detectors need rho in (0, 1)")
        for name in ("sum_threshold", "centralized_threshold"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InputError(f"{name} must be positive")
        if self.fusion_rule is FusionRule.SUM and self.sum_threshold is None:
            raise InputError("the SUM rule needs sum_threshold")
        if self.quantizer_levels is not None and self.quantizer is None:
            object.__setattr__(self, "quantizer", design_mlr_quantizer(self.model, self.quantizer_levels))


def fusion_thresholds(rule: FusionRule | str, alpha: float, num_sensors: int) -> float:
    """Equal per-sensor log thresholds aimed at a global false-alarm level ``alpha``.

    MIN uses |log alpha| + log L (union bound over sensors); ALL uses
    |log alpha| / L (the local statistics must all be high at once); MAX,
    SUM and the centralized benchmark use |log alpha|.  These are heuristics,
    so check the achieved FAR by simulation.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    rule = FusionRule(rule)
    base = abs(math.log(alpha))
    if rule is FusionRule.MIN:
        return base + math.log(num_sensors)
    if rule is FusionRule.ALL:
        return base / num_sensors
    return base


# --- simulation --------------------------------------------------------------


@njit(cache=True, parallel=True)
def _fusion_block(
    family, fparams, num_sensors, quant_thr, sym_llr, quantized, shiryaev, rho,
    local_thr, sum_thr, central_thr, active, law, rho_law, gamma_fixed, base_seed, num, cap,
):
    nrules = 5
    tau = np.zeros((num, nrules), np.int64)
    gamma = np.empty(num, np.int64)
    seed = np.uint64(base_seed)
    for i in prange(num):
        key = trial_key(seed, np.uint64(i))
        g = _draw_change(law, rho_law, gamma_fixed, uniform(key, np.uint64(STREAM_CHANGE), np.uint64(0)))
        gamma[i] = g
        stat = np.full(num_sensors, -np.inf) if shiryaev else np.zeros(num_sensors)
        raw_w = np.zeros(num_sensors)
        local_tau = np.zeros(num_sensors, np.int64)
        central = 0.0
        # inactive rules, and rules without a configured threshold, must not hold the trial open
        done = ~active
        done[3] = done[3] or sum_thr == np.inf
        done[4] = done[4] or central_thr == np.inf
        for n in range(1, cap + 1):
            post = n >= g
            total = 0.0
            any_cross = False
            all_above = True
            all_crossed = True
            raw_sum = 0.0
            for s in range(num_sensors):
                u = uniform(key, np.uint64(STREAM_SENSOR + s), np.uint64(n))
                y = _family_llr(family, fparams, _family_sample(family, fparams, post, u))
                total += y
                yq = y
                if quantized:
                    sym = 0
                    while sym < quant_thr.shape[0] and quant_thr[sym] <= y:
                        sym += 1
                    yq = sym_llr[sym]
                if shiryaev:
                    stat[s] = shiryaev_log_update(stat[s], rho, yq)
                else:
                    stat[s] = cusum_update(stat[s], yq)
                raw_w[s] = cusum_update(raw_w[s], y)
                raw_sum += raw_w[s]
                above = stat[s] >= local_thr[s]
                if above and local_tau[s] == 0:
                    local_tau[s] = n
                any_cross = any_cross or above
                all_above = all_above and above
                all_crossed = all_crossed and local_tau[s] > 0
            central = cusum_update(central, total)
            if not done[0] and any_cross:
                tau[i, 0] = n
                done[0] = True
            if not done[1] and all_crossed:
                tau[i, 1] = n
                done[1] = True
            if not done[2] and all_above:
                tau[i, 2] = n
                done[2] = True
            if not done[3] and raw_sum >= sum_thr:
                tau[i, 3] = n
                done[3] = True
            if not done[4] and central >= central_thr:
                tau[i, 4] = n
                done[4] = True
            if done.all():
                break
    return tau, gamma


@dataclass(frozen=True, eq=False)
class FusionResult:
    config: SensorNetworkConfig
    change_law: ChangePointLaw
    tau: dict  # FusionRule -> int64 array, 0 where the rule never stopped before the cap
    gamma: np.ndarray
    horizon_cap: int
    base_seed: int

    def stopping_times(self, rule: FusionRule | str) -> np.ndarray:
        """Stopping times with capped trials set to the cap."""
        t = self.tau[FusionRule(rule)]
        return np.where(t == 0, self.horizon_cap, t)

    def capped_fraction(self, rule: FusionRule | str) -> float:
        return float(np.mean(self.tau[FusionRule(rule)] == 0))

    def estimates(self, rule: FusionRule | str | None = None) -> list[MetricEstimate]:
        """Metrics appropriate to the change law, for ``rule`` (default: the configured one)."""
        rule = self.config.fusion_rule if rule is None else FusionRule(rule)
        tau = self.stopping_times(rule)
        frac = self.capped_fraction(rule)
        if frac == 1.0:
            raise EstimationError(f"every trial of the {rule.value} rule hit the horizon cap")
        note = f"capped fraction {frac:.2e} exceeds {MAX_CAPPED_FRACTION:g}; run flagged" if frac > MAX_CAPPED_FRACTION else ""
        n = tau.shape[0]

        def mean_se(v):
            v = v.astype(np.float64)
            return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.shape[0])) if v.shape[0] > 1 else 0.0

        law = self.change_law
        if isinstance(law, NeverChange):
            m, se = mean_se(tau)
            return [
                MetricEstimate(Metric.FAR, 1 / m, se / (m * m), n, frac, note),
                MetricEstimate(Metric.MEAN_TIME_TO_FALSE_ALARM, m, se, n, frac, note),
            ]
        if isinstance(law, GeometricPrior):
            add, add_se = mean_se(np.maximum(tau - self.gamma, 0))
            pfa = float(np.mean(tau < self.gamma))
            return [
                MetricEstimate(Metric.ADD, add, add_se, n, frac, note),
                MetricEstimate(Metric.PFA, pfa, math.sqrt(pfa * (1 - pfa) / n), n, frac, note),
            ]
        g = int(law.gamma)
        alive = tau >= g
        if not alive.any():
            raise EstimationError("every trial stopped before the change point")
        m, se = mean_se(tau[alive] - g)
        return [MetricEstimate(Metric.DELAY, m, se, int(alive.sum()), frac, note)]


def simulate_fusion(
    config: SensorNetworkConfig,
    change_law: ChangePointLaw,
    num_trials: int,
    seed: int = 0,
    *,
    horizon_cap: int = 10**6,
    threads: int | None = None,
    rules: Sequence[FusionRule | str] | None = None,
) -> FusionResult:
    """Run the fusion rules (default: all, plus the centralized CuSum) on the same sensor paths.

    Sensor l's observation at time n uses counter n of stream
    ``STREAM_SENSOR + l``.  A rule whose threshold is not configured (SUM
    without ``sum_threshold``, centralized without ``centralized_threshold``)
    is skipped and reports every trial as capped, as is every rule left out
    of ``rules``.  A trial ends once all evaluated rules have stopped, so
    restricting ``rules`` avoids waiting for slow rules under no change.
    """
    if int(num_trials) != num_trials or num_trials < 1:
        raise InputError("num_trials must be a positive integer")
    if threads is not None:
        numba.set_num_threads(min(int(threads), numba.config.NUMBA_NUM_THREADS))
    q = config.quantizer
    quant_thr = np.asarray(q.llr_thresholds if q else (), dtype=np.float64)
    sym_llr = q.symbol_llr if q else np.zeros(1)
    law, rho_law, gamma = change_law.kernel_args
    wanted = set(RULE_ORDER) if rules is None else {FusionRule(r) for r in rules}
    active = np.array([r in wanted for r in RULE_ORDER])
    tau, gam = _fusion_block(
        np.int64(config.model.family_code),
        np.asarray(config.model.params, dtype=np.float64),
        np.int64(config.num_sensors),
        quant_thr,
        np.asarray(sym_llr, dtype=np.float64),
        q is not None,
        config.local_detector == "shiryaev",
        float(config.rho),
        np.asarray(config.local_thresholds, dtype=np.float64),
        float(config.sum_threshold) if config.sum_threshold is not None else math.inf,
        float(config.centralized_threshold) if config.centralized_threshold is not None else math.inf,
        active,
        np.int64(law),
        float(rho_law),
        np.int64(gamma),
        np.uint64(seed),
        np.int64(num_trials),
        np.int64(horizon_cap),
    )
    return FusionResult(config, change_law, {r: tau[:, j] for j, r in enumerate(RULE_ORDER)}, gam, int(horizon_cap), int(seed))
