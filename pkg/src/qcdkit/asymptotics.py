"""First-order and renewal-theoretic second-order approximations.

First order: the delay needed to reach false-alarm level alpha grows like
|log alpha| / (q + d), where q is the post-change K-L divergence and d the
geometric prior's tail rate |log(1 - rho)| (zero in the minimax setting).

Second order, for the Shiryaev statistic Z_n = log Lambda_n under a change at
time 1.  Z_n is a random walk with increments Y_k + d plus a slowly changing
term eta_n.  If R is the limiting overshoot distribution of that walk over a
large boundary, with mean kappa and Laplace transform zeta = E[exp(-overshoot)],
then

    PFA ~ zeta * exp(-b)
    ADD ~ (b + kappa - E_1[eta]) / (q + d)

kappa and zeta are estimated by simulating the walk directly to several
boundaries; an independent ladder-height route is provided as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from numba import njit, prange

from .dist_models import DensityPair, _family_llr, _family_sample
from .errors import InputError
from .rng import STREAM_AUX, STREAM_OBS, trial_key, uniform

STREAM_LADDER = STREAM_AUX + 1
ETA_TOLERANCE = 1e-6
DEFAULT_OVERSHOOT_THRESHOLDS = (5.0, 15.0, 25.0)
_MAX_WALK_STEPS = 10**7


@dataclass(frozen=True)
class FirstOrderInputs:
    alpha: float
    kl: float
    d: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if not self.kl > 0:
            raise InputError("kl must be positive")
        if not self.d >= 0:
            raise InputError("prior tail rate d must be non-negative")


def first_order_add(inputs: FirstOrderInputs) -> float:
    """|log alpha| / (kl + d)."""
    return abs(math.log(inputs.alpha)) / (inputs.kl + inputs.d)


@dataclass(frozen=True)
class DeterministicIncrement:
    """A walk whose log-likelihood ratio is the constant ``step`` after the change.

    Renewal limits do not exist for such lattice walks; it is accepted only so
    that the degenerate-input guard can be exercised.
    """

    step: float

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise InputError("deterministic increment must be positive and finite")


@dataclass(frozen=True)
class OvershootEstimates:
    kappa: float
    kappa_se: float
    zeta: float
    zeta_se: float
    eta_mean: float
    eta_se: float
    thresholds: tuple[float, ...] = ()
    num_crossings: int = 0
    stationary: bool = True
    flagged: bool = False
    note: str = ""

    def __post_init__(self):
        if not 0.0 < self.zeta <= 1.0:
            raise InputError(f"zeta must lie in (0, 1], got {self.zeta!r}")
        if not self.kappa >= 0.0:
            raise InputError(f"kappa must be non-negative, got {self.kappa!r}")


# --- kernels -----------------------------------------------------------------


@njit(cache=True, parallel=True)
def _overshoot_block(family, fparams, drift_shift, thresholds, base_seed, num):
    """Overshoots of one post-change walk per trial over each ascending threshold."""
    out = np.empty((num, thresholds.shape[0]))
    seed = np.uint64(base_seed)
    for i in prange(num):
        key = trial_key(seed, np.uint64(i))
        s = 0.0
        k = 0
        for j in range(thresholds.shape[0]):
            b = thresholds[j]
            while s < b and k < _MAX_WALK_STEPS:
                k += 1
                x = _family_sample(family, fparams, True, uniform(key, np.uint64(STREAM_OBS), np.uint64(k)))
                s += _family_llr(family, fparams, x) + drift_shift
            out[i, j] = s - b
    return out


@njit(cache=True, parallel=True)
def _eta_block(family, fparams, rho, tol, base_seed, num):
    """Limit of eta_n = log rho + sum_k log1p(rho exp(-Z_k)) along Shiryaev log-odds paths."""
    out = np.empty(num)
    d = -np.log1p(-rho)
    log_rho = np.log(rho)
    seed = np.uint64(base_seed)
    for i in prange(num):
        key = trial_key(seed, np.uint64(i))
        eta = log_rho
        z = -np.inf
        k = 0
        while k < _MAX_WALK_STEPS:
            k += 1
            x = _family_sample(family, fparams, True, uniform(key, np.uint64(STREAM_AUX), np.uint64(k)))
            y = _family_llr(family, fparams, x)
            if k == 1:
                z = log_rho + y + d
            else:
                inc = np.log1p(rho * np.exp(-z))
                eta += inc
                z = z + inc + y + d
                if inc < tol:
                    break
        out[i] = eta
    return out


@njit(cache=True, parallel=True)
def _ladder_block(family, fparams, drift_shift, base_seed, num):
    """First strictly positive value of the post-change walk (ascending ladder height)."""
    out = np.empty(num)
    seed = np.uint64(base_seed)
    for i in prange(num):
        key = trial_key(seed, np.uint64(i))
        s = 0.0
        k = 0
        while s <= 0.0 and k < _MAX_WALK_STEPS:
            k += 1
            x = _family_sample(family, fparams, True, uniform(key, np.uint64(STREAM_LADDER), np.uint64(k)))
            s += _family_llr(family, fparams, x) + drift_shift
        out[i] = s
    return out


# --- estimators --------------------------------------------------------------


def _check_model(model: DensityPair, rho: float) -> float:
    if not 0.0 <= rho < 1.0:
        raise InputError("rho must lie in [0, 1)")
    if model.is_lattice:
        raise InputError(f"{type(model).__name__} has a lattice log-likelihood ratio; no overshoot limit exists")
    d = -math.log1p(-rho)
    if not model.kl() + d > 0:
        raise InputError("the post-change walk must have positive drift")
    return d


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.shape[0]))


def _paired_ok(a: np.ndarray, b: np.ndarray, num_se: float = 2.0) -> bool:
    diff = a - b
    m, se = _mean_se(diff)
    return abs(m) <= num_se * se


def _deterministic_overshoot(model: DeterministicIncrement, rho: float, thresholds: Sequence[float]) -> OvershootEstimates:
    d = -math.log1p(-rho) if rho > 0 else 0.0
    step = model.step + d
    overs = []
    for b in thresholds:
        s = 0.0
        while s < b:
            s += step
        overs.append(s - b)
    kappa = overs[-1]
    eta = math.log(rho) if rho > 0 else 0.0
    if rho > 0:
        z = math.log(rho) + step
        while True:
            inc = math.log1p(rho * math.exp(-z))
            eta += inc
            z += inc + step
            if inc < ETA_TOLERANCE:
                break
    return OvershootEstimates(
        kappa,
        0.0,
        math.exp(-kappa),
        0.0,
        eta,
        0.0,
        tuple(thresholds),
        1,
        stationary=len(set(overs[-2:])) == 1,
        flagged=True,
        note="degenerate deterministic walk: lattice increments, renewal limit does not exist",
    )


def estimate_overshoot(
    model: DensityPair | DeterministicIncrement,
    rho: float,
    num_crossings: int = 100_000,
    thresholds: Sequence[float] = DEFAULT_OVERSHOOT_THRESHOLDS,
    seed: int = 0,
    *,
    eta_trials: int | None = None,
    threads: int | None = None,
) -> OvershootEstimates:
    """Monte Carlo kappa, zeta and E_1[eta] for the Shiryaev statistic under ``model``.

    Each trial runs one post-change walk with increments Y + |log(1 - rho)|
    through the ascending ``thresholds``; kappa and zeta are taken at the
    largest threshold.  The estimate is flagged when the overshoot mean or
    its Laplace transform at the two largest thresholds differ by more than
    two standard errors of the paired difference.
    """
    thresholds = tuple(sorted(float(b) for b in thresholds))
    if len(thresholds) < 2 or thresholds[0] <= 0:
        raise InputError("need at least two positive thresholds")
    if num_crossings < 2:
        raise InputError("num_crossings must be >= 2")
    if isinstance(model, DeterministicIncrement):
        return _deterministic_overshoot(model, rho, thresholds)
    d = _check_model(model, rho)
    if rho == 0.0:
        raise InputError("E_1[eta] needs rho > 0")
    if threads is not None:
        numba.set_num_threads(min(int(threads), numba.config.NUMBA_NUM_THREADS))
    params = np.asarray(model.params, dtype=np.float64)
    overs = _overshoot_block(
        np.int64(model.family_code), params, d, np.array(thresholds), np.uint64(seed), np.int64(num_crossings)
    )
    eta = _eta_block(
        np.int64(model.family_code), params, float(rho), ETA_TOLERANCE, np.uint64(seed),
        np.int64(eta_trials or num_crossings),
    )
    top, second = overs[:, -1], overs[:, -2]
    kappa, kappa_se = _mean_se(top)
    zeta, zeta_se = _mean_se(np.exp(-top))
    eta_mean, eta_se = _mean_se(eta)
    stationary = _paired_ok(top, second) and _paired_ok(np.exp(-top), np.exp(-second))
    note = "" if stationary else (
        f"overshoot statistics at b={thresholds[-2]:g} and b={thresholds[-1]:g} differ by more than 2 SE"
    )
    return OvershootEstimates(
        kappa, kappa_se, zeta, zeta_se, eta_mean, eta_se, thresholds, int(num_crossings),
        stationary=stationary, flagged=not stationary, note=note,
    )


@dataclass(frozen=True)
class LadderOracle:
    kappa: float
    kappa_se: float
    zeta: float
    zeta_se: float
    samples: int


def ladder_overshoot_oracle(model: DensityPair, rho: float, num: int = 400_000, seed: int = 0) -> LadderOracle:
    """kappa = E[H^2] / (2 E[H]) and zeta = (1 - E[exp(-H)]) / E[H] from ladder heights H.

    Standard errors come from the delta method on the joint sample moments.
    """
    d = _check_model(model, rho)
    h = _ladder_block(np.int64(model.family_code), np.asarray(model.params, dtype=np.float64), d, np.uint64(seed), np.int64(num))
    n = h.shape[0]
    # kappa = g(m1, m2) = m2 / (2 m1)
    cols = np.vstack([h, h * h, np.exp(-h)])
    mean = cols.mean(axis=1)
    cov = np.cov(cols) / n
    m1, m2, m3 = mean
    kappa = m2 / (2 * m1)
    grad_k = np.array([-m2 / (2 * m1 * m1), 1 / (2 * m1), 0.0])
    zeta = (1 - m3) / m1
    grad_z = np.array([-(1 - m3) / (m1 * m1), 0.0, -1 / m1])
    return LadderOracle(
        float(kappa), float(math.sqrt(grad_k @ cov @ grad_k)), float(zeta), float(math.sqrt(grad_z @ cov @ grad_z)), n
    )


def second_order_pfa(b: float, est: OvershootEstimates) -> float:
    """zeta * exp(-b)."""
    if b < 0:
        raise InputError("threshold b must be non-negative")
    return est.zeta * math.exp(-b)


def second_order_add(b: float, est: OvershootEstimates, kl: float, d: float) -> float:
    """(b + kappa - E_1[eta]) / (d + kl)."""
    if not kl + d > 0:
        raise InputError("kl + d must be positive")
    return (b + est.kappa - est.eta_mean) / (d + kl)
