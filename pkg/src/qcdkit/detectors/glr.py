"""Window-limited GLR and mixture detectors for a Gaussian mean change.

Observations are standardized as y = (x - mu0) / sigma, so the pre-change
law is N(0, 1) and the post-change mean theta is unknown.  With S_n the
running sum of y, the candidate change points k are kept in a FIFO window of
the last ``window`` values, and

* the ``"siegmund"`` GLR statistic is  max_k |S_n - S_k| / sqrt(n - k);
* the ``"lorden"`` GLR statistic is  max_k sup_{|theta| >= eps} of the
  segment log-likelihood ratio, i.e. the MLE magnitude is clamped at eps;
* the mixture statistic integrates the segment likelihood ratio against a
  Gaussian prior on theta (closed form, kept in logs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ContractError, InputError


def default_window(alpha: float, kl: float) -> int:
    """ceil(3 |log alpha| / D): a few multiples of the expected delay."""
    return max(1, math.ceil(3.0 * abs(math.log(alpha)) / kl))


def default_epsilon(alpha: float) -> float:
    return 1.0 / abs(math.log(alpha))


@dataclass(frozen=True)
class GlrGaussianState:
    cumsum_s: float
    window: tuple[float, ...]  # S_k for the retained candidate k, oldest first
    threshold_b: float
    capacity: int
    kind: str = "siegmund"
    epsilon: float = 0.0
    mu0: float = 0.0
    sigma: float = 1.0
    min_gap: int = 1
    statistic: float = 0.0
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(
        cls,
        threshold_b: float,
        capacity: int,
        kind: str = "siegmund",
        epsilon: float = 0.0,
        mu0: float = 0.0,
        sigma: float = 1.0,
        min_gap: int = 1,
    ) -> "GlrGaussianState":
        if capacity < 1:
            raise InputError("GLR window capacity must be >= 1")
        if kind not in ("siegmund", "lorden"):
            raise InputError(f"unknown GLR kind {kind!r}")
        if min_gap < 1 or min_gap > capacity:
            raise InputError("min_gap must lie in [1, capacity]")
        return cls(0.0, (0.0,), float(threshold_b), int(capacity), kind, float(epsilon), mu0, sigma, min_gap)


def _segment_stat(kind: str, diff: np.ndarray, length: np.ndarray, eps: float) -> np.ndarray:
    if kind == "siegmund":
        return np.abs(diff) / np.sqrt(length)
    # sup over |theta| >= eps of theta * diff - length * theta^2 / 2
    theta = np.maximum(np.abs(diff) / length, eps)
    return theta * np.abs(diff) - 0.5 * length * theta**2


def glr_gaussian_step(state: GlrGaussianState, x: float) -> GlrGaussianState:
    if state.stopped:
        raise ContractError("detector already stopped")
    n = state.n + 1
    s = state.cumsum_s + (x - state.mu0) / state.sigma
    # window holds S_k for k = n-1-len+1 .. n-1
    ks = np.arange(n - len(state.window), n)
    sk = np.asarray(state.window)
    usable = (n - ks) >= state.min_gap
    if usable.any():
        stat = float(np.max(_segment_stat(state.kind, s - sk[usable], (n - ks[usable]).astype(float), state.epsilon)))
    else:
        stat = 0.0
    window = state.window + (s,)
    if len(window) > state.capacity:
        window = window[len(window) - state.capacity:]
    return replace(
        state, cumsum_s=s, window=window, n=n, statistic=stat, stopped=stat >= state.threshold_b
    )


@dataclass(frozen=True)
class MixtureGaussianState:
    window: tuple[float, ...]  # standardized observations, oldest first
    prior_mean: float
    prior_var: float
    log_threshold: float
    capacity: int
    mu0: float = 0.0
    sigma: float = 1.0
    log_statistic: float = -math.inf
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(
        cls,
        threshold: float,
        capacity: int,
        prior_mean: float = 0.0,
        prior_var: float = 1.0,
        mu0: float = 0.0,
        sigma: float = 1.0,
    ) -> "MixtureGaussianState":
        if not prior_var > 0:
            raise InputError("prior variance must be positive")
        if capacity < 1:
            raise InputError("mixture window capacity must be >= 1")
        if not threshold > 0:
            raise InputError("mixture threshold must be positive")
        return cls((), prior_mean, prior_var, math.log(threshold), int(capacity), mu0, sigma)

    @property
    def statistic(self) -> float:
        return math.exp(self.log_statistic)


def mixture_log_integral(seg_sum: np.ndarray, length: np.ndarray, g: float, v: float) -> np.ndarray:
    """log of the integral over theta ~ N(g, v) of exp(theta S - m theta^2 / 2)."""
    denom = 1.0 + length * v
    return -0.5 * np.log(denom) + (seg_sum**2 * v + 2.0 * seg_sum * g - length * g * g) / (2.0 * denom)


def mixture_gaussian_step(state: MixtureGaussianState, x: float) -> MixtureGaussianState:
    if state.stopped:
        raise ContractError("detector already stopped")
    y = (x - state.mu0) / state.sigma
    window = state.window + (y,)
    if len(window) > state.capacity:
        window = window[len(window) - state.capacity:]
    # segments ending at n, lengths 1..len(window)
    seg = np.cumsum(np.asarray(window)[::-1])
    length = np.arange(1, len(window) + 1, dtype=float)
    g = (state.prior_mean - state.mu0) / state.sigma
    v = state.prior_var / state.sigma**2
    log_stat = float(np.max(mixture_log_integral(seg, length, g, v)))
    return replace(
        state, window=window, n=state.n + 1, log_statistic=log_stat, stopped=log_stat >= state.log_threshold
    )
