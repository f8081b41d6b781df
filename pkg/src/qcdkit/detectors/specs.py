"""Detector specifications: algorithm + thresholds + parameters.

A spec knows how to start a reference state machine and step it, how it maps
onto a compiled kernel (when one exists), and how to move its threshold on a
log scale, which is what calibration and trade-off sweeps vary.  Every
threshold is expressed as a log-scale number ``log_threshold``:

=================  ========================================
Shiryaev, DE       b = log(A / (1 - A)) (posterior log-odds)
CuSum, GLR         b itself
SR, SR-r, mixture  log B
=================  ========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InputError
from .cusum import CusumState, cusum_step
from .data_efficient import (
    DeShiryaevState,
    FractionalShiryaevState,
    de_shiryaev_step,
    fractional_shiryaev_step,
)
from .glr import GlrGaussianState, MixtureGaussianState, glr_gaussian_step, mixture_gaussian_step
from .roberts import SrState, sr_step
from .shiryaev import ShiryaevState, prob_threshold_from_log, shiryaev_step

K_SHIRYAEV = 0
K_CUSUM = 1
K_SR = 2
K_DE_SHIRYAEV = 3
K_FRACTIONAL = 4


class DetectorSpec:
    name: str = ""
    log_threshold: float
    kernel_code: int | None = None
    uses_x = False
    bayesian = False
    # zero-start detectors whose worst-case delay is attained at change point 1
    worst_case_at_start = False

    def kernel_params(self) -> np.ndarray:
        raise NotImplementedError

    def start(self):
        raise NotImplementedError

    def step(self, state, x: float | None, llr: float | None):
        raise NotImplementedError

    def wants_observation(self, state) -> bool:
        return True

    def terminal(self, state) -> float:
        raise NotImplementedError

    def observations_used(self, state) -> int:
        return state.n

    def with_log_threshold(self, t: float) -> "DetectorSpec":
        return replace(self, log_threshold=float(t))

    @staticmethod
    def analytic_log_threshold(alpha: float) -> float:
        return abs(math.log(alpha))


@dataclass(frozen=True)
class Shiryaev(DetectorSpec):
    log_threshold: float
    rho: float
    name = "shiryaev"
    kernel_code = K_SHIRYAEV
    bayesian = True

    @classmethod
    def from_prob(cls, A: float, rho: float) -> "Shiryaev":
        return cls(math.log(A) - math.log1p(-A), rho)

    @property
    def threshold_A(self) -> float:
        return prob_threshold_from_log(self.log_threshold)

    def kernel_params(self):
        return np.array([self.threshold_A, self.rho])

    def start(self):
        return ShiryaevState.start(self.rho, self.threshold_A)

    def step(self, state, x, llr):
        return shiryaev_step(state, llr)

    def terminal(self, state):
        return state.p

    @staticmethod
    def analytic_log_threshold(alpha):
        # A = 1 - alpha, a = (1 - alpha) / alpha
        return math.log1p(-alpha) - math.log(alpha)


@dataclass(frozen=True)
class Cusum(DetectorSpec):
    log_threshold: float
    name = "cusum"
    kernel_code = K_CUSUM
    worst_case_at_start = True

    def kernel_params(self):
        return np.array([self.log_threshold])

    def start(self):
        return CusumState.start(self.log_threshold)

    def step(self, state, x, llr):
        return cusum_step(state, llr)

    def terminal(self, state):
        return state.w


@dataclass(frozen=True)
class ShiryaevRoberts(DetectorSpec):
    log_threshold: float
    head_start: float = 0.0
    name = "sr"
    kernel_code = K_SR

    @property
    def worst_case_at_start(self) -> bool:
        return self.head_start == 0.0

    def kernel_params(self):
        log_r0 = math.log(self.head_start) if self.head_start > 0 else -math.inf
        return np.array([self.log_threshold, log_r0])

    def start(self):
        return SrState.start(math.exp(self.log_threshold), self.head_start)

    def step(self, state, x, llr):
        return sr_step(state, llr)

    def terminal(self, state):
        return state.log_r


@dataclass(frozen=True)
class DeShiryaev(DetectorSpec):
    log_threshold: float
    rho: float
    lower: float  # B, a probability
    name = "de_shiryaev"
    kernel_code = K_DE_SHIRYAEV
    bayesian = True

    def __post_init__(self):
        if not 0.0 <= self.lower <= 1.0:
            raise InputError("lower threshold B must be a probability")

    @property
    def threshold_A(self) -> float:
        return prob_threshold_from_log(self.log_threshold)

    def kernel_params(self):
        return np.array([self.threshold_A, self.rho, self.lower])

    def start(self):
        return DeShiryaevState.start(self.rho, self.threshold_A, self.lower)

    def wants_observation(self, state):
        return state.take_next

    def step(self, state, x, llr):
        return de_shiryaev_step(state, llr)

    def terminal(self, state):
        return state.p

    def observations_used(self, state):
        return state.observations_used

    analytic_log_threshold = staticmethod(Shiryaev.analytic_log_threshold)


@dataclass(frozen=True)
class FractionalShiryaev(DetectorSpec):
    log_threshold: float
    rho: float
    period: int = 2
    name = "fractional_shiryaev"
    kernel_code = K_FRACTIONAL
    bayesian = True

    @property
    def threshold_A(self) -> float:
        return prob_threshold_from_log(self.log_threshold)

    def kernel_params(self):
        return np.array([self.threshold_A, self.rho, float(self.period)])

    def start(self):
        return FractionalShiryaevState.start(self.rho, self.threshold_A, self.period)

    def wants_observation(self, state):
        return state.take_next

    def step(self, state, x, llr):
        return fractional_shiryaev_step(state, llr)

    def terminal(self, state):
        return state.p

    def observations_used(self, state):
        return state.observations_used

    analytic_log_threshold = staticmethod(Shiryaev.analytic_log_threshold)


@dataclass(frozen=True)
class GlrGaussian(DetectorSpec):
    log_threshold: float  # b on the statistic's own scale
    window: int
    kind: str = "siegmund"
    epsilon: float = 0.0
    mu0: float = 0.0
    sigma: float = 1.0
    min_gap: int = 1
    name = "glr"
    uses_x = True

    def start(self):
        return GlrGaussianState.start(
            self.log_threshold, self.window, self.kind, self.epsilon, self.mu0, self.sigma, self.min_gap
        )

    def step(self, state, x, llr):
        return glr_gaussian_step(state, x)

    def terminal(self, state):
        return state.statistic


@dataclass(frozen=True)
class MixtureGaussian(DetectorSpec):
    log_threshold: float  # log of the threshold on the mixture likelihood ratio
    window: int
    prior_mean: float = 0.0
    prior_var: float = 1.0
    mu0: float = 0.0
    sigma: float = 1.0
    name = "mixture"
    uses_x = True

    def start(self):
        return MixtureGaussianState.start(
            math.exp(self.log_threshold), self.window, self.prior_mean, self.prior_var, self.mu0, self.sigma
        )

    def step(self, state, x, llr):
        return mixture_gaussian_step(state, x)

    def terminal(self, state):
        return state.log_statistic
