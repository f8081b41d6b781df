"""Shiryaev detector in its three equivalent parametrizations.

The posterior probability p_n that the change has already happened, the
posterior odds Lambda_n = p_n / (1 - p_n), and the scaled odds
R_n = Lambda_n / rho all stop at the same time when their thresholds are
A, a = A / (1 - A) and a / rho respectively.  The odds forms are stored as
logarithms so that thresholds such as a = 1e5 never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..errors import ContractError, InputError
from ._core import logaddexp, shiryaev_log_update, shiryaev_p_update


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho < 1.0:
        raise InputError(f"rho must lie in [0, 1), got {rho!r}")


def odds_threshold(A: float) -> float:
    """a = A / (1 - A)."""
    return A / (1.0 - A)


def log_odds_threshold(A: float) -> float:
    return math.log(A) - math.log1p(-A)


def prob_threshold_from_log(b: float) -> float:
    """A such that log(A / (1 - A)) = b."""
    return 1.0 / (1.0 + math.exp(-b))


@dataclass(frozen=True)
class ShiryaevState:
    p: float
    rho: float
    threshold_A: float
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, rho: float, threshold_A: float) -> "ShiryaevState":
        _check_rho(rho)
        if not 0.0 < threshold_A < 1.0:
            raise InputError(f"threshold A must lie in (0, 1), got {threshold_A!r}")
        return cls(0.0, rho, threshold_A)

    @property
    def lam(self) -> float:
        return self.p / (1.0 - self.p) if self.p < 1.0 else math.inf

    @property
    def r(self) -> float:
        return self.lam / self.rho


def shiryaev_step(state: ShiryaevState, llr: float) -> ShiryaevState:
    """Posterior update p' = p~ L / (p~ L + 1 - p~) with p~ = p + (1 - p) rho."""
    if state.stopped:
        raise ContractError("detector already stopped")
    p = shiryaev_p_update(state.p, state.rho, llr)
    return replace(state, p=p, n=state.n + 1, stopped=p >= state.threshold_A)


@dataclass(frozen=True)
class ShiryaevLambdaState:
    log_lam: float
    rho: float
    log_threshold: float  # log a
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, rho: float, threshold_a: float) -> "ShiryaevLambdaState":
        _check_rho(rho)
        if rho == 0.0:
            raise InputError("the odds form needs rho > 0")
        return cls(-math.inf, rho, math.log(threshold_a))

    @property
    def lam(self) -> float:
        return math.exp(self.log_lam)


def shiryaev_step_lambda(state: ShiryaevLambdaState, llr: float) -> ShiryaevLambdaState:
    """Lambda' = (Lambda + rho) L / (1 - rho), i.e. p'/(1 - p') for the same step."""
    if state.stopped:
        raise ContractError("detector already stopped")
    z = shiryaev_log_update(state.log_lam, state.rho, llr)
    return replace(state, log_lam=z, n=state.n + 1, stopped=z >= state.log_threshold)


@dataclass(frozen=True)
class ShiryaevRState:
    log_r: float
    rho: float
    log_threshold: float  # log(a / rho)
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, rho: float, threshold_a: float) -> "ShiryaevRState":
        _check_rho(rho)
        if rho == 0.0:
            raise InputError("the scaled-odds form needs rho > 0")
        return cls(-math.inf, rho, math.log(threshold_a) - math.log(rho))

    @property
    def r(self) -> float:
        return math.exp(self.log_r)


def shiryaev_step_r(state: ShiryaevRState, llr: float) -> ShiryaevRState:
    """R' = (1 + R) L / (1 - rho)."""
    if state.stopped:
        raise ContractError("detector already stopped")
    z = logaddexp(0.0, state.log_r) + llr - math.log1p(-state.rho)
    return replace(state, log_r=z, n=state.n + 1, stopped=z >= state.log_threshold)
