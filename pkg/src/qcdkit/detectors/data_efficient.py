"""Data-efficient Shiryaev (two-threshold) and the fractional-sampling baseline.

Both detectors decide *before* each time step whether the next observation
will be taken.  When it is skipped the posterior moves by the prior alone,
p <- p + (1 - p) rho; when it is taken the usual Shiryaev update applies.
The DE-Shiryaev rule takes the next observation iff p >= B; fractional
sampling takes every ``period``-th observation regardless of p.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ContractError, InputError
from ._core import shiryaev_p_update


@dataclass(frozen=True)
class DeShiryaevState:
    p: float
    rho: float
    threshold_A: float
    threshold_B: float
    take_next: bool
    observations_used: int = 0
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, rho: float, threshold_A: float, threshold_B: float) -> "DeShiryaevState":
        if not 0.0 < rho < 1.0:
            raise InputError(f"rho must lie in (0, 1), got {rho!r}")
        if not 0.0 < threshold_A < 1.0:
            raise InputError(f"threshold A must lie in (0, 1), got {threshold_A!r}")
        # B = 1 is the degenerate never-sample policy
        if not (0.0 <= threshold_B < threshold_A or threshold_B == 1.0):
            raise InputError(f"need 0 <= B < A (or B = 1), got B={threshold_B!r}")
        return cls(0.0, rho, threshold_A, threshold_B, take_next=0.0 >= threshold_B)


def de_shiryaev_step(state: DeShiryaevState, llr: float | None) -> DeShiryaevState:
    """Advance one time slot.  ``llr`` must be given iff ``state.take_next``."""
    if state.stopped:
        raise ContractError("detector already stopped")
    if state.take_next != (llr is not None):
        raise ContractError(
            "observation supplied for a skipped slot" if llr is not None else "observation required but missing"
        )
    if llr is None:
        p = state.p + (1.0 - state.p) * state.rho
        used = state.observations_used
    else:
        p = shiryaev_p_update(state.p, state.rho, llr)
        used = state.observations_used + 1
    return replace(
        state,
        p=p,
        observations_used=used,
        take_next=p >= state.threshold_B,
        stopped=p >= state.threshold_A,
        n=state.n + 1,
    )


@dataclass(frozen=True)
class FractionalShiryaevState:
    p: float
    rho: float
    threshold_A: float
    period: int
    observations_used: int = 0
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, rho: float, threshold_A: float, period: int = 2) -> "FractionalShiryaevState":
        if period < 1:
            raise InputError("sampling period must be >= 1")
        return cls(0.0, rho, threshold_A, int(period))

    @property
    def take_next(self) -> bool:
        return (self.n + 1) % self.period == 0


def fractional_shiryaev_step(state: FractionalShiryaevState, llr: float | None) -> FractionalShiryaevState:
    if state.stopped:
        raise ContractError("detector already stopped")
    if state.take_next != (llr is not None):
        raise ContractError("observation presence does not match the sampling schedule")
    if llr is None:
        p = state.p + (1.0 - state.p) * state.rho
        used = state.observations_used
    else:
        p = shiryaev_p_update(state.p, state.rho, llr)
        used = state.observations_used + 1
    return replace(state, p=p, observations_used=used, stopped=p >= state.threshold_A, n=state.n + 1)
