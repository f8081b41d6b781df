"""Shiryaev-Roberts statistic, optionally with a head start (SR-r)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..errors import ContractError, InputError
from ._core import sr_log_update


@dataclass(frozen=True)
class SrState:
    log_r: float
    r0: float
    log_threshold: float  # log B
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, threshold_B: float, head_start: float = 0.0) -> "SrState":
        if not threshold_B > 0:
            raise InputError(f"SR threshold must be positive, got {threshold_B!r}")
        if not head_start >= 0:
            raise InputError(f"head start must be >= 0, got {head_start!r}")
        log_r0 = math.log(head_start) if head_start > 0 else -math.inf
        return cls(log_r0, float(head_start), math.log(threshold_B))

    @property
    def r(self) -> float:
        return math.exp(self.log_r)

    @property
    def threshold_B(self) -> float:
        return math.exp(self.log_threshold)


def sr_step(state: SrState, llr: float) -> SrState:
    """R' = (1 + R) L, compared with B on the log scale."""
    if state.stopped:
        raise ContractError("detector already stopped")
    z = sr_log_update(state.log_r, llr)
    return replace(state, log_r=z, n=state.n + 1, stopped=z >= state.log_threshold)
