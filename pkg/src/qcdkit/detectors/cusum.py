"""CuSum in its W (clamped) and C (unclamped-last-step) forms.

Both forms are carried in one state; they cross any positive threshold at the
same step.  The generalized CuSum for non-i.i.d. data runs the identical
recursion on conditional log-likelihood ratios from an :class:`LlrStream`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ContractError, InputError
from ._core import cusum_c_update, cusum_update


@dataclass(frozen=True)
class CusumState:
    w: float
    c: float
    threshold_b: float
    stopped: bool = False
    n: int = 0

    @classmethod
    def start(cls, threshold_b: float) -> "CusumState":
        if not threshold_b > 0:
            raise InputError(f"CuSum threshold must be positive, got {threshold_b!r}")
        return cls(0.0, 0.0, float(threshold_b))


def cusum_step(state: CusumState, llr: float) -> CusumState:
    if state.stopped:
        raise ContractError("detector already stopped")
    w = cusum_update(state.w, llr)
    c = cusum_c_update(state.c, llr)
    return replace(state, w=w, c=c, n=state.n + 1, stopped=w >= state.threshold_b)


def generalized_cusum_step(state: CusumState, y: float) -> CusumState:
    """C_n = max over k of sum_{i=k}^n Y_i, with Y_i the conditional LLR."""
    return cusum_step(state, y)
