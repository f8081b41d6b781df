"""Sources of conditional log-likelihood ratios Y_n = log f1,n(X_n | past) / f0,n(X_n | past).

A stream is stateful (it may remember past observations) and is reset at the
start of every trial.  Randomness always comes from the caller's
:class:`~qcdkit.rng.RngState`, so a stream adds no hidden seed.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..errors import InputError
from ..dist_models import DensityPair, Regime, sample
from ..rng import RngState, normal_ppf


class LlrStream(ABC):
    #: expected Y under the post-change law, if known (used for sanity checks)
    post_drift: float | None = None

    def reset(self) -> None:
        """Forget any history; called before every trial."""

    @abstractmethod
    def next(self, post: bool, rng: RngState) -> tuple[float, float]:
        """Draw the next observation and return ``(x, y)``."""


@dataclass
class IidLlrStream(LlrStream):
    pair: DensityPair

    def __post_init__(self):
        self.post_drift = self.pair.kl()

    def next(self, post, rng):
        x = sample(self.pair, Regime.POST if post else Regime.PRE, rng)
        return x, self.pair.llr(x)


@dataclass
class ConstantDriftStream(LlrStream):
    """Deterministic Y = q after the change (and -q before); consumes no randomness."""

    q: float

    def __post_init__(self):
        if not math.isfinite(self.q):
            raise InputError("drift must be finite")
        self.post_drift = self.q

    def next(self, post, rng):
        y = self.q if post else -self.q
        return y, y


@dataclass
class GaussianAR1Stream(LlrStream):
    """X_n = theta + phi X_{n-1} + sigma e_n with theta switching from mu0 to mu1.

    Observations are dependent, but the conditional density of X_n given the
    past is N(theta + phi X_{n-1}, sigma^2), so the conditional LLR is a
    Gaussian mean-shift LLR evaluated at the innovation X_n - phi X_{n-1}.
    """

    mu0: float
    mu1: float
    phi: float
    sigma: float = 1.0

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise InputError("AR coefficient must satisfy |phi| < 1")
        if self.mu0 == self.mu1 or not self.sigma > 0:
            raise InputError("need mu0 != mu1 and sigma > 0")
        self.post_drift = (self.mu1 - self.mu0) ** 2 / (2 * self.sigma**2)
        self._prev = 0.0

    def reset(self):
        self._prev = 0.0

    def next(self, post, rng):
        theta = self.mu1 if post else self.mu0
        x = theta + self.phi * self._prev + self.sigma * normal_ppf(rng.next_uniform())
        e = x - self.phi * self._prev
        self._prev = x
        y = (e * (self.mu1 - self.mu0) - 0.5 * (self.mu1**2 - self.mu0**2)) / self.sigma**2
        return x, y
