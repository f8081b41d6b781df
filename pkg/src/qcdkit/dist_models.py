"""Pre-/post-change observation models and change-point laws.

A ``DensityPair`` bundles the pre-change density f0 and the post-change
density f1 of scalar i.i.d. observations.  Three families are supported, each
with closed-form log-likelihood ratios and K-L divergences:

>>> pair = GaussianMeanShift(0.0, 1.0, 1.0)
>>> log_likelihood_ratio(pair, 1.0)
0.5
>>> kl_divergence(pair)
0.5

The ``_family_*`` helpers at the bottom are numba-compiled twins used by the
simulation kernels; they take a family code and a parameter vector so that
one kernel serves every family.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate, stats

from .errors import InputError, NumericalError
from .rng import RngState, normal_ppf

FAMILY_GAUSSIAN = 0
FAMILY_BERNOULLI = 1
FAMILY_EXPONENTIAL = 2

LAW_GEOMETRIC = 0
LAW_FIXED = 1
LAW_NEVER = 2

# sentinel change point for "never"; larger than any horizon cap
NEVER = np.int64(2**62)


class Regime(enum.Enum):
    PRE = 0
    POST = 1


class Direction(enum.Enum):
    POST_VS_PRE = "post_vs_pre"  # D(f1 || f0)
    PRE_VS_POST = "pre_vs_post"  # D(f0 || f1)


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")
    return value


def _check_prob(name: str, value: float) -> float:
    value = _check_finite(name, value)
    if not 0.0 < value < 1.0:
        raise InputError(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return value


class DensityPair:
    """Base class; see the concrete families below."""

    family_code: int = -1
    is_lattice: bool = False

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    def llr(self, x: float) -> float:
        return float(_family_llr(self.family_code, self.params, float(x)))

    def kl(self, direction: Direction = Direction.POST_VS_PRE) -> float:
        raise NotImplementedError

    def llr_std(self, regime: Regime) -> float:
        """Standard deviation of log L(X) under the given regime."""
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianMeanShift(DensityPair):
    mu0: float
    mu1: float
    sigma: float = 1.0

    family_code = FAMILY_GAUSSIAN

    def __post_init__(self):
        _check_finite("mu0", self.mu0)
        _check_finite("mu1", self.mu1)
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InputError(f"sigma must be positive, got {self.sigma!r}")
        if self.mu0 == self.mu1:
            raise InputError("mu0 == mu1: pre- and post-change densities coincide")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.mu0, self.mu1, self.sigma])

    def kl(self, direction: Direction = Direction.POST_VS_PRE) -> float:
        return (self.mu1 - self.mu0) ** 2 / (2.0 * self.sigma**2)

    def llr_std(self, regime: Regime) -> float:
        return abs(self.mu1 - self.mu0) / self.sigma


@dataclass(frozen=True)
class Bernoulli(DensityPair):
    p0: float
    p1: float

    family_code = FAMILY_BERNOULLI
    is_lattice = True

    def __post_init__(self):
        _check_prob("p0", self.p0)
        _check_prob("p1", self.p1)
        if self.p0 == self.p1:
            raise InputError("p0 == p1: pre- and post-change densities coincide")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.p0, self.p1, 0.0])

    def kl(self, direction: Direction = Direction.POST_VS_PRE) -> float:
        a, b = (self.p1, self.p0) if direction is Direction.POST_VS_PRE else (self.p0, self.p1)
        return a * math.log(a / b) + (1 - a) * math.log((1 - a) / (1 - b))

    def llr_std(self, regime: Regime) -> float:
        p = self.p1 if regime is Regime.POST else self.p0
        jump = math.log(self.p1 / self.p0) - math.log((1 - self.p1) / (1 - self.p0))
        return abs(jump) * math.sqrt(p * (1 - p))


@dataclass(frozen=True)
class ExponentialRate(DensityPair):
    lam0: float
    lam1: float

    family_code = FAMILY_EXPONENTIAL

    def __post_init__(self):
        for name in ("lam0", "lam1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be positive, got {v!r}")
        if self.lam0 == self.lam1:
            raise InputError("lam0 == lam1: pre- and post-change densities coincide")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.lam0, self.lam1, 0.0])

    def kl(self, direction: Direction = Direction.POST_VS_PRE) -> float:
        a, b = (self.lam1, self.lam0) if direction is Direction.POST_VS_PRE else (self.lam0, self.lam1)
        # D(Exp(a) || Exp(b))
        return math.log(a / b) + b / a - 1.0

    def llr_std(self, regime: Regime) -> float:
        lam = self.lam1 if regime is Regime.POST else self.lam0
        return abs(self.lam1 - self.lam0) / lam


def log_likelihood_ratio(pair: DensityPair, x: float) -> float:
    """log f1(x) - log f0(x)."""
    x = _check_finite("x", x)
    if isinstance(pair, Bernoulli) and x not in (0.0, 1.0):
        raise InputError(f"Bernoulli observation must be 0 or 1, got {x!r}")
    if isinstance(pair, ExponentialRate) and x < 0:
        raise InputError(f"exponential observation must be >= 0, got {x!r}")
    return pair.llr(x)


def kl_divergence(pair: DensityPair, direction: Direction = Direction.POST_VS_PRE) -> float:
    return pair.kl(direction)


def kl_quadrature_oracle(pair: DensityPair, direction: Direction = Direction.POST_VS_PRE) -> float:
    """K-L divergence by numerical integration of the log-density ratio.

    Independent of the closed forms: densities come from ``scipy.stats``.
    Gaussian integrals are truncated at 12 sigma beyond both means.
    """
    if isinstance(pair, Bernoulli):
        a, b = (pair.p1, pair.p0) if direction is Direction.POST_VS_PRE else (pair.p0, pair.p1)
        return sum(pa * math.log(pa / pb) for pa, pb in ((a, b), (1 - a, 1 - b)))

    if isinstance(pair, GaussianMeanShift):
        d1 = stats.norm(pair.mu1, pair.sigma)
        d0 = stats.norm(pair.mu0, pair.sigma)
        lo = min(pair.mu0, pair.mu1) - 12 * pair.sigma
        hi = max(pair.mu0, pair.mu1) + 12 * pair.sigma
        points = sorted({pair.mu0, pair.mu1})
    elif isinstance(pair, ExponentialRate):
        d1 = stats.expon(scale=1 / pair.lam1)
        d0 = stats.expon(scale=1 / pair.lam0)
        lo, hi = 0.0, np.inf
        points = None
    else:
        raise InputError(f"unsupported density pair {pair!r}")
    if direction is Direction.PRE_VS_POST:
        d0, d1 = d1, d0

    def integrand(x):
        return d1.pdf(x) * (d1.logpdf(x) - d0.logpdf(x))

    if np.isfinite(hi):
        value, err = integrate.quad(integrand, lo, hi, points=points, epsabs=1e-12, epsrel=1e-12, limit=200)
    else:
        value, err = integrate.quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
    if err > 1e-9:
        raise NumericalError(f"K-L quadrature did not converge (error estimate {err:.3g})")
    return value


def sample(pair: DensityPair, regime: Regime, rng: RngState) -> float:
    """One draw from f0 (``Regime.PRE``) or f1 (``Regime.POST``)."""
    return float(_family_sample(pair.family_code, pair.params, regime is Regime.POST, rng.next_uniform()))


def sample_many(pair: DensityPair, regime: Regime, rng: RngState, size: int) -> np.ndarray:
    u = rng.uniforms(size)
    return _family_sample_vec(pair.family_code, pair.params, regime is Regime.POST, u)


# --- change-point laws -------------------------------------------------------


class ChangePointLaw:
    law_code: int = -1

    def draw(self, u: float) -> int | None:
        """Change point from a uniform in (0, 1); ``None`` means never."""
        raise NotImplementedError

    @property
    def kernel_args(self) -> tuple[int, float, int]:
        raise NotImplementedError


@dataclass(frozen=True)
class GeometricPrior(ChangePointLaw):
    """P(change at n) = rho (1 - rho)^(n - 1) for n >= 1, zero at n = 0."""

    rho: float
    law_code = LAW_GEOMETRIC

    def __post_init__(self):
        _check_prob("rho", self.rho)

    @property
    def tail(self) -> float:
        """|log(1 - rho)|, the prior's exponential tail rate."""
        return -math.log1p(-self.rho)

    @property
    def mean(self) -> float:
        return 1.0 / self.rho

    def pmf(self, n: int) -> float:
        return self.rho * (1 - self.rho) ** (n - 1) if n >= 1 else 0.0

    def draw(self, u: float) -> int:
        return int(_draw_change(LAW_GEOMETRIC, self.rho, 0, u))

    @property
    def kernel_args(self):
        return LAW_GEOMETRIC, self.rho, 0


@dataclass(frozen=True)
class FixedChange(ChangePointLaw):
    gamma: int
    law_code = LAW_FIXED

    def __post_init__(self):
        if int(self.gamma) != self.gamma or self.gamma < 1:
            raise InputError(f"gamma must be a positive integer, got {self.gamma!r}")

    def draw(self, u: float) -> int:
        return int(self.gamma)

    @property
    def kernel_args(self):
        return LAW_FIXED, 0.0, int(self.gamma)


@dataclass(frozen=True)
class NeverChange(ChangePointLaw):
    law_code = LAW_NEVER

    def draw(self, u: float) -> None:
        return None

    @property
    def kernel_args(self):
        return LAW_NEVER, 0.0, 0


# --- numba twins -------------------------------------------------------------


@njit(cache=True)
def _family_sample(code, params, post, u):
    if code == FAMILY_GAUSSIAN:
        mu = params[1] if post else params[0]
        return mu + params[2] * normal_ppf(u)
    if code == FAMILY_BERNOULLI:
        p = params[1] if post else params[0]
        return 1.0 if u < p else 0.0
    lam = params[1] if post else params[0]
    return -math.log(u) / lam


@njit(cache=True)
def _family_llr(code, params, x):
    if code == FAMILY_GAUSSIAN:
        mu0, mu1, s = params[0], params[1], params[2]
        return (x * (mu1 - mu0) - 0.5 * (mu1 * mu1 - mu0 * mu0)) / (s * s)
    if code == FAMILY_BERNOULLI:
        p0, p1 = params[0], params[1]
        if x > 0.5:
            return math.log(p1 / p0)
        return math.log((1.0 - p1) / (1.0 - p0))
    lam0, lam1 = params[0], params[1]
    return math.log(lam1 / lam0) - (lam1 - lam0) * x


@njit(cache=True)
def _family_sample_vec(code, params, post, u):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _family_sample(code, params, post, u[i])
    return out


@njit(cache=True)
def _draw_change(law, rho, gamma, u):
    if law == LAW_GEOMETRIC:
        g = math.ceil(math.log(u) / math.log1p(-rho))
        return np.int64(max(g, 1.0))
    if law == LAW_FIXED:
        return np.int64(gamma)
    return NEVER


@njit(cache=True)
def _family_llr_vec(code, params, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _family_llr(code, params, x[i])
    return out


def log_likelihood_ratios(pair: DensityPair, x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`log_likelihood_ratio` (inputs must be finite and in the support)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InputError("observations must be finite")
    return _family_llr_vec(pair.family_code, pair.params, x)
