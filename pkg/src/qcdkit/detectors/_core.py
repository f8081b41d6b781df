"""Scalar update rules shared by the reference state machines and the
compiled simulation kernels.  Keeping a single definition is what makes the
two routes agree to the last bit."""

import math

from numba import njit

NEG_INF = -math.inf


@njit(cache=True)
def logaddexp(a, b):
    m = max(a, b)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log1p(math.exp(-abs(a - b)))


@njit(cache=True)
def shiryaev_log_prior(z, rho):
    """log-odds after the prior-only move p -> p + (1 - p) rho."""
    # log(e^z + rho) - log(1 - rho)
    return logaddexp(z, math.log(rho)) - math.log1p(-rho)


@njit(cache=True)
def shiryaev_log_update(z, rho, llr):
    return shiryaev_log_prior(z, rho) + llr


@njit(cache=True)
def shiryaev_p_update(p, rho, llr):
    pt = p + (1.0 - p) * rho
    if pt >= 1.0:
        return 1.0
    if pt <= 0.0:
        return 0.0
    if llr > 700.0:
        # p~ e^llr overflows; fall back to log-odds
        z = math.log(pt) - math.log1p(-pt) + llr
        return 1.0 / (1.0 + math.exp(-z))
    t = pt * math.exp(llr)
    return t / (t + 1.0 - pt)


@njit(cache=True)
def cusum_update(w, llr):
    return max(w + llr, 0.0)


@njit(cache=True)
def cusum_c_update(c, llr):
    return max(c, 0.0) + llr


@njit(cache=True)
def sr_log_update(log_r, llr):
    # log((1 + R) L)
    return logaddexp(0.0, log_r) + llr
