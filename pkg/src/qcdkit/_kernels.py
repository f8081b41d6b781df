"""Compiled single-stream trial kernels.

One call simulates a contiguous block of trials.  Each trial draws its change
point from ``(STREAM_CHANGE, counter 0)`` and the observation at time n from
``(STREAM_OBS, counter n)``, so detectors that skip observations (DE,
fractional sampling) see the same path as detectors that do not.  Trials run
under ``prange`` but each one depends only on its own key, which is what keeps
results independent of the thread count.

The per-step updates are the shared functions in ``detectors._core``; the
reference state machines call the same functions, so both routes produce the
same stopping times.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .detectors._core import cusum_update, shiryaev_p_update, sr_log_update
from .detectors.specs import K_CUSUM, K_DE_SHIRYAEV, K_FRACTIONAL, K_SHIRYAEV, K_SR
from .dist_models import _draw_change, _family_llr, _family_sample
from .rng import STREAM_CHANGE, STREAM_OBS, trial_key, uniform


@njit(cache=True)
def _observe(family, fparams, key, n, gamma):
    u = uniform(key, np.uint64(STREAM_OBS), np.uint64(n))
    x = _family_sample(family, fparams, n >= gamma, u)
    return _family_llr(family, fparams, x)


@njit(cache=True)
def run_one(code, dparams, family, fparams, key, gamma, cap):
    """Simulate one trial.

    Returns ``(tau, capped, observations_used, pre_change_observations,
    terminal_statistic)``; ``tau == cap`` when the detector never stopped.
    """
    used = 0
    pre_used = 0
    if code == K_CUSUM:
        b = dparams[0]
        w = 0.0
        for n in range(1, cap + 1):
            w = cusum_update(w, _observe(family, fparams, key, n, gamma))
            if w >= b:
                return n, False, n, min(n, gamma - 1), w
        return cap, True, cap, min(cap, gamma - 1), w
    if code == K_SR:
        log_b = dparams[0]
        z = dparams[1]
        for n in range(1, cap + 1):
            z = sr_log_update(z, _observe(family, fparams, key, n, gamma))
            if z >= log_b:
                return n, False, n, min(n, gamma - 1), z
        return cap, True, cap, min(cap, gamma - 1), z
    # Shiryaev family, posterior-probability form
    thr_a = dparams[0]
    rho = dparams[1]
    p = 0.0
    if code == K_SHIRYAEV:
        for n in range(1, cap + 1):
            p = shiryaev_p_update(p, rho, _observe(family, fparams, key, n, gamma))
            if p >= thr_a:
                return n, False, n, min(n, gamma - 1), p
        return cap, True, cap, min(cap, gamma - 1), p
    if code == K_DE_SHIRYAEV:
        thr_b = dparams[2]
        take = p >= thr_b
        for n in range(1, cap + 1):
            if take:
                p = shiryaev_p_update(p, rho, _observe(family, fparams, key, n, gamma))
                used += 1
                if n < gamma:
                    pre_used += 1
            else:
                p = p + (1.0 - p) * rho
            take = p >= thr_b
            if p >= thr_a:
                return n, False, used, pre_used, p
        return cap, True, used, pre_used, p
    if code == K_FRACTIONAL:
        period = np.int64(dparams[2])
        for n in range(1, cap + 1):
            if n % period == 0:
                p = shiryaev_p_update(p, rho, _observe(family, fparams, key, n, gamma))
                used += 1
                if n < gamma:
                    pre_used += 1
            else:
                p = p + (1.0 - p) * rho
            if p >= thr_a:
                return n, False, used, pre_used, p
        return cap, True, used, pre_used, p
    raise ValueError("unknown detector kernel code")


@njit(cache=True, parallel=True)
def run_block(code, dparams, family, fparams, law, rho_law, gamma_fixed, base_seed, first_index, num, cap):
    tau = np.empty(num, np.int64)
    gamma = np.empty(num, np.int64)
    capped = np.empty(num, np.bool_)
    used = np.empty(num, np.int64)
    pre_used = np.empty(num, np.int64)
    terminal = np.empty(num, np.float64)
    seed = np.uint64(base_seed)
    for i in prange(num):
        key = trial_key(seed, np.uint64(first_index + i))
        g = _draw_change(law, rho_law, gamma_fixed, uniform(key, np.uint64(STREAM_CHANGE), np.uint64(0)))
        t, c, u, pu, s = run_one(code, dparams, family, fparams, key, g, cap)
        tau[i] = t
        gamma[i] = g
        capped[i] = c
        used[i] = u
        pre_used[i] = pu
        terminal[i] = s
    return tau, gamma, capped, used, pre_used, terminal
