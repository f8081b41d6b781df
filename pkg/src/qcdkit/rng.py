"""Counter-based random streams.

Every random draw in the toolkit is a pure function of
``(base_seed, trial_index, stream, counter)``.  The mixing function is the
SplitMix64 finalizer; uniforms use the top 53 bits shifted to the open
interval (0, 1); Gaussian variates use Wichura's AS241 inverse CDF (the same
algorithm as :meth:`statistics.NormalDist.inv_cdf`).  Because there is no
hidden generator state, a trial produces the same stream whether it runs
alone, in a batch, or on any thread, and on any platform with IEEE doubles.

Stream ids used by the harness:

* ``STREAM_OBS`` -- one uniform per time step for the observation at that step
* ``STREAM_CHANGE`` -- the change-point draw
* ``STREAM_SENSOR + l`` -- observations at sensor ``l`` in network simulations
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STREAM_OBS = 0
STREAM_CHANGE = 1
STREAM_AUX = 2
STREAM_SENSOR = 16

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM_MULT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 2.0**-53


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def trial_key(base_seed, trial_index):
    """Per-trial key: hash(base_seed, trial_index)."""
    k = mix64(np.uint64(base_seed) + _GOLDEN)
    return mix64(k + (np.uint64(trial_index) + _ONE) * _GOLDEN)


@njit(cache=True)
def uniform(key, stream, counter):
    """Uniform on the open interval (0, 1)."""
    sk = mix64(key + (np.uint64(stream) + _ONE) * _STREAM_MULT)
    z = mix64(sk + (np.uint64(counter) + _ONE) * _GOLDEN)
    return (float(z >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def normal_ppf(p):
    """Standard normal quantile, AS241 (PPND16), p in (0, 1)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e+3 * r +
                     3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r +
                     4.5921953931549871457e+4) * r +
                     1.3731693765509461125e+4) * r +
                     1.9715909503065514427e+3) * r +
                     1.3314166789178437745e+2) * r +
                     3.3871328727963666080e+0) * q
        den = (((((((5.2264952788528545610e+3 * r +
                     2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r +
                     2.1213794301586595867e+4) * r +
                     5.3941960214247511077e+3) * r +
                     6.8718700749205790830e+2) * r +
                     4.2313330701600911252e+1) * r +
                     1.0)
        return num / den
    r = p if q <= 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r +
                     2.27238449892691845833e-2) * r +
                     2.41780725177450611770e-1) * r +
                     1.27045825245236838258e+0) * r +
                     3.64784832476320460504e+0) * r +
                     5.76949722146069140550e+0) * r +
                     4.63033784615654529590e+0) * r +
                     1.42343711074968357734e+0)
        den = (((((((1.05075007164441684324e-9 * r +
                     5.47593808499534494600e-4) * r +
                     1.51986665636164571966e-2) * r +
                     1.48103976427480074590e-1) * r +
                     6.89767334985100004550e-1) * r +
                     1.67638483018380384940e+0) * r +
                     2.05319162663775882187e+0) * r +
                     1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r +
                     2.71155556874348757815e-5) * r +
                     1.24266094738807843860e-3) * r +
                     2.65321895265761230930e-2) * r +
                     2.96560571828504891230e-1) * r +
                     1.78482653991729133580e+0) * r +
                     5.46378491116411436990e+0) * r +
                     6.65790464350110377720e+0)
        den = (((((((2.04426310338993978564e-15 * r +
                     1.42151175831644588870e-7) * r +
                     1.84631831751005468180e-5) * r +
                     7.86869131145613259100e-4) * r +
                     1.48753612908506148525e-2) * r +
                     1.36929880922735805310e-1) * r +
                     5.99832206555887937690e-1) * r +
                     1.0)
    x = num / den
    if q < 0.0:
        x = -x
    return x


@njit(cache=True)
def _fill_uniforms(key, stream, start, out):
    for i in range(out.shape[0]):
        out[i] = uniform(key, stream, start + np.uint64(i))


class RngState:
    """A per-trial stream cursor.

    ``RngState(seed)`` is trial 0 of ``seed``; use :meth:`for_trial` to get the
    stream of another trial.  Not thread-safe: own one per trial.
    """

    def __init__(self, seed: int, trial_index: int = 0, stream: int = STREAM_OBS):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.trial_index = int(trial_index)
        self.stream = int(stream)
        self.key = np.uint64(trial_key(np.uint64(self.seed), np.uint64(self.trial_index)))
        self.counter = 0

    def for_trial(self, trial_index: int, stream: int = STREAM_OBS) -> "RngState":
        return RngState(self.seed, trial_index, stream)

    def next_uniform(self) -> float:
        u = uniform(self.key, np.uint64(self.stream), np.uint64(self.counter))
        self.counter += 1
        return float(u)

    def uniforms(self, size: int) -> np.ndarray:
        out = np.empty(int(size))
        _fill_uniforms(self.key, np.uint64(self.stream), np.uint64(self.counter), out)
        self.counter += int(size)
        return out
