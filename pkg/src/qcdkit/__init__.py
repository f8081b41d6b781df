"""Quickest change detection: detectors, Monte Carlo harness, asymptotics."""

import os

# numba otherwise probes an outdated TBB on some systems and warns on every run
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numba  # noqa: E402

# the environment default above is read only when numba is first imported
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "workqueue"
