"""Multiple change point detection in piecewise-stationary VAR models."""

import json

from ._core import (
    ConfigError,
    DetectionResult,
    VarsegError,
    __version__,
    cli,
    hausdorff,
    lstsp,
    selection_rate,
    select_lag,
    support_metrics,
    tbss,
)
from . import _core

_METHODS = {"sparse": "sparse", "group": "group_sparse", "fls": "fixed_lowrank_sparse", "ls": "lowrank_sparse"}


def simulate(method="sparse", *, T, p, break_points=(), seed=1, **spec):
    """Simulate a piecewise VAR series.

    `break_points` lists the change points only (1-based). Remaining keyword
    arguments are generation-spec fields: q, lags_vector, pattern, density,
    signals, group_type, group_index, rank, singular_vals, info_ratio,
    spectral_radius, skip, noise_scales.

    Returns a dict with series (T x p), noise, change_points, transitions
    (p x pq per segment), and the lowrank / sparse parts for low-rank methods.
    """
    body = dict(spec)
    body.update(method=_METHODS.get(method, method), T=T, p=p, seed=seed,
                break_points=[int(b) for b in break_points] + [T + 1])
    return _core._simulate(json.dumps(body))


__all__ = [
    "ConfigError", "DetectionResult", "VarsegError", "__version__", "cli", "hausdorff", "lstsp",
    "selection_rate", "select_lag", "simulate", "support_metrics", "tbss",
]
