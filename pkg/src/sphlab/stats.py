"""Error metrics and log-log least-squares fits."""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import numpy as np


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    points: int


def rmse(errors) -> float:
    """Root mean square of the per-particle errors."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("rmse of an empty sample")
    return float(math.sqrt(np.mean(e * e)))


def error_std(errors) -> float:
    """Population standard deviation of the signed errors (never exceeds rmse)."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size < 2:
        raise ValueError("error_std needs at least two values")
    sd = math.sqrt(np.mean((e - e.mean()) ** 2))
    # std^2 = rmse^2 - mean^2 exactly; clip the last-ulp rounding excess
    return float(min(sd, rmse(e)))


def fit_loglog_slope(points: Iterable[tuple[float, float]]) -> SlopeFit:
    """Ordinary least squares of ``log10 y`` on ``log10 x``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (x, y) points")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0.0):
        raise ValueError("log-log fit needs strictly positive finite values")
    lx = np.log10(pts[:, 0])
    ly = np.log10(pts[:, 1])
    if np.ptp(lx) == 0.0:
        raise ValueError("x values must not all coincide")
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    sxy = np.sum((lx - mx) * (ly - my))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_tot = np.sum((ly - my) ** 2)
    ss_res = np.sum((ly - (intercept + slope * lx)) ** 2)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return SlopeFit(float(slope), float(intercept), float(r2), int(pts.shape[0]))
