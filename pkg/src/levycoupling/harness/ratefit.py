"""Ordinary least squares on log-log error curves."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RateFit:
    """``log err = intercept + slope log N``.

    ``slope_stderr`` is the larger of the residual-based OLS standard error
    and the error propagated from the per-point standard errors.
    """

    log_N: tuple[float, ...]
    log_err: tuple[float, ...]
    log_err_se: tuple[float, ...]
    slope: float
    intercept: float
    slope_stderr: float
    slope_stderr_ols: float
    slope_stderr_points: float


def fit_rate(points) -> RateFit:
    """Fit ``(N, error, stderr)`` triples; needs >= 4 points and distinct N."""
    pts = [(float(n), float(e), float(s)) for n, e, s in points]
    if len(pts) < 4:
        raise ValueError("fit_rate needs at least 4 points")
    N = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    se = np.array([p[2] for p in pts])
    if np.any(N <= 0) or np.any(err <= 0):
        raise ValueError("N and errors must be positive")
    if np.ptp(N) == 0:
        raise ValueError("degenerate input: all N are equal")
    x, y = np.log(N), np.log(err)
    y_se = np.where(np.isfinite(se), se, 0.0) / err  # delta method
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = len(pts) - 2
    se_ols = math.sqrt(float(resid @ resid) / dof / sxx)
    se_pts = math.sqrt(float(np.sum((xc * y_se) ** 2))) / sxx
    return RateFit(
        tuple(x.tolist()),
        tuple(y.tolist()),
        tuple(y_se.tolist()),
        slope,
        intercept,
        max(se_ols, se_pts),
        se_ols,
        se_pts,
    )
