"""Empirical Wasserstein-p distances under the sup-norm ground metric."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

ASSIGNMENT_CAP = 512


class SizeCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] == 0:
            raise ValueError("empty measure")
        object.__setattr__(self, "points", pts)
        w = np.full(pts.shape[0], 1.0 / pts.shape[0]) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (pts.shape[0],) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.size, rtol=0, atol=1e-15))


def _resample_quantiles(x: np.ndarray, M: int) -> np.ndarray:
    """Empirical quantile function of sorted x at the M mid-points."""
    q = (np.arange(M) + 0.5) / M
    return x[np.minimum((q * x.size).astype(int), x.size - 1)]


def wp_quantile_1d(x_samples, y_samples, p: float = 1.0) -> float:
    """W_p between 1D empirical measures via the sorted (quantile) coupling."""
    x = np.sort(np.asarray(x_samples, dtype=float).ravel())
    y = np.sort(np.asarray(y_samples, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise ValueError("empty sample")
    if p < 1:
        raise ValueError("p must be >= 1")
    if x.size != y.size:
        M = max(x.size, y.size)
        x, y = _resample_quantiles(x, M), _resample_quantiles(y, M)
    return float(np.mean(np.abs(x - y) ** p) ** (1.0 / p))


def sup_cost(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    return np.abs(a[:, None, :] - b[None, :, :]).max(axis=2) ** p


def wp_assignment(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 1.0) -> float:
    """Exact W_p between uniform empirical measures with ``|x - y|_inf`` cost."""
    if mu.size != nu.size:
        raise ValueError("measures must have the same number of points")
    if mu.size > ASSIGNMENT_CAP:
        raise SizeCapExceeded(f"exact assignment is capped at {ASSIGNMENT_CAP} points")
    if not (mu.is_uniform() and nu.is_uniform()):
        raise ValueError("only uniform weights are supported")
    cost = sup_cost(mu.points, nu.points, p)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean() ** (1.0 / p))


def wp_subsampled(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, size: int, reps: int, rng) -> tuple[float, float]:
    """Mean and stderr of exact assignment on random equal-size subsamples."""
    size = min(size, ASSIGNMENT_CAP, mu.size, nu.size)
    vals = []
    for _ in range(reps):
        a = mu.points[rng.choice(mu.size, size, replace=False)]
        b = nu.points[rng.choice(nu.size, size, replace=False)]
        vals.append(wp_assignment(EmpiricalMeasure(a), EmpiricalMeasure(b), p))
    vals = np.array(vals)
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
    return float(vals.mean()), se


def wp_sliced(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, n_proj: int, rng) -> float:
    """Average 1D W_p over random unit directions (heuristic proxy)."""
    if n_proj < 32:
        raise ValueError("n_proj must be >= 32")
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    theta = rng.standard_normal((n_proj, mu.dim))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    return float(np.mean([wp_quantile_1d(mu.points @ t, nu.points @ t, p) for t in theta]))


def density_diff_bound(f, g, p: float, grid) -> float:
    """``2^{1 - 1/p} (int |x|^p |f - g| dx)^{1/p}`` on a rectangular grid.

    ``grid`` is a sequence of 1D coordinate arrays (one per axis, uniformly
    spaced); ``f`` and ``g`` are tabulated on their product.
    """
    axes = [np.asarray(a, dtype=float) for a in (grid if isinstance(grid, (list, tuple)) else [grid])]
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    shape = tuple(a.size for a in axes)
    if f.shape != shape or g.shape != shape:
        raise ValueError("densities must be tabulated on the grid")
    cell = math.prod(float(a[1] - a[0]) for a in axes)
    for name, h in (("f", f), ("g", g)):
        mass = h.sum() * cell
        if abs(mass - 1.0) > 1e-3:
            raise ValueError(f"{name} integrates to {mass:.5f}, not 1")
    mesh = np.meshgrid(*axes, indexing="ij")
    norm = np.max(np.abs(np.stack(mesh)), axis=0)  # sup-norm ground metric
    integral = float(np.sum(norm**p * np.abs(f - g)) * cell)
    return 2.0 ** (1.0 - 1.0 / p) * integral ** (1.0 / p)
