"""Brownian increments with their Lévy areas, the bridge decomposition
``A_kl = zeta_k W_l - zeta_l W_k + K_kl`` and the Gaussian surrogate.

d2-vectors are packed lexicographically over pairs k < l.  The normalised
vector X stacks ``sqrt(12 N) zeta`` followed by ``sqrt(12) N K``.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .polyalg import Poly

DEFAULT_CHUNK = 2048


@lru_cache(maxsize=None)
def pairs(d: int) -> tuple[tuple[int, int], ...]:
    """Lexicographic list of index pairs (k, l), k < l (0-based)."""
    return tuple(itertools.combinations(range(d), 2))


def d2_of(d: int) -> int:
    return d * (d - 1) // 2


def d1_of(d: int) -> int:
    return d * (d + 1) // 2


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Packed ``a_k b_l - a_l b_k`` over the last axis."""
    d = a.shape[-1]
    if d < 2:
        return np.zeros(a.shape[:-1] + (0,))
    k, l = np.array(pairs(d)).T
    return a[..., k] * b[..., l] - a[..., l] * b[..., k]


@dataclass(frozen=True)
class FinePath:
    d: int
    h: float
    n_sub: int
    values: np.ndarray  # (n_sub + 1, d), values[0] = 0

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[-1]


@dataclass(frozen=True)
class AreaIncrement:
    W: np.ndarray
    zeta: np.ndarray
    K: np.ndarray
    A: np.ndarray


@dataclass(frozen=True)
class Surrogate:
    W: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    B: np.ndarray


@dataclass
class AreaBatch:
    """Arrays of many increments; leading axis indexes samples."""

    W: np.ndarray
    zeta: np.ndarray
    K: np.ndarray
    A: np.ndarray

    def __len__(self) -> int:
        return self.W.shape[0]

    def __getitem__(self, i: int) -> AreaIncrement:
        return AreaIncrement(self.W[i], self.zeta[i], self.K[i], self.A[i])


def simulate_fine_increment(d: int, h: float, n_sub: int, rng) -> FinePath:
    if n_sub < 2 or h <= 0:
        raise ValueError("need n_sub >= 2 and h > 0")
    dW = rng.standard_normal((n_sub, d)) * math.sqrt(h / n_sub)
    values = np.vstack([np.zeros((1, d)), np.cumsum(dW, axis=0)])
    return FinePath(d, h, n_sub, values)


def _area_from_increments(dW: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(W, zeta, K, A) for paths given as increments of shape (..., n_sub, d)."""
    n_sub, d = dW.shape[-2:]
    W = np.cumsum(dW, axis=-2)
    end = W[..., -1, :]
    # left-point sum: sum (W - dW)_k dW_l - (W - dW)_l dW_k equals the same with W
    if d >= 2:
        M = np.einsum("...ni,...nj->...ij", W, dW)
        k, l = np.array(pairs(d)).T
        A = 0.5 * (M[..., k, l] - M[..., l, k])
    else:
        A = np.zeros(dW.shape[:-2] + (0,))
    # trapezoid rule for h^{-1} int W dt, with W(0) = 0
    zeta = (W.sum(axis=-2) - 0.5 * end) / n_sub - 0.5 * end
    K = A - wedge(zeta, end)
    return end, zeta, K, A


def area_from_path(path: FinePath) -> np.ndarray:
    """Left-point Itô sum for ``1/2 int (W_k dW_l - W_l dW_k)``."""
    return _area_from_increments(path.increments)[3]


def decompose(path: FinePath) -> AreaIncrement:
    W, zeta, K, A = _area_from_increments(path.increments)
    return AreaIncrement(W, zeta, K, A)


def simulate_increments(d: int, h: float, n_sub: int, count: int, rng, chunk: int = DEFAULT_CHUNK) -> AreaBatch:
    """``count`` consecutive draws of :func:`simulate_fine_increment` + :func:`decompose`.

    Uses the generator's stream in the same order as repeated single calls.
    """
    if n_sub < 2 or h <= 0:
        raise ValueError("need n_sub >= 2 and h > 0")
    d2 = d2_of(d)
    out = AreaBatch(np.empty((count, d)), np.empty((count, d)), np.empty((count, d2)), np.empty((count, d2)))
    scale = math.sqrt(h / n_sub)
    for start in range(0, count, chunk):
        stop = min(count, start + chunk)
        dW = rng.standard_normal((stop - start, n_sub, d)) * scale
        out.W[start:stop], out.zeta[start:stop], out.K[start:stop], out.A[start:stop] = _area_from_increments(dW)
    return out


def sample_surrogate(d: int, N: int, W, rng) -> Surrogate:
    """``B = z ^ W + lambda`` with z ~ N(0, I/(12N)), lambda ~ N(0, I/(12N^2)).

    ``W`` may be a single increment or a batch of shape (count, d).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    W = np.asarray(W, dtype=float)
    z = rng.standard_normal(W.shape) / math.sqrt(12 * N)
    lam = rng.standard_normal(W.shape[:-1] + (d2_of(d),)) / (math.sqrt(12) * N)
    return Surrogate(W, z, lam, wedge(z, W) + lam)


def normalize_to_X(inc: AreaIncrement | AreaBatch, N: float) -> np.ndarray:
    return np.concatenate([math.sqrt(12 * N) * inc.zeta, math.sqrt(12) * N * inc.K], axis=-1)


def write_increments_csv(path: str | Path, batch: AreaBatch) -> None:
    d = batch.W.shape[1]
    names = [f"W{k + 1}" for k in range(d)] + [f"zeta{k + 1}" for k in range(d)]
    names += [f"K{k + 1}{l + 1}" for k, l in pairs(d)] + [f"A{k + 1}{l + 1}" for k, l in pairs(d)]
    rows = np.hstack([batch.W, batch.zeta, batch.K, batch.A])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


# --- cumulants -------------------------------------------------------------


@lru_cache(maxsize=None)
def _partitions(n: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """Set partitions of range(n) with no singleton blocks."""

    def rec(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for size in range(1, len(rest) + 1):
            for others in itertools.combinations(rest, size):
                remaining = [x for x in rest if x not in others]
                for tail in rec(remaining):
                    yield [(first,) + others] + tail

    return tuple(tuple(p) for p in rec(list(range(n))))


def _multisets(d: int, k: int):
    return list(itertools.combinations_with_replacement(range(d), k))


def _central_moments(Xc: np.ndarray, orders, chunk: int = 65536) -> dict[tuple[int, ...], float]:
    """Sample means of products of centred columns over all index multisets."""
    d = Xc.shape[1]
    top = max(orders)
    sums: dict[tuple[int, ...], float] = {}
    for start in range(0, Xc.shape[0], chunk):
        block = Xc[start : start + chunk]

        def dfs(idx: tuple[int, ...], prod: np.ndarray):
            if len(idx) >= 2:
                sums[idx] = sums.get(idx, 0.0) + float(prod.sum())
            if len(idx) == top:
                return
            lo = idx[-1] if idx else 0
            for j in range(lo, d):
                dfs(idx + (j,), block[:, j] if not idx else prod * block[:, j])

        dfs((), np.ones(block.shape[0]))
    n = Xc.shape[0]
    return {k: v / n for k, v in sums.items()}


def _kstat_entries(X: np.ndarray, order: int) -> dict[int, dict[tuple[int, ...], float]]:
    """Unbiased k-statistics for orders 2..4, plug-in for order 6."""
    n = X.shape[0]
    d = X.shape[1]
    Xc = X - X.mean(axis=0)
    orders = [2, 3, 4] + ([6] if order >= 6 else [])
    mom = _central_moments(Xc, orders)

    def m(*idx):
        return mom[tuple(sorted(idx))]

    out: dict[int, dict[tuple[int, ...], float]] = {2: {}, 3: {}, 4: {}}
    for i, j in _multisets(d, 2):
        out[2][(i, j)] = n / (n - 1) * m(i, j)
    for idx in _multisets(d, 3):
        out[3][idx] = n * n / ((n - 1) * (n - 2)) * m(*idx)
    for i, j, k, l in _multisets(d, 4):
        pair_sum = m(i, j) * m(k, l) + m(i, k) * m(j, l) + m(i, l) * m(j, k)
        out[4][(i, j, k, l)] = n * n * ((n + 1) * m(i, j, k, l) - (n - 1) * pair_sum) / ((n - 1) * (n - 2) * (n - 3))
    if order >= 6:
        out[6] = {}
        parts = _partitions(6)
        for idx in _multisets(d, 6):
            total = 0.0
            for part in parts:
                b = len(part)
                term = (-1) ** (b - 1) * math.factorial(b - 1)
                for block in part:
                    term *= m(*(idx[t] for t in block))
                total += term
            out[6][idx] = total
    return out


def _full_tensor(entries: dict[tuple[int, ...], float], d: int, k: int) -> np.ndarray:
    T = np.zeros((d,) * k)
    for idx, v in entries.items():
        for perm in set(itertools.permutations(idx)):
            T[perm] = v
    return T


@dataclass
class CumulantExpansion:
    """Joint cumulants of X (orders 2..order) with standard errors."""

    d: int
    order: int
    tensors: dict[int, np.ndarray]
    stderr: dict[int, np.ndarray] = field(default_factory=dict)
    M: int = 0
    n_sub: int = 0

    @property
    def d1(self) -> int:
        return d1_of(self.d)

    def char_poly(self, k: int) -> Poly:
        """``c_k(z) = i^k kappa_k(z, ..., z) / k!`` for even k (real part)."""
        if k % 2:
            raise ValueError("only even orders have a real characteristic polynomial term")
        T = self.tensors[k]
        terms: dict[tuple[int, ...], float] = {}
        for idx in _multisets(self.d1, k):
            alpha = [0] * self.d1
            for i in idx:
                alpha[i] += 1
            mult = math.factorial(k) // math.prod(math.factorial(a) for a in alpha)
            terms[tuple(alpha)] = (-1) ** (k // 2) * mult * T[idx] / math.factorial(k)
        return Poly(self.d1, terms)

    def to_json(self) -> dict:
        data = {"d": self.d, "order": self.order, "M": self.M, "n_sub": self.n_sub, "cumulants": {}}
        for k, T in sorted(self.tensors.items()):
            se = self.stderr.get(k, np.zeros_like(T))
            data["cumulants"][str(k)] = [[list(idx), float(T[idx]), float(se[idx])] for idx in _multisets(self.d1, k)]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "CumulantExpansion":
        d = int(data["d"])
        d1 = d1_of(d)
        tensors, stderr = {}, {}
        for key, rows in data["cumulants"].items():
            k = int(key)
            tensors[k] = _full_tensor({tuple(r[0]): r[1] for r in rows}, d1, k)
            stderr[k] = _full_tensor({tuple(r[0]): r[2] for r in rows}, d1, k)
        return cls(d, int(data["order"]), tensors, stderr, int(data.get("M", 0)), int(data.get("n_sub", 0)))


def sample_X(d: int, M: int, n_sub: int, rng, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """M draws of the normalised vector X (its law does not depend on N)."""
    return normalize_to_X(simulate_increments(d, 1.0, n_sub, M, rng, chunk), 1.0)


def estimate_cumulants(d: int, order: int, M: int, n_sub: int, rng, batches: int = 20) -> CumulantExpansion:
    """k-statistic cumulants of X with batch-means standard errors."""
    if order not in (4, 6):
        raise ValueError("order must be 4 or 6")
    if M < 10**6:
        warnings.warn(f"M = {M} is below the 1e6 samples recommended for cumulant estimates", stacklevel=2)
    X = sample_X(d, M, n_sub, rng)
    d1 = X.shape[1]
    full = _kstat_entries(X, order)
    tensors = {k: _full_tensor(v, d1, k) for k, v in full.items()}
    per_batch = [_kstat_entries(b, order) for b in np.array_split(X, batches)]
    stderr = {}
    for k in full:
        vals = {idx: np.array([pb[k][idx] for pb in per_batch]) for idx in full[k]}
        se = {idx: float(v.std(ddof=1) / math.sqrt(batches)) for idx, v in vals.items()}
        stderr[k] = _full_tensor(se, d1, k)
    return CumulantExpansion(d, order, tensors, stderr, M, n_sub)


def load_cumulants(d: int) -> CumulantExpansion:
    """Frozen cumulant estimates shipped with the package."""
    name = f"cumulants_d{d}.json"
    try:
        text = resources.files("levycoupling").joinpath("data", name).read_text()
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"no frozen cumulants for d={d}; run scripts/estimate_cumulants.py") from exc
    return CumulantExpansion.from_json(json.loads(text))
