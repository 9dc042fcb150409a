"""Dyadic index sets and the per-step matrices G_r, H_E, J, H."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..levyarea import d1_of, d2_of, pairs

SQRT2 = math.sqrt(2.0)


class SingularNode(ArithmeticError):
    """H_E lost positive definiteness to round-off."""


@dataclass(frozen=True)
class DyadicSet:
    """``E = {k 2^n, ..., (k + 1) 2^n - 1}`` inside ``{0, ..., 2^m - 1}``."""

    m: int
    n: int
    k: int

    def __post_init__(self):
        if not (0 <= self.n <= self.m and 0 <= self.k < 2 ** (self.m - self.n)):
            raise ValueError(f"invalid dyadic set (m={self.m}, n={self.n}, k={self.k})")

    @classmethod
    def root(cls, m: int) -> "DyadicSet":
        return cls(m, m, 0)

    @property
    def start(self) -> int:
        return self.k << self.n

    @property
    def stop(self) -> int:
        return (self.k + 1) << self.n

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)

    @property
    def depth(self) -> int:
        return self.m - self.n

    @property
    def heap_index(self) -> int:
        """1 for the root, 2i and 2i + 1 for the children of node i."""
        return (1 << self.depth) + self.k

    def children(self) -> tuple["DyadicSet", "DyadicSet"]:
        if self.n == 0:
            raise ValueError("a singleton has no children")
        return DyadicSet(self.m, self.n - 1, 2 * self.k), DyadicSet(self.m, self.n - 1, 2 * self.k + 1)

    def parent(self) -> "DyadicSet":
        if self.n == self.m:
            raise ValueError("the root has no parent")
        return DyadicSet(self.m, self.n + 1, self.k // 2)


def dyadic_decomposition(r: int, m: int) -> list[DyadicSet]:
    """Disjoint dyadic sets whose union is ``{0, ..., r - 1}``, largest first."""
    if not 0 <= r <= 2**m:
        raise ValueError("r out of range")
    out = []
    start = 0
    for n in range(m, -1, -1):
        if r - start >= (1 << n):
            out.append(DyadicSet(m, n, start >> n))
            start += 1 << n
    return out


def build_Mr(W, N: float) -> np.ndarray:
    """Rows ``sqrt(N) (W_l e_k - W_k e_l)`` for pairs k < l; shape (..., d2, d)."""
    W = np.asarray(W, dtype=float)
    d = W.shape[-1]
    out = np.zeros(W.shape[:-1] + (d2_of(d), d))
    s = math.sqrt(N)
    for row, (k, l) in enumerate(pairs(d)):
        out[..., row, k] = s * W[..., l]
        out[..., row, l] = -s * W[..., k]
    return out


def build_Gr(W, N: float) -> np.ndarray:
    """``G_r = 12^{-1/2} [M_r | I]``; shape (..., d2, d1)."""
    W = np.asarray(W, dtype=float)
    d = W.shape[-1]
    M = build_Mr(W, N)
    eye = np.broadcast_to(np.eye(d2_of(d)), M.shape[:-1] + (d2_of(d),))
    return np.concatenate([M, eye], axis=-1) / math.sqrt(12.0)


def gram(G: np.ndarray) -> np.ndarray:
    return G @ np.swapaxes(G, -1, -2)


def op_norm(G: np.ndarray) -> np.ndarray:
    """Operator 2-norm over the last two axes."""
    return np.sqrt(np.linalg.eigvalsh(gram(G))[..., -1])


def sym_sqrt(S: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Symmetric (inverse) square root of a batch of SPD matrices."""
    if S.shape[-1] == 1:
        return np.sqrt(S) if not inverse else 1.0 / np.sqrt(S)
    w, V = np.linalg.eigh(S)
    if np.any(w <= 0):
        raise SingularNode(f"non-positive eigenvalue {w.min():.3e}")
    f = np.sqrt(w) if not inverse else 1.0 / np.sqrt(w)
    return (V * f[..., None, :]) @ np.swapaxes(V, -1, -2)


def conditional_matrices(HF: np.ndarray, HG: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(H_E, J, H) for children covariances H_F, H_G.

    With ``Y_E = (Y_F + Y_G)/sqrt 2`` the law of ``Y_F`` given ``Y_E = x`` is
    ``N(J x, H)``, ``J = 2^{-1/2} H_F H_E^{-1}``, ``H = H_F H_E^{-1} H_G / 2``.
    """
    HE = 0.5 * (HF + HG)
    HEinv_HF = np.linalg.solve(HE, HF)  # H_E^{-1} H_F
    J = np.swapaxes(HEinv_HF, -1, -2) / SQRT2
    H = 0.5 * np.swapaxes(HEinv_HF, -1, -2) @ HG
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    return HE, J, H


@dataclass
class NodeMatrices:
    node: DyadicSet
    G_list: np.ndarray  # (|E|, d2, d1)
    H_E: np.ndarray
    J: np.ndarray | None = None
    H: np.ndarray | None = None
    H_norm: float | None = None

    @property
    def HE_inv_norm(self) -> float:
        return float(1.0 / np.linalg.eigvalsh(self.H_E)[0])


def build_HE(node: DyadicSet, G_list) -> NodeMatrices:
    """``H_E = 2^{-n} sum_{r in E} G_r G_r^t`` plus J, H for non-singletons."""
    G_list = np.asarray(G_list, dtype=float)
    if G_list.shape[0] != node.size:
        raise ValueError(f"need {node.size} matrices G_r, got {G_list.shape[0]}")
    grams = gram(G_list)
    HE = grams.mean(axis=0)
    if np.linalg.eigvalsh(HE)[0] <= 0:
        raise SingularNode("H_E is not positive definite")
    out = NodeMatrices(node, G_list, HE)
    if node.n >= 1:
        half = node.size // 2
        HF = grams[:half].mean(axis=0)
        HG = grams[half:].mean(axis=0)
        _, out.J, out.H = conditional_matrices(HF, HG)
        out.H_norm = float(np.linalg.eigvalsh(out.H)[-1])
    return out


def random_W(rng, count: int, d: int, N: int) -> np.ndarray:
    """Brownian increments over steps of length 1/N."""
    return rng.standard_normal((count, d)) / math.sqrt(N)


@dataclass
class TailReport:
    alpha: float
    estimate: float
    stderr: float
    finite: bool
    survival_x: np.ndarray
    survival_logp: np.ndarray
    top_decile_slope: float


def tail_statistics(G: np.ndarray, alpha: float | None = None, points: int = 50) -> TailReport:
    """``E exp(alpha |G_r|^2)`` and the log-survival curve of ``|G_r|^2``.

    ``alpha`` defaults to ``1/(96 d)``, half the admissible cap.
    """
    G = np.asarray(G, dtype=float)
    d2, d1 = G.shape[-2:]
    d = int(round(math.sqrt(2 * d1 + 0.25) - 0.5))
    if alpha is None:
        alpha = 1.0 / (96 * d)
    sq = op_norm(G) ** 2
    vals = np.exp(alpha * sq)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    xs = np.sort(sq)
    n = xs.size
    qs = np.linspace(0.0, 1.0 - 1.0 / n, points)
    x_at = np.quantile(xs, qs)
    logp = np.log(1.0 - qs)
    top = qs >= 0.9
    slope = float(np.polyfit(x_at[top], logp[top], 1)[0]) if top.sum() >= 2 else float("nan")
    return TailReport(alpha, est, se, bool(np.isfinite(est)), x_at, logp, slope)
