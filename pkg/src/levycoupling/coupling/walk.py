"""The dyadic recursion coupling the simulated walk (Y) with the Gaussian
surrogate walk (Z).

Per tree, leaf values are ``Y_r = G_r X_r = N A_r`` and internal values are
``Y_E = (Y_F + Y_G)/sqrt 2``.  Z is built top-down: the root from ``Y_E0``,
then each split from the conditional residual of ``Y_F`` given ``Y_E``.  All
trees in a batch are processed together one level at a time; each node
consumes only its own pre-drawn Gaussian vector, so results do not depend on
how trees are grouped.

Randomness per tree comes from two streams: the oracle stream (fine Brownian
paths) and the coupler stream (one N(0, I) vector per node, in heap order:
row 0 for the root, row i for the split of heap node i).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..levyarea import CumulantExpansion, d2_of, normalize_to_X, simulate_increments
from .dyadic import SQRT2, build_Gr, conditional_matrices, gram, op_norm, sym_sqrt
from .edgeworth import CorrectionTerm
from .subcouplers import NodeBatch, Subcoupler

ORACLE_STREAM = 0
COUPLER_STREAM = 1


@dataclass(frozen=True)
class GuardConfig:
    """Fallback triggers.

    A node at level n uses its sub-coupler only if every ``|G_r|`` below it
    is at most ``g_scale * 2^(n eta)`` and the whitened residual is at most
    ``max_residual`` in sup-norm.
    """

    eta: float = 0.02
    kappa: int = 4
    g_scale: float = 4.0
    max_residual: float = 8.0

    def __post_init__(self):
        if not 0 < self.eta < 1 / 44:
            raise ValueError("eta must lie in (0, 1/44)")
        if self.kappa < 4 or self.kappa % 2:
            raise ValueError("kappa must be an even integer >= 4")
        if self.g_scale <= 0 or self.max_residual <= 0:
            raise ValueError("guard scales must be positive")

    def threshold(self, n: int) -> float:
        return self.g_scale * 2.0 ** (n * self.eta)


def tree_rngs(seed: int, N: int, tree: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(oracle, coupler) generators for one tree."""
    oracle = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ORACLE_STREAM, N, tree)))
    coupler = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(COUPLER_STREAM, N, tree)))
    return oracle, coupler


@dataclass
class LeafData:
    """Oracle increments of T trees of N steps each."""

    W: np.ndarray  # (T, N, d)
    X: np.ndarray  # (T, N, d1)
    A: np.ndarray  # (T, N, d2)

    @property
    def N(self) -> int:
        return self.W.shape[1]

    @property
    def d(self) -> int:
        return self.W.shape[2]


def simulate_leaves(d: int, N: int, n_sub: int, rngs) -> LeafData:
    Ws, Xs, As = [], [], []
    for rng in rngs:
        inc = simulate_increments(d, 1.0 / N, n_sub, N, rng)
        Ws.append(inc.W)
        Xs.append(normalize_to_X(inc, N))
        As.append(inc.A)
    return LeafData(np.array(Ws), np.array(Xs), np.array(As))


def draw_noise(rngs, N: int, d2: int) -> np.ndarray:
    return np.array([rng.standard_normal((N, d2)) for rng in rngs])


def _contract(T: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Push a symmetric tensor on R^{d1} forward by G (..., d2, d1)."""
    k = T.ndim
    src = "ijklmnop"[:k]
    dst = "abcdefgh"[:k]
    spec = src + "," + ",".join(f"...{a}{i}" for a, i in zip(dst, src)) + "->..." + dst
    return np.einsum(spec, T, *([G] * k), optimize="greedy")


@dataclass
class Levels:
    """Bottom-up aggregates; index 0 is the leaves, index m the root."""

    Y: list[np.ndarray]
    H: list[np.ndarray]
    gmax: list[np.ndarray]
    K4: list[np.ndarray] | None = None
    K6: list[np.ndarray] | None = None


def aggregate(leaves: LeafData, cumulants: CumulantExpansion | None, kappa: int = 4) -> tuple[Levels, np.ndarray]:
    N = leaves.N
    m = int(round(math.log2(N)))
    G = build_Gr(leaves.W, N)
    Y = [np.einsum("tnij,tnj->tni", G, leaves.X)]
    H = [gram(G)]
    gmax = [op_norm(G)]
    K4 = K6 = None
    if cumulants is not None:
        K4 = [_contract(cumulants.tensors[4], G)]
        if kappa >= 6:
            K6 = [_contract(cumulants.tensors[6], G)]
    for _ in range(m):
        Y.append((Y[-1][:, 0::2] + Y[-1][:, 1::2]) / SQRT2)
        H.append(0.5 * (H[-1][:, 0::2] + H[-1][:, 1::2]))
        gmax.append(np.maximum(gmax[-1][:, 0::2], gmax[-1][:, 1::2]))
        if K4 is not None:
            K4.append(0.25 * (K4[-1][:, 0::2] + K4[-1][:, 1::2]))
        if K6 is not None:
            K6.append(0.125 * (K6[-1][:, 0::2] + K6[-1][:, 1::2]))
    return Levels(Y, H, gmax, K4, K6), G


def _flat(a: np.ndarray | None, tail: int) -> np.ndarray | None:
    if a is None:
        return None
    return a.reshape((-1,) + a.shape[a.ndim - tail :])


def _matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", M, v)


def couple_root(
    Y0: np.ndarray,
    H0: np.ndarray,
    subcoupler: Subcoupler,
    guard_ok: np.ndarray,
    noise: np.ndarray,
    K4: np.ndarray | None = None,
    K6: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Z at the root for a batch of trees; returns (Z, coupled) flags.

    Rows where the guard or the sub-coupler fails get ``H0^{1/2} noise``.
    """
    Hs = sym_sqrt(H0)
    u = _matvec(sym_sqrt(H0, inverse=True), Y0)
    terms = []
    if K4 is not None:
        terms = [CorrectionTerm(K4, H0, np.zeros_like(Y0), Hs, K6)]
    v, ok = subcoupler.couple(NodeBatch(u, u, noise, terms))
    ok = ok & guard_ok
    v = np.where(ok[:, None], v, noise)
    return _matvec(Hs, v), ok


def couple_children(
    Y_F: np.ndarray,
    Y_E: np.ndarray,
    Z_E: np.ndarray,
    H_F: np.ndarray,
    H_G: np.ndarray,
    subcoupler: Subcoupler,
    guard_ok: np.ndarray,
    noise: np.ndarray,
    K4: tuple[np.ndarray, np.ndarray] | None = None,
    K6: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Z_F, Z_G, coupled) for a batch of splits.

    ``Z_F* = J Y_E + H^{1/2} v`` transports the conditional law of Y_F given
    Y_E; then ``Z_F = Z_F* + J (Z_E - Y_E)`` and ``Z_G = sqrt 2 Z_E - Z_F``.
    """
    H_E, J, H = conditional_matrices(H_F, H_G)
    Hs = sym_sqrt(H)
    mean = _matvec(J, Y_E)
    u = _matvec(sym_sqrt(H, inverse=True), Y_F - mean)
    terms = []
    if K4 is not None:
        eye = np.eye(Y_E.shape[-1])
        k6f, k6g = K6 if K6 is not None else (None, None)
        terms = [
            CorrectionTerm(K4[0], H_F, mean, Hs, k6f),
            CorrectionTerm(K4[1], H_G, _matvec(SQRT2 * eye - J, Y_E), -Hs, k6g),
        ]
    x_white = _matvec(sym_sqrt(H_E, inverse=True), Y_E)
    v, ok = subcoupler.couple(NodeBatch(u, x_white, noise, terms))
    ok = ok & guard_ok
    v = np.where(ok[:, None], v, noise)
    Z_F = mean + _matvec(Hs, v) + _matvec(J, Z_E - Y_E)
    Z_G = SQRT2 * Z_E - Z_F
    return Z_F, Z_G, ok


@dataclass
class CoupledBatch:
    """Coupled output for T trees."""

    A: np.ndarray  # (T, N, d2) oracle areas
    B: np.ndarray  # (T, N, d2) surrogate areas
    W: np.ndarray  # (T, N, d) shared increments
    Y_leaf: np.ndarray
    Z_leaf: np.ndarray
    Y_white: np.ndarray  # leaf values whitened by (G_r G_r^t)^{-1/2}
    Z_white: np.ndarray
    coupled: np.ndarray  # (T, N) per heap node: sub-coupler used (no fallback)
    guard_fired: np.ndarray  # (T, N)

    @property
    def partial_sums(self) -> np.ndarray:
        """``S_r = sum_{j < r} (A_j - B_j)`` for r = 1..N."""
        return np.cumsum(self.A - self.B, axis=1)

    def deviation(self) -> np.ndarray:
        """Sup-norm of the partial sums, shape (T, N)."""
        return np.abs(self.partial_sums).max(axis=2)


def couple_batch(
    leaves: LeafData,
    subcoupler: Subcoupler,
    guards: GuardConfig,
    noise: np.ndarray,
    cumulants: CumulantExpansion | None = None,
) -> CoupledBatch:
    T, N, d = leaves.W.shape
    d2 = d2_of(d)
    m = int(round(math.log2(N)))
    if 2**m != N:
        raise ValueError("N must be a power of two")
    if d < 2:
        raise ValueError("need d >= 2")
    if subcoupler.needs_cumulants and cumulants is None:
        raise ValueError(f"sub-coupler {subcoupler.name!r} needs cumulants")
    use_k = cumulants if subcoupler.needs_cumulants else None
    kappa = getattr(subcoupler, "kappa", guards.kappa)
    lev, G = aggregate(leaves, use_k, kappa)
    coupled = np.zeros((T, N), dtype=bool)
    fired = np.zeros((T, N), dtype=bool)

    gok = lev.gmax[m][:, 0] <= guards.threshold(m)
    fired[:, 0] = ~gok
    Z, ok = couple_root(
        lev.Y[m][:, 0],
        lev.H[m][:, 0],
        subcoupler,
        gok,
        noise[:, 0],
        None if use_k is None else lev.K4[m][:, 0],
        None if lev.K6 is None else lev.K6[m][:, 0],
    )
    coupled[:, 0] = ok
    Z = Z[:, None, :]
    for n in range(m, 0, -1):
        nE = N >> n
        heap = slice(nE, 2 * nE)
        YE = lev.Y[n]
        YF = lev.Y[n - 1][:, 0::2]
        HF = lev.H[n - 1][:, 0::2]
        HG = lev.H[n - 1][:, 1::2]
        gok = lev.gmax[n] <= guards.threshold(n)
        k4 = k6 = None
        if use_k is not None:
            k4 = (_flat(lev.K4[n - 1][:, 0::2], 4), _flat(lev.K4[n - 1][:, 1::2], 4))
            if lev.K6 is not None:
                k6 = (_flat(lev.K6[n - 1][:, 0::2], 6), _flat(lev.K6[n - 1][:, 1::2], 6))
        ZF, ZG, ok = couple_children(
            _flat(YF, 1),
            _flat(YE, 1),
            _flat(Z, 1),
            _flat(HF, 2),
            _flat(HG, 2),
            subcoupler,
            gok.reshape(-1),
            _flat(noise[:, heap], 1),
            k4,
            k6,
        )
        coupled[:, heap] = ok.reshape(T, nE)
        fired[:, heap] = ~gok
        Znext = np.empty((T, 2 * nE, d2))
        Znext[:, 0::2] = ZF.reshape(T, nE, d2)
        Znext[:, 1::2] = ZG.reshape(T, nE, d2)
        Z = Znext
    Hleaf_is = sym_sqrt(lev.H[0], inverse=True)
    return CoupledBatch(
        A=leaves.A,
        B=Z / N,
        W=leaves.W,
        Y_leaf=lev.Y[0],
        Z_leaf=Z,
        Y_white=_matvec(Hleaf_is, lev.Y[0]),
        Z_white=_matvec(Hleaf_is, Z),
        coupled=coupled,
        guard_fired=fired,
    )


@dataclass
class CoupledTrajectory:
    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    partial_sums: np.ndarray
    coupled: np.ndarray
    guard_fired: np.ndarray

    @property
    def fallbacks(self) -> int:
        return int((~self.coupled).sum())


def run_coupled_walk(
    m: int,
    d: int,
    subcoupler: Subcoupler,
    guards: GuardConfig,
    n_sub: int,
    rng,
    cumulants: CumulantExpansion | None = None,
) -> CoupledTrajectory:
    """One coupled tree with N = 2^m steps; oracle draws come first on ``rng``."""
    N = 2**m
    leaves = simulate_leaves(d, N, n_sub, [rng])
    noise = draw_noise([rng], N, d2_of(d))
    out = couple_batch(leaves, subcoupler, guards, noise, cumulants)
    return CoupledTrajectory(out.A[0], out.B[0], out.W[0], out.partial_sums[0], out.coupled[0], out.guard_fired[0])


def write_trajectory_csv(traj: CoupledTrajectory, path) -> None:
    """Rows ``r, S_r components, node, coupled, guard_fired``.

    ``node`` is a heap index (0 is the root split), so the flag columns
    describe the tree nodes rather than the step r on the same row.
    """
    d2 = traj.partial_sums.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r"] + [f"S{i + 1}" for i in range(d2)] + ["node", "coupled", "guard_fired"])
        for i in range(traj.partial_sums.shape[0]):
            w.writerow(
                [i + 1]
                + [repr(float(x)) for x in traj.partial_sums[i]]
                + [i, int(traj.coupled[i]), int(traj.guard_fired[i])]
            )


# --- error metric ------------------------------------------------------------


def _as_deviation(batch) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        return batch
    if isinstance(batch, CoupledBatch):
        return batch.deviation()
    return np.array([np.abs(t.partial_sums).max(axis=1) for t in batch])


def max_of_lp(dev: np.ndarray, p: float) -> float:
    """``max_r (E |S_r|^p)^{1/p}``."""
    return float(np.max(np.mean(dev**p, axis=0) ** (1.0 / p)))


def lp_of_max(dev: np.ndarray, p: float) -> float:
    """``(E max_r |S_r|^p)^{1/p}``."""
    return float(np.mean(dev.max(axis=1) ** p) ** (1.0 / p))


METRICS = {"max_of_lp": max_of_lp, "lp_of_max": lp_of_max}


def coupling_error(
    batch, p: float = 2.0, metric: str = "max_of_lp", n_boot: int = 200, seed: int = 0
) -> tuple[float, float]:
    """Coupling error of a batch of trajectories with a bootstrap stderr.

    ``batch`` is a (T, N) array of sup-norm partial-sum deviations, a
    :class:`CoupledBatch` or a list of :class:`CoupledTrajectory`.
    """
    dev = _as_deviation(batch)
    fn = METRICS[metric]
    est = fn(dev, p)
    T = dev.shape[0]
    if T < 2:
        return est, float("nan")
    rng = np.random.default_rng(seed)
    boots = [fn(dev[rng.integers(0, T, T)], p) for _ in range(n_boot)]
    return est, float(np.std(boots, ddof=1))


# --- many-tree driver ---------------------------------------------------------


@dataclass
class ChunkResult:
    dev: np.ndarray
    Z_white: np.ndarray
    Y_white: np.ndarray
    coupled_frac: float
    fired_frac: float
    nodes: int


@dataclass
class TreeJob:
    d: int
    N: int
    n_sub: int
    seed: int
    trees: tuple[int, ...]
    couplers: tuple[Subcoupler, ...]
    guards: GuardConfig
    cumulants: CumulantExpansion | None = None
    keep_leaves: bool = False


def run_chunk(job: TreeJob) -> list[ChunkResult]:
    """Simulate the oracle once and couple it with every sub-coupler."""
    rngs = [tree_rngs(job.seed, job.N, t) for t in job.trees]
    leaves = simulate_leaves(job.d, job.N, job.n_sub, [r[0] for r in rngs])
    noise = draw_noise([r[1] for r in rngs], job.N, d2_of(job.d))
    out = []
    empty = np.zeros((0,))
    for sc in job.couplers:
        res = couple_batch(leaves, sc, job.guards, noise, job.cumulants)
        out.append(
            ChunkResult(
                dev=res.deviation(),
                Z_white=res.Z_white if job.keep_leaves else empty,
                Y_white=res.Y_white if job.keep_leaves else empty,
                coupled_frac=float(res.coupled.mean()),
                fired_frac=float(res.guard_fired.mean()),
                nodes=res.coupled.size,
            )
        )
    return out


@dataclass
class ManyTrees:
    dev: list[np.ndarray] = field(default_factory=list)
    Z_white: list[np.ndarray] = field(default_factory=list)
    Y_white: list[np.ndarray] = field(default_factory=list)
    coupled_frac: list[float] = field(default_factory=list)
    fired_frac: list[float] = field(default_factory=list)


def run_trees(
    d: int,
    N: int,
    trees: int,
    seed: int,
    couplers,
    guards: GuardConfig,
    n_sub: int = 1024,
    cumulants: CumulantExpansion | None = None,
    chunk: int = 50,
    workers: int = 1,
    keep_leaves: bool = False,
) -> list[ManyTrees]:
    """Couple ``trees`` independent trees; one :class:`ManyTrees` per coupler.

    Chunks have a fixed size and are reduced in order, so the output does not
    depend on ``workers``.
    """
    couplers = tuple(couplers)
    jobs = [
        TreeJob(d, N, n_sub, seed, tuple(range(s, min(trees, s + chunk))), couplers, guards, cumulants, keep_leaves)
        for s in range(0, trees, chunk)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_chunk, jobs))
    else:
        results = [run_chunk(j) for j in jobs]
    out = [ManyTrees() for _ in couplers]
    for res in results:
        for acc, r in zip(out, res):
            acc.dev.append(r.dev)
            if keep_leaves:
                acc.Z_white.append(r.Z_white)
                acc.Y_white.append(r.Y_white)
            acc.coupled_frac.append(r.coupled_frac)
            acc.fired_frac.append(r.fired_frac)
    return out
