"""Per-node rules producing the whitened Z-residual from the Y-residual.

Every sub-coupler maps a batch of nodes to ``(v, ok)``: ``v`` is the whitened
Z-residual and ``ok`` marks rows where the rule succeeded.  The walk replaces
failed rows by the node's independent Gaussian draw.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .edgeworth import CorrectionTerm, edgeworth_transport


@dataclass
class NodeBatch:
    """Inputs shared by all sub-couplers.

    u: whitened residual of Y_F (or Y_E at the root), shape (B, d2).
    x_white: whitened parent value, used for stratification.
    noise: independent N(0, I) draws assigned to these nodes.
    terms: Edgeworth factors of the children (or of the root).
    """

    u: np.ndarray
    x_white: np.ndarray
    noise: np.ndarray
    terms: list[CorrectionTerm] = field(default_factory=list)


class Subcoupler:
    name = "base"
    needs_cumulants = False

    def couple(self, batch: NodeBatch) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class IndependentSubcoupler(Subcoupler):
    name = "independent"

    def couple(self, batch: NodeBatch):
        return batch.noise.copy(), np.ones(batch.u.shape[0], dtype=bool)


@dataclass
class EdgeworthSubcoupler(Subcoupler):
    kappa: int = 4
    max_residual: float = 8.0
    tol: float = 1e-10
    max_iter: int = 30
    name = "edgeworth"
    needs_cumulants = True

    def couple(self, batch: NodeBatch):
        v, ok, _ = edgeworth_transport(batch.u, batch.terms, self.kappa, self.tol, self.max_iter)
        ok &= np.abs(batch.u).max(axis=1) <= self.max_residual
        return v, ok


@dataclass
class AssignmentSubcoupler(Subcoupler):
    """Optimal sup-norm assignment between residuals and fresh Gaussian draws.

    Nodes are sorted by ``|x_white|`` and cut into consecutive groups of at
    most ``group`` rows; within a group the noise vectors are permuted to
    minimise ``sum |u_i - noise_sigma(i)|_inf^2``.
    """

    group: int = 256
    name = "assignment"

    def couple(self, batch: NodeBatch):
        B = batch.u.shape[0]
        order = np.lexsort((np.arange(B), np.abs(batch.x_white).max(axis=1)))
        v = np.empty_like(batch.noise)
        for start in range(0, B, self.group):
            idx = order[start : start + self.group]
            u, z = batch.u[idx], batch.noise[idx]
            cost = np.abs(u[:, None, :] - z[None, :, :]).max(axis=2) ** 2
            rows, cols = linear_sum_assignment(cost)
            v[idx[rows]] = z[cols]
        return v, np.ones(B, dtype=bool)


def make_subcoupler(kind: str, kappa: int = 4, max_residual: float = 8.0, group: int = 256) -> Subcoupler:
    kind = kind.lower()
    if kind == "independent":
        return IndependentSubcoupler()
    if kind == "edgeworth":
        return EdgeworthSubcoupler(kappa=kappa, max_residual=max_residual)
    if kind == "assignment":
        return AssignmentSubcoupler(group=group)
    raise ValueError(f"unknown sub-coupler {kind!r}")
