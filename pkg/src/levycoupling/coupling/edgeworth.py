"""Batched Edgeworth transport for the conditional residual at a tree node.

At a node the whitened residual ``u`` has density ``phi(u) (1 + S(u) + ...)``
where S is built from the children's fourth (and sixth) cumulants.  S is
projected onto the Hermite basis by Gauss-Hermite quadrature, which is exact
for these degrees.  The gradient field ``p`` with ``-L p = S`` is then
``sum_beta c_beta / |beta| grad He_beta`` and the transported value is
``rho^{-1}(u)`` with ``rho(v) = v + p(v)``, found by Newton's method.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..polyalg import multi_indices


@dataclass
class CorrectionTerm:
    """Child density factor evaluated at ``y = a + Bm v``.

    ``K4`` (and optionally ``K6``) are the child's cumulant tensors and
    ``Sigma`` its covariance; leading axis indexes the batch.
    """

    K4: np.ndarray
    Sigma: np.ndarray
    a: np.ndarray
    Bm: np.ndarray
    K6: np.ndarray | None = None


def hermite_table(v: np.ndarray, max_degree: int) -> np.ndarray:
    """``He_n(v)`` for n = 0..max_degree, stacked on a new last axis."""
    out = np.empty(v.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = v
    for n in range(1, max_degree):
        out[..., n + 1] = v * out[..., n] - n * out[..., n - 1]
    return out


@lru_cache(maxsize=None)
def _basis(dim: int, max_degree: int) -> tuple[tuple[int, ...], ...]:
    return tuple(multi_indices(dim, max_degree, min_degree=1))


@lru_cache(maxsize=None)
def _quadrature(dim: int, npts: int, max_degree: int):
    """Tensor Gauss-Hermite nodes (P, dim) and the projection matrix (P, nbasis)."""
    x, w = hermegauss(npts)
    w = w / w.sum()
    nodes = np.array(list(itertools.product(x, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    table = hermite_table(nodes, max_degree)
    basis = _basis(dim, max_degree)
    proj = np.empty((nodes.shape[0], len(basis) + 1))
    proj[:, 0] = weights
    for j, beta in enumerate(basis, start=1):
        he = np.prod([table[:, i, b] for i, b in enumerate(beta)], axis=0)
        proj[:, j] = weights * he / math.prod(math.factorial(b) for b in beta)
    return nodes, proj


def _sym_inv(S: np.ndarray) -> np.ndarray:
    if S.shape[-1] == 1:
        return 1.0 / S
    return np.linalg.inv(S)


def _hermite_factor(term: CorrectionTerm, y: np.ndarray, kappa: int) -> tuple[np.ndarray, np.ndarray | None]:
    """First and second order Edgeworth factors of one child at points y.

    ``y`` has shape (B, P, d2).  First order is ``h4/24`` with
    ``h4 = K4(w,w,w,w) - 6 K4(w,w,Si) + 3 K4(Si,Si)``, ``w = Si y``,
    ``Si = Sigma^{-1}``.  Second order (scalar case only) adds
    ``gamma6 He6/720 + gamma4^2 He8/1152``.
    """
    d2 = y.shape[-1]
    if d2 == 1:
        s = term.Sigma[:, 0, 0]
        v = y[..., 0] / np.sqrt(s)[:, None]
        g4 = (term.K4.reshape(-1) / s**2)[:, None]
        he = hermite_table(v, 8 if kappa >= 6 else 4)
        first = g4 * he[..., 4] / 24.0
        if kappa < 6:
            return first, None
        g6 = (term.K6.reshape(-1) / s**3)[:, None]
        second = g6 * he[..., 6] / 720.0 + g4**2 * he[..., 8] / 1152.0
        return first, second
    if kappa >= 6:
        raise NotImplementedError("sixth-order Edgeworth transport is implemented for d2 = 1 only")
    Si = _sym_inv(term.Sigma)
    w = np.einsum("bij,bpj->bpi", Si, y)
    T2 = np.einsum("bijkl,bkl->bij", term.K4, Si)
    T0 = np.einsum("bij,bij->b", T2, Si)
    q4 = np.einsum("bijkl,bpi,bpj,bpk,bpl->bp", term.K4, w, w, w, w, optimize=True)
    q2 = np.einsum("bij,bpi,bpj->bp", T2, w, w)
    return (q4 - 6.0 * q2 + 3.0 * T0[:, None]) / 24.0, None


@dataclass
class TransportField:
    """Gradient field ``p = sum_beta a_beta grad He_beta`` per batch row."""

    basis: tuple[tuple[int, ...], ...]
    coef: np.ndarray  # (B, nbasis), a_beta = c_beta / |beta|
    max_degree: int

    def _parts(self, v: np.ndarray):
        tab = hermite_table(v, self.max_degree)  # (B, d2, deg+1)
        B, d2 = v.shape
        p = np.zeros((B, d2))
        Dp = np.zeros((B, d2, d2))
        for j, beta in enumerate(self.basis):
            a = self.coef[:, j]
            if not np.any(a):
                continue
            vals = [tab[:, i, b] for i, b in enumerate(beta)]
            d1v = [b * tab[:, i, b - 1] if b >= 1 else np.zeros(B) for i, b in enumerate(beta)]
            d2v = [b * (b - 1) * tab[:, i, b - 2] if b >= 2 else np.zeros(B) for i, b in enumerate(beta)]
            for i in range(d2):
                if beta[i] == 0:
                    continue
                gi = a * d1v[i]
                for k in range(d2):
                    if k != i:
                        gi = gi * vals[k]
                p[:, i] += gi
                for k in range(d2):
                    if k == i:
                        h = a * d2v[i]
                        for q in range(d2):
                            if q != i:
                                h = h * vals[q]
                    else:
                        if beta[k] == 0:
                            continue
                        h = a * d1v[i] * d1v[k]
                        for q in range(d2):
                            if q not in (i, k):
                                h = h * vals[q]
                    Dp[:, i, k] += h
        return p, Dp

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self._parts(v)[0]

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        return self._parts(v)[1]

    def invert(self, u: np.ndarray, tol: float = 1e-10, max_iter: int = 30) -> tuple[np.ndarray, np.ndarray]:
        """Newton solve of ``v + p(v) = u`` seeded at u; returns (v, converged)."""
        v = u.copy()
        eye = np.eye(u.shape[1])
        with np.errstate(all="ignore"):
            for _ in range(max_iter):
                p, Dp = self._parts(v)
                r = v + p - u
                if np.all(np.abs(r) <= tol):
                    break
                if u.shape[1] == 1:
                    v = v - r / (1.0 + Dp[:, 0])
                else:
                    v = v - np.linalg.solve(eye + Dp, r[..., None])[..., 0]
            p, Dp = self._parts(v)
            r = np.abs(v + p - u).max(axis=1)
            det = np.linalg.det(eye + Dp)
        ok = np.isfinite(r) & (r <= tol) & (det > 0)
        v = np.where(ok[:, None], v, u)
        return v, ok


def _project(vals: np.ndarray, proj: np.ndarray) -> np.ndarray:
    """Hermite coefficients (c_0, c_beta...) of samples on quadrature nodes."""
    return vals @ proj


def _second_order_n2(field: TransportField, S1c: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Order-2 density term generated by the order-1 field, scalar case.

    ``N2 = S1^2/2 + p p'' + p'^2/2 - y p p' - p^2/2`` evaluated on nodes.
    """
    y = nodes[:, 0][None, :]
    deg = field.max_degree
    tab = hermite_table(y, deg + 1)
    a = field.coef  # a_k for He_k, k = 1..deg; p = sum a_k k He_{k-1}
    p = np.zeros((a.shape[0], y.shape[1]))
    dp = np.zeros_like(p)
    ddp = np.zeros_like(p)
    for j, (k,) in enumerate(field.basis):
        ak = a[:, j : j + 1]
        p += ak * k * tab[..., k - 1]
        if k >= 2:
            dp += ak * k * (k - 1) * tab[..., k - 2]
        if k >= 3:
            ddp += ak * k * (k - 1) * (k - 2) * tab[..., k - 3]
    s1 = np.zeros_like(p)
    for j, (k,) in enumerate(field.basis):
        s1 += S1c[:, j : j + 1] * tab[..., k]
    return 0.5 * s1**2 + p * ddp + 0.5 * dp**2 - y * p * dp - 0.5 * p**2


def edgeworth_transport(
    u: np.ndarray,
    terms: list[CorrectionTerm],
    kappa: int = 4,
    tol: float = 1e-10,
    max_iter: int = 30,
) -> tuple[np.ndarray, np.ndarray, TransportField]:
    """Transport whitened residuals ``u`` (B, d2) towards N(0, I).

    Returns ``(v, converged, field)``.
    """
    B, d2 = u.shape
    if kappa >= 6 and d2 != 1:
        raise NotImplementedError("sixth-order Edgeworth transport is implemented for d2 = 1 only")
    deg = 8 if kappa >= 6 else 4
    npts = deg + 1
    nodes, proj = _quadrature(d2, npts, deg)
    basis = _basis(d2, deg)
    T1 = np.zeros((B, nodes.shape[0]))
    T2 = np.zeros_like(T1) if kappa >= 6 else None
    firsts = []
    for term in terms:
        y = term.a[:, None, :] + np.einsum("bij,pj->bpi", term.Bm, nodes)
        f1, f2 = _hermite_factor(term, y, kappa)
        T1 += f1
        firsts.append(f1)
        if T2 is not None:
            T2 += f2
    if T2 is not None:
        for i in range(len(firsts)):
            for j in range(i + 1, len(firsts)):
                T2 += firsts[i] * firsts[j]
    c1 = _project(T1, proj)
    S1 = c1[:, 1:]  # centring drops c_0
    order = np.array([sum(b) for b in basis], dtype=float)
    coef = S1 / order
    if T2 is not None:
        field1 = TransportField(basis[:4], coef[:, :4], 4)
        c2 = _project(T2, proj)
        S2 = c2[:, 1:] - c1[:, :1] * S1
        n2 = _project(_second_order_n2(field1, S1[:, :4], nodes), proj)[:, 1:]
        coef = coef + (S2 - n2) / order
    field = TransportField(basis, coef, deg)
    v, ok = field.invert(u, tol=tol, max_iter=max_iter)
    return v, ok, field
