"""Polynomial perturbations of the standard Gaussian.

``rho_eps(x) = x + sum_j eps^j p_j(x)`` pushes N(0, I) to a law with density
``phi(y) (1 + sum_j eps^j S_j(y)) + O(eps^{n+1})``.  ``smap_forward`` computes
the S_j by formal series inversion in eps; ``smap_inverse`` undoes it order by
order with the inverse of ``L grad``.

Formal series are stored as a :class:`Poly` in ``d + 1`` variables, the last
one carrying the power of eps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polyalg import (
    NotCentered,
    Poly,
    VecPoly,
    gaussian_expectation,
    lsigma_invert,
    multi_indices,
)


class NoConvergence(RuntimeError):
    """Newton iteration for the inverse perturbation map did not converge."""


@dataclass(frozen=True)
class PerturbationSeries:
    eps: float
    p: tuple[VecPoly, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(self.p))
        for j, pj in enumerate(self.p, start=1):
            if len(pj) != self.dim or (len(pj) and pj.dim != self.dim):
                raise ValueError(f"p_{j} is not an R^{self.dim}-valued polynomial on R^{self.dim}")
            if not pj.is_gradient():
                raise ValueError(f"p_{j} is not a gradient field")

    def with_eps(self, eps: float) -> "PerturbationSeries":
        return PerturbationSeries(eps, self.p, self.dim)


@dataclass(frozen=True)
class DensityExpansion:
    S: tuple[Poly, ...]
    eps: float
    n0: int = 1
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "S", tuple(self.S))
        for j, s in enumerate(self.S, start=self.n0):
            m = gaussian_expectation(s)
            if abs(m) > 1e-9:
                raise NotCentered(f"S_{j} has Gaussian mean {m:.3e}")

    def moment(self, m: Poly) -> float:
        """``int m(y) phi(y) (1 + sum eps^j S_j(y)) dy``."""
        total = gaussian_expectation(m)
        for j, s in enumerate(self.S, start=self.n0):
            total += self.eps**j * gaussian_expectation(m * s)
        return total


# --- pointwise maps --------------------------------------------------------


def rho_apply(series: PerturbationSeries, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != series.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != {series.dim}")
    out = x.copy()
    for j, pj in enumerate(series.p, start=1):
        if series.eps != 0.0 and not pj.is_zero():
            out = out + series.eps**j * pj(x)
    return out


def _rho_jacobian(series: PerturbationSeries, x: np.ndarray) -> np.ndarray:
    jac = np.broadcast_to(np.eye(series.dim), x.shape + (series.dim,)).copy()
    for j, pj in enumerate(series.p, start=1):
        if series.eps != 0.0 and not pj.is_zero():
            jac += series.eps**j * pj.jacobian(x)
    return jac


def _newton(series: PerturbationSeries, y: np.ndarray, x: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    for _ in range(max_iter):
        resid = rho_apply(series, x) - y
        if np.all(np.abs(resid) <= tol):
            break
        x = x - np.linalg.solve(_rho_jacobian(series, x), resid[..., None])[..., 0]
        if not np.all(np.isfinite(x)):
            break
    return x


def rho_invert(
    series: PerturbationSeries, y, tol: float = 1e-12, max_iter: int = 50, continuation_steps: int = 16
) -> np.ndarray:
    """Newton solve of ``rho(x) = y`` seeded at ``x = y``.

    A root where ``det D rho <= 0`` lies on a folded sheet; such points are
    retried by continuation in eps from the identity map.  Works on a single
    point or a batch ``(..., d)``; raises :class:`NoConvergence` if any point
    fails.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = np.asarray(y, dtype=float)
    with np.errstate(all="ignore"):
        x = _newton(series, y, y.copy(), tol, max_iter)
        bad = ~np.all(np.abs(rho_apply(series, x) - y) <= tol, axis=-1)
        bad |= ~(np.linalg.det(_rho_jacobian(series, x)) > 0)
        if np.any(bad):
            xc = y.copy()
            for t in np.linspace(0.0, 1.0, continuation_steps + 1)[1:]:
                xc = _newton(series.with_eps(t * series.eps), y, xc, tol, max_iter)
            x = np.where(bad[..., None], xc, x)
        resid = np.abs(rho_apply(series, x) - y)
    if np.all(resid <= tol):
        return x
    raise NoConvergence(f"max residual {np.nanmax(resid):.3e} after {max_iter} iterations")


# --- formal eps-series -----------------------------------------------------


def _lift(p: Poly, order: int) -> Poly:
    """Embed a polynomial in y as the coefficient of eps^order."""
    return Poly(p.dim + 1, {a + (order,): c for a, c in p.items()})


def _extract(P: Poly, order: int) -> Poly:
    return Poly(P.dim - 1, {a[:-1]: c for a, c in P.items() if a[-1] == order})


def _tmul(a: Poly, b: Poly, n: int) -> Poly:
    out: dict[tuple[int, ...], float] = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            if ka[-1] + kb[-1] <= n:
                k = tuple(x + y for x, y in zip(ka, kb))
                out[k] = out.get(k, 0.0) + ca * cb
    return Poly(a.dim, out)


def _tcompose(p: Poly, subs: Sequence[Poly], n: int) -> Poly:
    """``p(subs)`` truncated at eps^n; ``subs`` live in d + 1 variables."""
    D = subs[0].dim
    cache: dict[tuple[int, int], Poly] = {}

    def power(i: int, e: int) -> Poly:
        if (i, e) not in cache:
            cache[(i, e)] = Poly.constant(D, 1.0) if e == 0 else _tmul(power(i, e - 1), subs[i], n)
        return cache[(i, e)]

    out = Poly.zero(D)
    for a, c in p.items():
        term = Poly.constant(D, c)
        for i, e in enumerate(a):
            if e:
                term = _tmul(term, power(i, e), n)
        out = out + term
    return out


def _texp(s: Poly, n: int) -> Poly:
    """exp(s) for a series without an eps^0 part."""
    out = Poly.constant(s.dim, 1.0)
    term = Poly.constant(s.dim, 1.0)
    for k in range(1, n + 1):
        term = _tmul(term, s, n) * (1.0 / k)
        out = out + term
    return out


def _tdet(mat: list[list[Poly]], n: int) -> Poly:
    d = len(mat)
    out = Poly.zero(mat[0][0].dim)
    for perm in itertools.permutations(range(d)):
        sign = 1.0
        for i in range(d):
            for j in range(i + 1, d):
                if perm[i] > perm[j]:
                    sign = -sign
        term = Poly.constant(out.dim, sign)
        for i in range(d):
            term = _tmul(term, mat[i][perm[i]], n)
        out = out + term
    return out


def _inverse_shift(p: Sequence[VecPoly], n: int, dim: int) -> list[Poly]:
    """delta with rho(y + delta) = y as a truncated eps-series, per coordinate."""
    D = dim + 1
    ys = [Poly.variable(D, i) for i in range(dim)]
    delta = [Poly.zero(D) for _ in range(dim)]
    lifted = [[_lift(c, 0) for c in pj] for pj in p]
    for _ in range(n):
        subs = [ys[i] + delta[i] for i in range(dim)]
        new = [Poly.zero(D) for _ in range(dim)]
        for j, pj in enumerate(lifted[:n], start=1):
            epsj = Poly.monomial((0,) * dim + (j,))
            for i in range(dim):
                if pj[i].is_zero():
                    continue
                new[i] = new[i] - _tmul(epsj, _tcompose(pj[i], subs, n - j), n)
        delta = new
    return delta


def smap_forward(p: Sequence[VecPoly], n: int) -> list[Poly]:
    """Density corrections ``S_1..S_n`` of ``rho_eps(Z)``."""
    if not p:
        raise ValueError("need at least one perturbation term to fix the dimension")
    dim = p[0].dim
    p = list(p[:n]) + [VecPoly.zero(dim)] * max(0, n - len(p))
    if n == 0:
        return []
    D = dim + 1
    delta = _inverse_shift(p, n, dim)
    jac = [
        [delta[i].diff(k) + (1.0 if i == k else 0.0) for k in range(dim)] for i in range(dim)
    ]
    det = _tdet(jac, n)
    expo = Poly.zero(D)
    for i in range(dim):
        y = Poly.variable(D, i)
        expo = expo - _tmul(y, delta[i], n) - 0.5 * _tmul(delta[i], delta[i], n)
    ratio = _tmul(det, _texp(expo, n), n)
    return [_extract(ratio, j) for j in range(1, n + 1)]


def smap_inverse(S: Sequence[Poly], n: int, tol: float = 1e-9) -> list[VecPoly]:
    """Gradient fields ``p_1..p_n`` with ``smap_forward(p, n) == S``."""
    if not S:
        return []
    dim = S[0].dim
    S = list(S[:n]) + [Poly.zero(dim)] * max(0, n - len(S))
    for j, s in enumerate(S, start=1):
        m = gaussian_expectation(s)
        if abs(m) > tol:
            raise NotCentered(f"S_{j} has Gaussian mean {m:.3e}")
    p: list[VecPoly] = []
    for j in range(1, n + 1):
        if j == 1:
            nj = Poly.zero(dim)
        else:
            nj = smap_forward(p + [VecPoly.zero(dim)], j)[j - 1]
        target = -(S[j - 1] - nj)
        target = target - gaussian_expectation(target)  # strip round-off
        _, grad_u = lsigma_invert(target, tol=max(tol, 1e-8))
        p.append(grad_u)
    return p


# --- Monte Carlo checks ----------------------------------------------------


@dataclass
class ExpansionReport:
    eps: float
    n: int
    monomials: list[tuple[int, ...]]
    discrepancy: np.ndarray
    stderr: np.ndarray
    scale: float
    expansion: DensityExpansion = field(repr=False)

    def worst(self) -> int:
        return int(np.argmax(np.abs(self.discrepancy)))


def _taylor_in_eps(m: Poly, series: PerturbationSeries, n: int) -> Poly:
    """Order-n eps-Taylor polynomial of ``m(rho_eps(z))`` evaluated at eps."""
    dim = series.dim
    D = dim + 1
    subs = []
    for i in range(dim):
        s = Poly.variable(D, i)
        for j, pj in enumerate(series.p, start=1):
            if j <= n:
                s = s + _tmul(Poly.monomial((0,) * dim + (j,)), _lift(pj[i], 0), n)
        subs.append(s)
    T = _tcompose(m, subs, n)
    out = Poly.zero(dim)
    for j in range(n + 1):
        out = out + series.eps**j * _extract(T, j)
    return out


def validate_expansion(series: PerturbationSeries, n: int, M: int, rng, max_degree: int = 4) -> ExpansionReport:
    """Compare sample moments of ``rho_eps(Z)`` with the order-n expansion.

    The order-n Taylor polynomial of ``m(rho_eps(Z))`` in eps is used as a
    control variate; its Gaussian mean is exact, so only the O(eps^{n+1})
    remainder is sampled.
    """
    if M < 10**4:
        raise ValueError("validate_expansion needs M >= 1e4")
    dim = series.dim
    S = smap_forward(list(series.p), n) if series.p else []
    expansion = DensityExpansion(tuple(S), series.eps, 1, dim)
    monos = multi_indices(dim, max_degree, min_degree=1)
    Z = rng.standard_normal((M, dim))
    Y = rho_apply(series, Z)
    disc = np.empty(len(monos))
    se = np.empty(len(monos))
    for k, alpha in enumerate(monos):
        m = Poly.monomial(alpha)
        T = _taylor_in_eps(m, series, n)
        resid = m(Y) - T(Z)
        disc[k] = resid.mean() + gaussian_expectation(T) - expansion.moment(m)
        se[k] = resid.std(ddof=1) / math.sqrt(M)
    return ExpansionReport(series.eps, n, monos, disc, se, abs(series.eps) ** (n + 1), expansion)


def trivial_coupling_distance(series: PerturbationSeries, p_norm: float, M: int, rng) -> tuple[float, float]:
    """L^p norm of ``|Z - rho_eps(Z)|_inf``; returns (estimate, stderr)."""
    if p_norm < 1:
        raise ValueError("p_norm must be >= 1")
    Z = rng.standard_normal((M, series.dim))
    dist = np.abs(rho_apply(series, Z) - Z).max(axis=-1) ** p_norm
    mean = dist.mean()
    if mean == 0.0:
        return 0.0, 0.0
    est = mean ** (1.0 / p_norm)
    # delta method for the p-th root
    se = est / (p_norm * mean) * dist.std(ddof=1) / math.sqrt(M)
    return float(est), float(se)
