"""Sparse multivariate polynomials, the probabilists' Hermite basis and the
Gaussian operator ``L p = div p - x . p``.

Polynomials are immutable maps ``MultiIndex -> coefficient`` with exact zeros
pruned.  Hermite coefficients use the product basis
``He_alpha(x) = prod_i He_{alpha_i}(x_i)``, in which ``L grad`` is diagonal:
``L grad He_alpha = -|alpha| He_alpha``.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


class DimensionMismatch(ValueError):
    pass


class NotCentered(ValueError):
    """Raised when a polynomial expected in P_I has nonzero Gaussian mean."""


def multi_indices(dim: int, max_degree: int, min_degree: int = 0) -> list[MultiIndex]:
    """All multi-indices with ``min_degree <= |alpha| <= max_degree``, graded."""
    out: list[MultiIndex] = []
    for deg in range(min_degree, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), deg):
            alpha = [0] * dim
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


def _add_index(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


class _Sparse:
    __slots__ = ("dim", "_terms")

    def __init__(self, dim: int, terms: Mapping[MultiIndex, float] | None = None):
        self.dim = int(dim)
        clean: dict[MultiIndex, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.dim:
                raise DimensionMismatch(f"index {alpha} in dimension {self.dim}")
            if min(alpha, default=0) < 0:
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self._terms = {a: c for a, c in clean.items() if c != 0.0}

    @property
    def terms(self) -> dict[MultiIndex, float]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[MultiIndex, float]]:
        return iter(self._terms.items())

    def coeff(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(a) for a in self._terms), default=-1)

    def max_abs_diff(self, other: "_Sparse") -> float:
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.coeff(k) - other.coeff(k)) for k in keys), default=0.0)

    def allclose(self, other: "_Sparse", tol: float = 1e-10) -> bool:
        return self.dim == other.dim and self.max_abs_diff(other) <= tol

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.dim == other.dim and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.dim, frozenset(self._terms.items())))


class Poly(_Sparse):
    """Real polynomial on R^dim in the monomial basis."""

    __slots__ = ()

    @classmethod
    def zero(cls, dim: int) -> "Poly":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: float) -> "Poly":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def variable(cls, dim: int, i: int) -> "Poly":
        alpha = [0] * dim
        alpha[i] = 1
        return cls(dim, {tuple(alpha): 1.0})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c: float = 1.0) -> "Poly":
        return cls(len(alpha), {tuple(alpha): c})

    def _check(self, other: "Poly") -> None:
        if self.dim != other.dim:
            raise DimensionMismatch(f"dims {self.dim} and {other.dim}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Poly.constant(self.dim, other)
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0.0) + c
        return Poly(self.dim, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.dim, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Poly.constant(self.dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Poly(self.dim, {a: c * float(other) for a, c in self._terms.items()})
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        out: dict[MultiIndex, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                k = _add_index(a, b)
                out[k] = out.get(k, 0.0) + ca * cb
        return Poly(self.dim, out)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "Poly":
        return self * (1.0 / c)

    def __pow__(self, k: int) -> "Poly":
        out = Poly.constant(self.dim, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __repr__(self) -> str:
        if not self._terms:
            return f"Poly(dim={self.dim}, 0)"
        parts = [f"{c:+.6g}*x^{a}" for a, c in sorted(self._terms.items(), key=lambda t: (sum(t[0]), t[0]))]
        return f"Poly(dim={self.dim}, {' '.join(parts)})"

    def __call__(self, x) -> float | np.ndarray:
        return poly_eval(self, x)

    def diff(self, i: int) -> "Poly":
        out: dict[MultiIndex, float] = {}
        for a, c in self._terms.items():
            if a[i] > 0:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = out.get(tuple(b), 0.0) + c * a[i]
        return Poly(self.dim, out)

    def grad(self) -> "VecPoly":
        return VecPoly([self.diff(i) for i in range(self.dim)])

    def constant_term(self) -> float:
        return self.coeff((0,) * self.dim)

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute ``x_i -> subs[i]``; all substitutes share one dimension."""
        if len(subs) != self.dim:
            raise DimensionMismatch(f"need {self.dim} substitutes, got {len(subs)}")
        if not subs:
            return Poly(0, dict(self._terms))
        new_dim = subs[0].dim
        powers: dict[tuple[int, int], Poly] = {}

        def power(i: int, e: int) -> Poly:
            if (i, e) not in powers:
                powers[(i, e)] = Poly.constant(new_dim, 1.0) if e == 0 else power(i, e - 1) * subs[i]
            return powers[(i, e)]

        out = Poly.zero(new_dim)
        for a, c in self._terms.items():
            term = Poly.constant(new_dim, c)
            for i, e in enumerate(a):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    def affine_substitute(self, A, b=None) -> "Poly":
        """Return ``u -> p(A u + b)`` with ``A`` of shape (dim, new_dim)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != self.dim:
            raise DimensionMismatch(f"A has {A.shape[0]} rows, poly dim {self.dim}")
        new_dim = A.shape[1]
        b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float).reshape(self.dim)
        subs = []
        for i in range(self.dim):
            t = {(0,) * new_dim: b[i]}
            for j in range(new_dim):
                alpha = [0] * new_dim
                alpha[j] = 1
                t[tuple(alpha)] = A[i, j]
            subs.append(Poly(new_dim, t))
        return self.compose(subs)

    def prune(self, tol: float) -> "Poly":
        return Poly(self.dim, {a: c for a, c in self._terms.items() if abs(c) > tol})

    def to_lines(self) -> list[str]:
        """Text dump: one ``e_1 ... e_d coeff`` line per term."""
        return [" ".join(map(str, a)) + f" {c!r}" for a, c in sorted(self._terms.items())]

    @classmethod
    def from_lines(cls, lines: Iterable[str], dim: int) -> "Poly":
        terms: dict[MultiIndex, float] = {}
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise ValueError(f"expected {dim + 1} fields, got {line!r}")
            alpha = tuple(int(f) for f in fields[:dim])
            terms[alpha] = terms.get(alpha, 0.0) + float(fields[-1])
        return cls(dim, terms)


class HermiteCoeffs(_Sparse):
    """Coefficients in the product basis ``He_alpha(x) = prod He_{alpha_i}(x_i)``."""

    __slots__ = ()

    def __add__(self, other: "HermiteCoeffs") -> "HermiteCoeffs":
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0.0) + c
        return HermiteCoeffs(self.dim, out)

    def __mul__(self, s: float) -> "HermiteCoeffs":
        return HermiteCoeffs(self.dim, {a: c * s for a, c in self._terms.items()})

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"HermiteCoeffs(dim={self.dim}, {dict(sorted(self._terms.items()))})"


class VecPoly:
    """R^d-valued polynomial; components share one dimension."""

    __slots__ = ("components", "_jac")

    def __init__(self, components: Sequence[Poly]):
        comps = tuple(components)
        if comps and len({c.dim for c in comps}) != 1:
            raise DimensionMismatch("components must share a dimension")
        self.components = comps
        self._jac: tuple[tuple[Poly, ...], ...] | None = None

    @classmethod
    def zero(cls, dim: int) -> "VecPoly":
        return cls([Poly.zero(dim) for _ in range(dim)])

    @classmethod
    def identity(cls, dim: int) -> "VecPoly":
        return cls([Poly.variable(dim, i) for i in range(dim)])

    @property
    def dim(self) -> int:
        return self.components[0].dim if self.components else 0

    @property
    def degree(self) -> int:
        return max((c.degree for c in self.components), default=-1)

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i: int) -> Poly:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __add__(self, other: "VecPoly") -> "VecPoly":
        return VecPoly([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "VecPoly") -> "VecPoly":
        return VecPoly([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self) -> "VecPoly":
        return VecPoly([-a for a in self.components])

    def __mul__(self, s: float) -> "VecPoly":
        return VecPoly([a * s for a in self.components])

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VecPoly) and self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    def __repr__(self) -> str:
        return f"VecPoly({list(self.components)!r})"

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def max_abs_diff(self, other: "VecPoly") -> float:
        return max((a.max_abs_diff(b) for a, b in zip(self.components, other.components)), default=0.0)

    def allclose(self, other: "VecPoly", tol: float = 1e-10) -> bool:
        return len(self) == len(other) and self.max_abs_diff(other) <= tol

    def divergence(self) -> Poly:
        out = Poly.zero(self.dim)
        for i, c in enumerate(self.components):
            out = out + c.diff(i)
        return out

    def jacobian_polys(self) -> tuple[tuple[Poly, ...], ...]:
        if self._jac is None:
            self._jac = tuple(tuple(c.diff(j) for j in range(self.dim)) for c in self.components)
        return self._jac

    def is_gradient(self, tol: float = 1e-10) -> bool:
        jac = self.jacobian_polys()
        n = len(self.components)
        return all(jac[i][k].allclose(jac[k][i], tol) for i in range(n) for k in range(i + 1, n))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(poly_eval(c, x), x.shape[:-1]) for c in self.components], axis=-1)

    def jacobian(self, x) -> np.ndarray:
        """Evaluate ``D p(x)`` with shape ``x.shape[:-1] + (d, d)``."""
        x = np.asarray(x, dtype=float)
        jac = self.jacobian_polys()
        rows = [
            np.stack([np.broadcast_to(poly_eval(jac[i][j], x), x.shape[:-1]) for j in range(self.dim)], axis=-1)
            for i in range(len(self.components))
        ]
        return np.stack(rows, axis=-2)

    def compose(self, subs: Sequence[Poly]) -> "VecPoly":
        return VecPoly([c.compose(subs) for c in self.components])


def poly_eval(p: Poly, x) -> float | np.ndarray:
    """Evaluate ``p`` at ``x`` of shape (dim,) or (..., dim)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != p.dim:
        raise DimensionMismatch(f"point of dimension {x.shape[-1]} for poly of dimension {p.dim}")
    out = np.zeros(x.shape[:-1])
    if p.is_zero():
        return float(out) if out.ndim == 0 else out
    maxdeg = [max((a[i] for a, _ in p.items()), default=0) for i in range(p.dim)]
    pows = []
    for i in range(p.dim):
        col = [np.ones(x.shape[:-1])]
        for _ in range(maxdeg[i]):
            col.append(col[-1] * x[..., i])
        pows.append(col)
    for a, c in p.items():
        term = c
        for i, e in enumerate(a):
            if e:
                term = term * pows[i][e]
        out = out + term
    return float(out) if out.ndim == 0 else out


# --- 1D Hermite tables -----------------------------------------------------


@lru_cache(maxsize=None)
def hermite_1d_monomial(n: int) -> tuple[float, ...]:
    """Monomial coefficients of He_n, lowest power first."""
    c = [0.0] * (n + 1)
    for m in range(n // 2 + 1):
        c[n - 2 * m] = (-1) ** m * math.factorial(n) / (math.factorial(m) * math.factorial(n - 2 * m) * 2**m)
    return tuple(c)


@lru_cache(maxsize=None)
def monomial_1d_hermite(k: int) -> tuple[float, ...]:
    """Coefficients of x^k in He_0..He_k: k!/(j! ((k-j)/2)! 2^((k-j)/2))."""
    c = [0.0] * (k + 1)
    for j in range(k % 2, k + 1, 2):
        h = (k - j) // 2
        c[j] = math.factorial(k) / (math.factorial(j) * math.factorial(h) * 2**h)
    return tuple(c)


def _tensor_transform(src: _Sparse, table, cls):
    out: dict[MultiIndex, float] = {}
    for a, c in src.items():
        per_axis = [[(j, v) for j, v in enumerate(table(e)) if v != 0.0] for e in a]
        for combo in itertools.product(*per_axis):
            idx = tuple(j for j, _ in combo)
            val = c
            for _, v in combo:
                val *= v
            out[idx] = out.get(idx, 0.0) + val
    return cls(src.dim, out)


def hermite_to_monomial(h: HermiteCoeffs) -> Poly:
    return _tensor_transform(h, hermite_1d_monomial, Poly)


def monomial_to_hermite(p: Poly) -> HermiteCoeffs:
    return _tensor_transform(p, monomial_1d_hermite, HermiteCoeffs)


def hermite_poly(alpha: Sequence[int]) -> Poly:
    """The monomial expansion of He_alpha."""
    return hermite_to_monomial(HermiteCoeffs(len(alpha), {tuple(alpha): 1.0}))


def _double_factorial_odd(k: int) -> int:
    """(k-1)!! for even k >= 0, i.e. E Z^k."""
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def gaussian_expectation(p: Poly) -> float:
    """Exact ``E p(Z)`` for Z ~ N(0, I) by Isserlis moments."""
    total = 0.0
    for a, c in p.items():
        if any(e % 2 for e in a):
            continue
        m = 1
        for e in a:
            m *= _double_factorial_odd(e)
        total += c * m
    return total


def lsigma_apply(p: VecPoly) -> Poly:
    """``L p(x) = div p(x) - x . p(x)`` for the standard Gaussian."""
    if len(p) != p.dim:
        raise DimensionMismatch("L needs an R^d-valued polynomial on R^d")
    out = p.divergence()
    for i, c in enumerate(p.components):
        out = out - Poly.variable(p.dim, i) * c
    return out


def lsigma_invert(g: Poly, tol: float = 1e-9) -> tuple[Poly, VecPoly]:
    """Solve ``L grad u = g`` for centred ``g``; ``u`` has zero constant term."""
    mean = gaussian_expectation(g)
    if abs(mean) > tol:
        raise NotCentered(f"Gaussian mean {mean:.3e} exceeds {tol:.1e}")
    h = monomial_to_hermite(g)
    u_h = HermiteCoeffs(g.dim, {a: -c / sum(a) for a, c in h.items() if sum(a) > 0})
    u = hermite_to_monomial(u_h)
    u = u - u.constant_term()
    return u, u.grad()


def center_polynomials(S: Sequence[Poly], eps: float, n0: int) -> tuple[list[Poly], float]:
    """Shift ``S_j`` (indexed from ``n0``) to Gaussian mean zero.

    Returns the centred list and ``beta = sum_j eps**j E S_j``.
    """
    out = []
    beta = 0.0
    for j, s in enumerate(S, start=n0):
        m = gaussian_expectation(s)
        beta += eps**j * m
        out.append(s - m)
    return out, beta
