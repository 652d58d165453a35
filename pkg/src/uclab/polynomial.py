"""Sparse multivariate polynomials with exact (Fraction) or float coefficients.

Used to hold harmonic polynomials, differentiate them symbolically and
evaluate whole derivative banks on point batches through one shared
monomial matrix.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

Exponent = tuple[int, ...]


class Poly:
    """Polynomial stored as ``{exponent tuple: coefficient}``.

    Coefficients may be ints, Fractions or floats; arithmetic keeps whatever
    type the operands produce, so integer inputs stay exact.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[Exponent, object] | None = None):
        self.dim = dim
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(int(k) for k in e)
            if len(e) != dim:
                raise ValueError(f"exponent {e} does not match dimension {dim}")
            if c != 0:
                clean[e] = clean.get(e, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, dim: int, c) -> "Poly":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def variable(cls, dim: int, i: int) -> "Poly":
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): 1})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(self.dim, out)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[Exponent, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(self.dim, out)

    def __pow__(self, k: int) -> "Poly":
        out = Poly.constant(self.dim, 1)
        for _ in range(k):
            out = out * self
        return out

    def scale(self, c) -> "Poly":
        return Poly(self.dim, {e: v * c for e, v in self.terms.items()})

    def diff(self, i: int) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            e2 = list(e)
            e2[i] -= 1
            out[tuple(e2)] = c * e[i]
        return Poly(self.dim, out)

    def laplacian(self) -> "Poly":
        out = Poly(self.dim)
        for i in range(self.dim):
            out = out + self.diff(i).diff(i)
        return out

    def exact(self) -> "Poly":
        """Copy with every coefficient converted to an exact Fraction."""
        return Poly(self.dim, {e: Fraction(c) for e, c in self.terms.items()})

    def to_float(self) -> "Poly":
        return Poly(self.dim, {e: float(c) for e, c in self.terms.items()})

    def __call__(self, x) -> float:
        x = [float(v) for v in x]
        return float(sum(float(c) * math.prod(xi**k for xi, k in zip(x, e))
                         for e, c in self.terms.items()))

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.dim == other.dim and self.terms == other.terms

    def __repr__(self) -> str:
        return f"Poly(dim={self.dim}, terms={self.terms!r})"

    def compose_affine(self, matrix: np.ndarray, shift: np.ndarray) -> "Poly":
        """Return ``y -> p(matrix @ y + shift)``."""
        matrix = np.asarray(matrix, dtype=float)
        shift = np.asarray(shift, dtype=float)
        images = []
        for i in range(self.dim):
            terms = {(0,) * self.dim: float(shift[i])}
            for j in range(self.dim):
                e = [0] * self.dim
                e[j] = 1
                terms[tuple(e)] = float(matrix[i, j])
            images.append(Poly(self.dim, terms))
        cache: dict[tuple[int, int], Poly] = {}

        def power(i: int, k: int) -> Poly:
            if (i, k) not in cache:
                cache[(i, k)] = Poly.constant(self.dim, 1.0) if k == 0 else power(i, k - 1) * images[i]
            return cache[(i, k)]

        out = Poly(self.dim)
        for e, c in self.terms.items():
            term = Poly.constant(self.dim, float(c))
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out


def monomials_up_to(dim: int, degree: int) -> list[Exponent]:
    """All exponent tuples of total degree <= degree, graded-lexicographic."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), d):
            e = [0] * dim
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


class PolyBank:
    """A fixed list of polynomials evaluated together.

    All members share one monomial basis, so evaluating the whole bank on a
    batch costs one monomial matrix plus one matrix product.
    """

    def __init__(self, polys: Iterable[Poly], dim: int):
        polys = list(polys)
        self.dim = dim
        degree = max((p.degree for p in polys), default=0)
        self.basis = monomials_up_to(dim, degree)
        index = {e: i for i, e in enumerate(self.basis)}
        self.exps = np.array(self.basis, dtype=np.int64).reshape(-1, dim)
        self.max_degree = degree
        self.coef = np.zeros((len(self.basis), len(polys)))
        for j, p in enumerate(polys):
            for e, c in p.terms.items():
                self.coef[index[e], j] = float(c)
        used = np.abs(self.coef).sum(axis=1) > 0
        if used.any():
            # only monomials that carry a coefficient are ever formed
            self.exps = self.exps[used]
            self.coef = self.coef[used]
            self.basis = [e for e, k in zip(self.basis, used) if k]
        self.abs_coef = np.abs(self.coef)

    def monomials(self, x: np.ndarray) -> np.ndarray:
        """Monomial matrix of shape (points, basis); a transposed view of a row gather."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        out = None
        for i in range(self.dim):
            powers = np.empty((self.max_degree + 1, x.shape[0]))
            powers[0] = 1.0
            for k in range(1, self.max_degree + 1):
                np.multiply(powers[k - 1], x[:, i], out=powers[k])
            rows = powers[self.exps[:, i]]
            if out is None:
                out = rows
            else:
                out *= rows
        if out is None:
            out = np.ones((len(self.basis), x.shape[0]))
        return out.T

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.monomials(x) @ self.coef

    def abs_bound(self, absmax: np.ndarray) -> np.ndarray:
        """Bound |p| for every member over boxes with coordinate-wise |x| <= absmax."""
        return self.monomials(absmax) @ self.abs_coef


def sphere_monomial_average(alpha: Exponent) -> Fraction:
    """Exact average of ``x**alpha`` over the unit sphere in R^n."""
    if any(a % 2 for a in alpha):
        return Fraction(0)
    n = len(alpha)
    num = 1
    for a in alpha:
        num *= _double_factorial(a - 1)
    den = 1
    for j in range(sum(alpha) // 2):
        den *= n + 2 * j
    return Fraction(num, den)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1}."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n: int) -> float:
    return sphere_area(n) / n


def sphere_average(p: Poly) -> Fraction | float:
    """Exact average of p over the unit sphere (exact if p's coefficients are)."""
    total = 0
    for e, c in p.terms.items():
        avg = sphere_monomial_average(e)
        if avg:
            total += c * avg
    return total


@lru_cache(maxsize=None)
def _double_factorial(k: int) -> int:
    if k <= 0:
        return 1
    return k * _double_factorial(k - 2)


def ball_average(p: Poly) -> Fraction | float:
    """Exact average of p over the unit ball.

    Integrating x**alpha radially gives n * avg_S(x**alpha) / (|alpha| + n).
    """
    n = p.dim
    total = 0
    for e, c in p.terms.items():
        avg = sphere_monomial_average(e)
        if avg:
            total += c * avg * Fraction(n, sum(e) + n)
    return total
