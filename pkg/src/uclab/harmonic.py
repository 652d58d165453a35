"""Closed-form harmonic functions with exact gradients.

Three kinds are supported:

* ``polynomial``: terms are ``(exponents, coefficient)`` pairs.
* ``spherical_harmonic_sum``: terms are ``(degree, order, amplitude)`` triples
  over real solid harmonics normalised to unit L2 norm on the unit sphere
  (n = 2 or 3).
* ``point_charge_sum``: terms are ``(location, charge)`` pairs; the kernel is
  ``log|x - p|`` for n = 2 and ``|x - p|^(2-n)`` otherwise.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Any, Sequence

import numpy as np

from .polynomial import Poly, PolyBank, sphere_area, sphere_average

KINDS = ("polynomial", "spherical_harmonic_sum", "point_charge_sum")


class DimensionError(ValueError):
    pass


class SingularPointError(ValueError):
    """Evaluation requested at (or a region containing) a point charge."""


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    error_bound: float
    mode: str  # exact | sampled | certified

    def __post_init__(self):
        if self.mode not in ("exact", "sampled", "certified"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "exact" and self.error_bound != 0:
            raise ValueError("exact estimates carry no error")
        if self.value < 0 or self.error_bound < 0:
            raise ValueError("norm estimates are nonnegative")

    @property
    def lower(self) -> float:
        return max(self.value - self.error_bound, 0.0)

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    def as_dict(self) -> dict:
        return {"value": self.value, "error_bound": self.error_bound, "mode": self.mode}


@dataclass(frozen=True, eq=False)
class HarmonicFunction:
    kind: str
    dimension: int
    terms: tuple
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.dimension < 2:
            raise DimensionError("dimension must be at least 2")
        object.__setattr__(self, "terms", _normalise_terms(self.kind, self.dimension, self.terms))

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_poly(cls, p: Poly) -> "HarmonicFunction":
        return cls("polynomial", p.dim, tuple((e, c) for e, c in sorted(p.terms.items())))

    @classmethod
    def linear(cls, dim: int, axis: int = 0) -> "HarmonicFunction":
        return cls.from_poly(Poly.variable(dim, axis))

    # -- structure --------------------------------------------------------------

    @cached_property
    def poly(self) -> Poly | None:
        """Float polynomial for the polynomial kinds, None for charge sums."""
        if self.kind == "polynomial":
            return Poly(self.dimension, dict(self.terms)).to_float() + Poly.constant(self.dimension, self.offset)
        if self.kind == "spherical_harmonic_sum":
            out = Poly.constant(self.dimension, self.offset)
            for d, m, amp in self.terms:
                basis, norm = solid_harmonic(self.dimension, d, m)
                out = out + basis.to_float().scale(amp * norm)
            return out
        return None

    def exact_poly(self) -> Poly | None:
        """Polynomial with exact coefficients, for symbolic checks."""
        if self.kind == "polynomial":
            return Poly(self.dimension, dict(self.terms)).exact()
        return None

    def is_exactly_harmonic(self) -> bool:
        """Symbolic Laplacian check.

        Polynomials are checked on their exact (rational) coefficients.
        Spherical-harmonic sums are harmonic iff every exact basis member is.
        Charge sums are harmonic by construction away from the charges.
        """
        if self.kind == "polynomial":
            return self.exact_poly().laplacian().is_zero()
        if self.kind == "spherical_harmonic_sum":
            return all(solid_harmonic(self.dimension, d, m)[0].laplacian().is_zero()
                       for d, m, _ in self.terms)
        return True

    @property
    def charges(self) -> np.ndarray:
        if self.kind != "point_charge_sum":
            return np.zeros((0, self.dimension))
        return np.array([loc for loc, _ in self.terms], dtype=float).reshape(-1, self.dimension)

    @property
    def charge_values(self) -> np.ndarray:
        return np.array([q for _, q in self.terms], dtype=float)

    def harmonic_on_ball(self, center, radius: float, margin: float = 0.0) -> bool:
        """True if every charge lies strictly outside the closed ball."""
        if self.kind != "point_charge_sum":
            return True
        d = np.linalg.norm(self.charges - np.asarray(center, dtype=float), axis=1)
        return bool(np.all(d > radius + margin))

    def harmonic_on_box(self, lo, hi) -> bool:
        if self.kind != "point_charge_sum":
            return True
        return bool(np.all(_box_distance(self.charges[None], np.asarray(lo)[None], np.asarray(hi)[None]) > 0))

    # -- evaluation -------------------------------------------------------------

    @cached_property
    def _banks(self):
        p = self.poly
        n = self.dimension
        derivs = {(): p}
        for k in range(1, 5):
            for idx in _unique_indices(n, k):
                derivs[idx] = derivs[idx[:-1]].diff(idx[-1])
        jet_keys = [()] + [i for k in (1, 2, 3) for i in _unique_indices(n, k)]
        bound_keys = [i for k in (1, 2, 3, 4) for i in _unique_indices(n, k)]
        return (PolyBank([derivs[i] for i in jet_keys], n),
                PolyBank([derivs[i] for i in bound_keys], n))

    @cached_property
    def _gradsq_bank(self):
        """Unique third derivatives of g = |grad u|^2 as explicit polynomials."""
        p = self.poly
        n = self.dimension
        g = Poly(n)
        for i in range(n):
            di = p.diff(i)
            g = g + di * di
        derivs = {(): g}
        for k in (1, 2, 3):
            for idx in _unique_indices(n, k):
                derivs[idx] = derivs[idx[:-1]].diff(idx[-1])
        return PolyBank([derivs[i] for i in _unique_indices(n, 3)], n)

    def gradsq_third_bound(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray | None:
        """Term-wise bound on ||D^3 |grad u|^2||_F over boxes (polynomial kinds only)."""
        if self.poly is None:
            return None
        absmax = np.maximum(np.abs(np.atleast_2d(lo)), np.abs(np.atleast_2d(hi)))
        b = self._gradsq_bank.abs_bound(absmax)
        return np.sqrt(b**2 @ _multiplicities(self.dimension, 3))

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x = x.reshape(-1, x.shape[-1]) if x.ndim else x.reshape(1, 1)
        if x.shape[1] != self.dimension:
            raise DimensionError(f"expected points in R^{self.dimension}, got R^{x.shape[1]}")
        if self.kind == "point_charge_sum":
            d = np.linalg.norm(x[:, None, :] - self.charges[None], axis=2)
            if np.any(d == 0):
                raise SingularPointError("evaluation at a point charge")
        return x

    def jet(self, x, order: int = 2) -> tuple[np.ndarray, ...]:
        """Value (m,), gradient (m,n), Hessian (m,n,n) and, for order 3, D^3u (m,n,n,n)."""
        x = self._points(x)
        n = self.dimension
        if self.kind != "point_charge_sum":
            out = self._banks[0](x)
            tensors = [out[:, 0]]
            col = 1
            for k in range(1, order + 1):
                keys = _unique_indices(n, k)
                tensors.append(_expand_symmetric(out[:, col:col + len(keys)], n, k))
                col += len(keys)
            return tuple(tensors)
        vals = np.full(x.shape[0], float(self.offset))
        grad = np.zeros_like(x)
        hess = np.zeros((x.shape[0], n, n))
        third = np.zeros((x.shape[0], n, n, n)) if order >= 3 else None
        eye = np.eye(n)
        for p, q in zip(self.charges, self.charge_values):
            d = x - p
            r2 = np.einsum("ij,ij->i", d, d)
            outer = d[:, :, None] * d[:, None, :]
            if n == 2:
                vals += q * 0.5 * np.log(r2)
                grad += q * d / r2[:, None]
                hess += q * (eye / r2[:, None, None] - 2 * outer / (r2**2)[:, None, None])
                if third is not None:
                    # d_k [delta_ij / r2 - 2 d_i d_j / r4]
                    t = (-2 * (np.einsum("ij,mk->mijk", eye, d) + np.einsum("ik,mj->mijk", eye, d)
                               + np.einsum("jk,mi->mijk", eye, d)) / (r2**2)[:, None, None, None]
                         + 8 * np.einsum("mi,mj,mk->mijk", d, d, d) / (r2**3)[:, None, None, None])
                    third += q * t
            else:
                m = n - 2
                r = np.sqrt(r2)
                vals += q * r ** (-m)
                grad += -m * q * d * (r ** (-m - 2))[:, None]
                hess += -m * q * (eye * (r ** (-m - 2))[:, None, None]
                                  - (m + 2) * outer * (r ** (-m - 4))[:, None, None])
                if third is not None:
                    sym = (np.einsum("ij,mk->mijk", eye, d) + np.einsum("ik,mj->mijk", eye, d)
                           + np.einsum("jk,mi->mijk", eye, d))
                    t = (m + 2) * sym * (r ** (-m - 4))[:, None, None, None] \
                        - (m + 2) * (m + 4) * np.einsum("mi,mj,mk->mijk", d, d, d) * (r ** (-m - 6))[:, None, None, None]
                    third += m * q * t
        if order >= 3:
            return vals, grad, hess, third
        return vals, grad, hess

    def values(self, x) -> np.ndarray:
        return self.jet(x)[0]

    def gradients(self, x) -> np.ndarray:
        return self.jet(x)[1]

    def derivative_bounds(self, lo: np.ndarray, hi: np.ndarray):
        """Upper bounds on ||D^k u|| (symmetric operator norms), k = 1..4, over boxes.

        Polynomials: term-wise |c| * prod max|x_i|^e, combined in Frobenius norm.
        Charges: directional-derivative bounds of the kernel,
        |d^k r^-m| <= (m)_k r^(-m-k) and |d^k log r| <= (k-1)! r^-k, with r the
        distance from the box to the charge.
        """
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        n = self.dimension
        if self.kind != "point_charge_sum":
            absmax = np.maximum(np.abs(lo), np.abs(hi))
            b = self._banks[1].abs_bound(absmax)
            out = []
            col = 0
            for k in (1, 2, 3, 4):
                keys = _unique_indices(n, k)
                mult = _multiplicities(n, k)
                out.append(np.sqrt(b[:, col:col + len(keys)] ** 2 @ mult))
                col += len(keys)
            if self.kind == "spherical_harmonic_sum":
                radius = np.linalg.norm(absmax, axis=1)
                out = [np.minimum(a, b) for a, b in zip(out, self._spectral_bounds(radius))]
            return tuple(out)
        dist = _box_distance(self.charges[None], lo[:, None, :], hi[:, None, :])  # (boxes, charges)
        if np.any(dist <= 0):
            raise SingularPointError("region contains a point charge")
        q = np.abs(self.charge_values)[None]
        out = []
        for k in (1, 2, 3, 4):
            if n == 2:
                c = math.factorial(k - 1)
                out.append(np.sum(q * c * dist ** (-k), axis=1))
            else:
                m = n - 2
                c = math.prod(m + j for j in range(k))
                out.append(np.sum(q * c * dist ** (-m - k), axis=1))
        return tuple(out)

    def _spectral_bounds(self, radius: np.ndarray) -> list[np.ndarray]:
        """Bounds on ||D^k u||_F over B(0, radius) for a spherical-harmonic sum.

        For Y homogeneous harmonic of degree d, each entry of D^k Y is homogeneous
        harmonic of degree d-k, int_S |grad H|^2 = m(2m+n-2) int_S H^2, and the
        reproducing kernel gives sup_S |H|^2 <= dim(H_m)/|S| * int_S H^2.
        Terms of equal degree are orthonormal, so they combine in l2 first.
        """
        n = self.dimension
        by_degree: dict[int, float] = {}
        for d, _, amp in self.terms:
            by_degree[d] = by_degree.get(d, 0.0) + float(amp) ** 2
        area = sphere_area(n)
        out = []
        for k in (1, 2, 3, 4):
            total = np.zeros_like(radius)
            for d, a2 in by_degree.items():
                if d < k:
                    continue
                energy = a2 * math.prod((d - j) * (2 * (d - j) + n - 2) for j in range(k))
                total = total + math.sqrt(_harmonic_dim(n, d - k) / area * energy) * radius ** (d - k)
            out.append(total)
        return out

    # -- transformations --------------------------------------------------------

    def compose_affine(self, matrix, shift) -> "HarmonicFunction":
        """Return ``y -> u(lam * R y + b)`` for ``matrix = lam * R`` (R orthogonal)."""
        matrix = np.asarray(matrix, dtype=float)
        shift = np.asarray(shift, dtype=float)
        n = self.dimension
        if self.kind != "point_charge_sum":
            p = self.poly.compose_affine(matrix, shift)
            return HarmonicFunction.from_poly(p)
        lam = abs(np.linalg.det(matrix)) ** (1.0 / n)
        rot = matrix / lam
        if not np.allclose(rot @ rot.T, np.eye(n), atol=1e-12):
            raise ValueError("charge sums compose only with similarities")
        inv = np.linalg.inv(matrix)
        terms = []
        offset = self.offset
        for p, q in zip(self.charges, self.charge_values):
            newp = inv @ (p - shift)
            if n == 2:
                terms.append((tuple(newp), q))
                offset += q * math.log(lam)
            else:
                terms.append((tuple(newp), q * lam ** (2 - n)))
        return HarmonicFunction("point_charge_sum", n, tuple(terms), offset)

    def scaled(self, factor: float) -> "HarmonicFunction":
        """Return ``factor * u``."""
        if self.kind == "polynomial":
            return HarmonicFunction(self.kind, self.dimension,
                                    tuple((e, c * factor) for e, c in self.terms), self.offset * factor)
        if self.kind == "spherical_harmonic_sum":
            return HarmonicFunction(self.kind, self.dimension,
                                    tuple((d, m, a * factor) for d, m, a in self.terms), self.offset * factor)
        return HarmonicFunction(self.kind, self.dimension,
                                tuple((p, q * factor) for p, q in self.terms), self.offset * factor)

    # -- serialisation ----------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            terms = [{"exponents": list(e), "coefficient": _num(c)} for e, c in self.terms]
        elif self.kind == "spherical_harmonic_sum":
            terms = [{"degree": d, "order": m, "amplitude": _num(a)} for d, m, a in self.terms]
        else:
            terms = [{"location": [_num(v) for v in p], "charge": _num(q)} for p, q in self.terms]
        out = {"kind": self.kind, "dimension": self.dimension, "terms": terms}
        if self.offset:
            out["offset"] = _num(self.offset)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "HarmonicFunction":
        kind = data["kind"]
        dim = int(data["dimension"])
        raw = data["terms"]
        if kind == "polynomial":
            terms = tuple((tuple(int(k) for k in t["exponents"]), _parse(t["coefficient"])) for t in raw)
        elif kind == "spherical_harmonic_sum":
            terms = tuple((int(t["degree"]), int(t["order"]), _parse(t["amplitude"])) for t in raw)
        elif kind == "point_charge_sum":
            terms = tuple((tuple(_parse(v) for v in t["location"]), _parse(t["charge"])) for t in raw)
        else:
            raise ValueError(f"unknown kind {kind!r}")
        return cls(kind, dim, terms, _parse(data.get("offset", 0.0)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "HarmonicFunction":
        return cls.from_dict(json.loads(text))


def evaluate(u: HarmonicFunction, x: Sequence[float]) -> float:
    return float(u.values(np.asarray(x, dtype=float)[None])[0])


def gradient(u: HarmonicFunction, x: Sequence[float]) -> np.ndarray:
    return u.gradients(np.asarray(x, dtype=float)[None])[0]


@lru_cache(maxsize=None)
def solid_harmonic(dim: int, degree: int, order: int) -> tuple[Poly, float]:
    """Exact real solid harmonic of the given degree/order and its L2(S^{n-1}) normaliser.

    n = 2: order >= 0 gives Re (x+iy)^d, order < 0 gives Im (x+iy)^d.
    n = 3: r^l P_l^|m|(z/r) times cos(m phi) (m >= 0) or sin(|m| phi) (m < 0).
    Returns ``(P, c)`` with ``c * P`` of unit L2 norm on the unit sphere.
    """
    if dim == 2:
        if degree < 0 or (degree == 0 and order != 0) or abs(order) not in (0, degree):
            raise ValueError(f"no planar harmonic with degree={degree}, order={order}")
        re, im = _complex_power(degree)
        p = re if order >= 0 else im
    elif dim == 3:
        if degree < 0 or abs(order) > degree:
            raise ValueError(f"no solid harmonic with degree={degree}, order={order}")
        p = _solid_harmonic_3d(degree, order)
    else:
        raise DimensionError("spherical harmonic sums are available for n = 2, 3")
    norm2 = sphere_average(p * p) * Fraction(1)
    norm = 1.0 / math.sqrt(float(norm2) * sphere_area(dim))
    return p, norm


def _harmonic_dim(n: int, m: int) -> int:
    """Dimension of the space of degree-m homogeneous harmonic polynomials on R^n."""
    return math.comb(m + n - 1, n - 1) - (math.comb(m + n - 3, n - 1) if m >= 2 else 0)


def _complex_power(m: int) -> tuple[Poly, Poly]:
    re, im = {}, {}
    for k in range(m + 1):
        c = math.comb(m, k)
        e = (m - k, k, )
        if k % 2 == 0:
            re[e] = c * (-1) ** (k // 2)
        else:
            im[e] = c * (-1) ** ((k - 1) // 2)
    return Poly(2, re), Poly(2, im)


def _solid_harmonic_3d(l: int, order: int) -> Poly:
    m = abs(order)
    # Legendre P_l coefficients: 2^-l sum_k (-1)^k C(l,k) C(2l-2k,l) t^(l-2k)
    legendre = {}
    for k in range(l // 2 + 1):
        legendre[l - 2 * k] = Fraction((-1) ** k * math.comb(l, k) * math.comb(2 * l - 2 * k, l), 2**l)
    deriv = {}
    for j, c in legendre.items():
        if j >= m:
            deriv[j - m] = c * Fraction(math.factorial(j), math.factorial(j - m))
    r2 = Poly(3, {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): 1})
    z = Poly.variable(3, 2)
    radial = Poly(3)
    for j, c in deriv.items():
        radial = radial + (z**j * r2 ** ((l - m - j) // 2)).scale(c)
    re2, im2 = _complex_power(m)
    lift = {(a, b, 0): c for (a, b), c in (re2 if order >= 0 else im2).terms.items()}
    return Poly(3, lift) * radial


@lru_cache(maxsize=None)
def _unique_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations_with_replacement(range(n), k))


@lru_cache(maxsize=None)
def _multiplicities(n: int, k: int) -> np.ndarray:
    out = []
    for idx in _unique_indices(n, k):
        counts = [idx.count(i) for i in range(n)]
        out.append(math.factorial(k) // math.prod(math.factorial(c) for c in counts))
    return np.array(out, dtype=float)


@lru_cache(maxsize=None)
def _symmetric_map(n: int, k: int) -> np.ndarray:
    pos = {idx: j for j, idx in enumerate(_unique_indices(n, k))}
    full = itertools.product(range(n), repeat=k)
    return np.array([pos[tuple(sorted(f))] for f in full])


def _expand_symmetric(cols: np.ndarray, n: int, k: int) -> np.ndarray:
    return cols[:, _symmetric_map(n, k)].reshape((-1,) + (n,) * k)


def _box_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Euclidean distance from points to boxes (broadcasting over leading axes)."""
    gap = np.maximum(lo - points, 0) + np.maximum(points - hi, 0)
    return np.sqrt(np.sum(gap**2, axis=-1))


def _normalise_terms(kind: str, dim: int, terms) -> tuple:
    out = []
    for t in terms:
        if kind == "polynomial":
            e, c = t
            e = tuple(int(k) for k in e)
            if len(e) != dim:
                raise DimensionError(f"monomial {e} is not in R^{dim}")
            if any(k < 0 for k in e):
                raise ValueError("negative exponent")
            out.append((e, c))
        elif kind == "spherical_harmonic_sum":
            d, m, a = t
            if dim not in (2, 3):
                raise DimensionError("spherical harmonic sums are available for n = 2, 3")
            solid_harmonic(dim, int(d), int(m))
            out.append((int(d), int(m), float(a)))
        else:
            p, q = t
            p = tuple(float(v) for v in p)
            if len(p) != dim:
                raise DimensionError(f"charge location {p} is not in R^{dim}")
            out.append((p, float(q)))
    return tuple(out)


def _num(c) -> Any:
    """Serialise a coefficient: ints stay ints, the rest become shortest round-trip strings."""
    if isinstance(c, int) and not isinstance(c, bool):
        return c
    if isinstance(c, Fraction):
        return str(c) if c.denominator != 1 else c.numerator
    return repr(float(c))


def _parse(v):
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    if isinstance(v, float):
        return v
    s = str(v)
    if "/" in s:
        return Fraction(s)
    try:
        return int(s)
    except ValueError:
        return float(s)
