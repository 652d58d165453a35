"""Test-function generators: homogeneous harmonics, random harmonic
polynomials and exterior point-charge potentials.

Every generator is deterministic given its arguments (random ones take an
explicit ``numpy.random.Generator`` or seed).
"""
from __future__ import annotations

import math

import numpy as np

from .harmonic import HarmonicFunction, solid_harmonic
from .polynomial import Poly, monomials_up_to, sphere_area, sphere_average

#: the experiment cube is [-1/2, 1/2]^n; charges keep at least this distance from it
CHARGE_DISTANCE = 3.0


def harmonic_orders(n: int, degree: int) -> list[int]:
    """Order labels of an orthonormal basis of degree-d spherical harmonics."""
    if n == 2:
        return [0] if degree == 0 else [0, -degree]
    if n == 3:
        return list(range(-degree, degree + 1))
    raise ValueError("spherical-harmonic bases are available for n = 2, 3")


def homogeneous(n: int, degree: int, order: int = 0, amplitude: float = 1.0) -> HarmonicFunction:
    """A single real solid harmonic (unit L2 norm on the unit sphere times ``amplitude``)."""
    return HarmonicFunction("spherical_harmonic_sum", n, ((degree, order, amplitude),))


def homogeneous_basis(n: int, degree: int) -> list[HarmonicFunction]:
    return [homogeneous(n, degree, m) for m in harmonic_orders(n, degree)]


def homogeneous_zoo(n: int, max_degree: int = 12, min_degree: int = 1) -> list[HarmonicFunction]:
    """Every basis harmonic of degree ``min_degree..max_degree``."""
    return [u for d in range(min_degree, max_degree + 1) for u in homogeneous_basis(n, d)]


def harmonic_projection(p: Poly) -> HarmonicFunction:
    """The harmonic function agreeing with p on the unit sphere.

    The sphere restriction of a degree-D polynomial lies in the span of the
    spherical harmonics of degree <= D; the coefficients are exact sphere
    integrals against the orthonormal basis.
    """
    n = p.dim
    area = sphere_area(n)
    terms = []
    constant = 0.0
    for d in range(p.degree + 1):
        for m in harmonic_orders(n, d):
            basis, norm = solid_harmonic(n, d, m)
            coef = float(sphere_average(p.to_float() * basis.to_float())) * area * norm
            if d == 0:
                constant += coef * norm
            elif coef != 0.0:
                terms.append((d, m, coef))
    return HarmonicFunction("spherical_harmonic_sum", n, tuple(terms), offset=constant)


def random_harmonic(n: int, degree: int, rng: np.random.Generator | int,
                    min_degree: int = 1) -> HarmonicFunction:
    """Project a polynomial with i.i.d. normal coefficients onto harmonics.

    Monomials of total degree below ``min_degree`` are left out, and the
    result is scaled so that its sphere L2 norm is 1.
    """
    rng = np.random.default_rng(rng)
    exps = [e for e in monomials_up_to(n, degree) if sum(e) >= min_degree]
    p = Poly(n, {e: float(c) for e, c in zip(exps, rng.standard_normal(len(exps)))})
    u = harmonic_projection(p)
    norm = math.sqrt(sum(a * a for _, _, a in u.terms))
    if norm == 0:
        return random_harmonic(n, degree, rng, min_degree)
    return HarmonicFunction(u.kind, n, tuple((d, m, a / norm) for d, m, a in u.terms),
                            offset=u.offset / norm)


def point_charges(n: int, count: int, rng: np.random.Generator | int,
                  distance: float = CHARGE_DISTANCE) -> HarmonicFunction:
    """Charges of random sign and size on the sphere of radius distance + sqrt(n)/2.

    Every point of that sphere is at least ``distance`` from the unit cube.
    """
    rng = np.random.default_rng(rng)
    radius = distance + math.sqrt(n) / 2
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1)[:, None]
    q = rng.uniform(0.5, 1.5, count) * rng.choice([-1.0, 1.0], count)
    return HarmonicFunction("point_charge_sum", n, tuple((tuple(radius * x), float(c)) for x, c in zip(v, q)))


def random_zoo(n: int, count: int, seed: int, max_degree: int = 6) -> list[HarmonicFunction]:
    """Mixed family: random harmonic polynomials of varying degree, every third a charge sum."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 3 == 2:
            out.append(point_charges(n, int(rng.integers(2, 6)), rng))
        else:
            out.append(random_harmonic(n, int(rng.integers(2, max_degree + 1)), rng))
    return out


# -- named closed forms used across tests and configs --------------------------

def linear(n: int = 2) -> HarmonicFunction:
    """u = x_1."""
    return HarmonicFunction.linear(n, 0)


def saddle(n: int = 2) -> HarmonicFunction:
    """u = x_1^2 - x_2^2."""
    e1 = [0] * n
    e1[0] = 2
    e2 = [0] * n
    e2[1] = 2
    return HarmonicFunction("polynomial", n, ((tuple(e1), 1), (tuple(e2), -1)))


def real_power(d: int) -> HarmonicFunction:
    """u = Re (x + iy)^d as an exact integer polynomial."""
    terms = []
    for k in range(0, d + 1, 2):
        terms.append(((d - k, k), math.comb(d, k) * (-1) ** (k // 2)))
    return HarmonicFunction("polynomial", 2, tuple(terms))


def shifted_real_power(d: int, shift: complex) -> HarmonicFunction:
    """u = Re (z - shift)^d in the plane, z = x + iy."""
    p = Poly(2)
    re, im = Poly(2, {(1, 0): 1.0, (0, 0): -shift.real}), Poly(2, {(0, 1): 1.0, (0, 0): -shift.imag})
    # expand (re + i im)^d, keeping the real part
    for k in range(0, d + 1, 2):
        p = p + (re ** (d - k) * im**k).scale(math.comb(d, k) * (-1) ** (k // 2))
    return HarmonicFunction.from_poly(p)


def curated_zoo() -> list[HarmonicFunction]:
    """Planar polynomials of degree <= 10 used by the census experiments.

    Real powers centred at the origin, real powers centred off-origin inside
    Q0, and seeded random harmonic polynomials.
    """
    out = [real_power(d) for d in range(2, 11)]
    out += [shifted_real_power(d, complex(0.1, 0.3)) for d in (3, 5, 8)]
    out += [random_harmonic(2, d, 1000 + d) for d in (4, 6, 8, 10)]
    return out


NAMED = {
    "linear": linear,
    "saddle": saddle,
}


def from_selector(spec: dict, seed: int | None = None) -> HarmonicFunction:
    """Build a function from a config selector.

    Accepted forms: an inline ``{kind, dimension, terms}`` record, or
    ``{"zoo": name, ...}`` with name in ``linear``, ``saddle``, ``real_power``,
    ``shifted_real_power``, ``homogeneous``, ``random_harmonic``, ``point_charges``.
    """
    if "kind" in spec:
        return HarmonicFunction.from_dict(spec)
    name = spec.get("zoo")
    n = int(spec.get("n", 2))
    if name in NAMED:
        return NAMED[name](n)
    if name == "real_power":
        return real_power(int(spec["degree"]))
    if name == "shifted_real_power":
        re_, im_ = spec.get("shift", (0.0, 0.0))
        return shifted_real_power(int(spec["degree"]), complex(re_, im_))
    if name == "homogeneous":
        return homogeneous(n, int(spec["degree"]), int(spec.get("order", 0)))
    if name in ("random_harmonic", "point_charges"):
        if seed is None:
            raise ValueError("randomised zoo members need a seed")
        if name == "random_harmonic":
            return random_harmonic(n, int(spec["degree"]), seed)
        return point_charges(n, int(spec.get("count", 3)), seed)
    raise ValueError(f"unknown zoo selector {spec!r}")


def family_from_selector(spec, seed: int | None = None) -> list[HarmonicFunction]:
    """A list of functions from a list of selectors or a named family.

    Named families: ``curated``; ``random`` {n, count, max_degree};
    ``homogeneous_all`` {n, max_degree, min_degree};
    ``shifted_real_powers`` {degrees, shift}.
    """
    if isinstance(spec, list):
        return [from_selector(s, None if seed is None else seed + i) for i, s in enumerate(spec)]
    name = spec.get("zoo")
    if name == "curated":
        return curated_zoo()
    if name == "random":
        if seed is None:
            raise ValueError("randomised zoo members need a seed")
        return random_zoo(int(spec.get("n", 2)), int(spec["count"]), seed, int(spec.get("max_degree", 6)))
    if name == "homogeneous_all":
        return homogeneous_zoo(int(spec.get("n", 2)), int(spec.get("max_degree", 8)), int(spec.get("min_degree", 1)))
    if name == "shifted_real_powers":
        re_, im_ = spec.get("shift", (0.0, 0.3))
        return [shifted_real_power(int(d), complex(re_, im_)) for d in spec["degrees"]]
    return [from_selector(spec, seed)]
