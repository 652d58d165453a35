"""Norms of grad u over balls, cubes and spheres.

``sup_grad`` is certified (two-sided, by branch and bound on |grad u|^2),
``mean_square_grad`` and ``sphere_l2_norm`` are quadratures refined until
successive estimates agree to the requested relative tolerance.
"""
from __future__ import annotations

import numpy as np

from . import certify
from .certify import CertificationError
from .harmonic import Ball, DimensionError, HarmonicFunction, NormEstimate, SingularPointError
from .quadrature import ball_rule, sphere_rule

__all__ = ["sup_grad", "sup_grad_balls", "sup_grad_cubes", "mean_square_grad", "sphere_l2_norm",
           "sphere_mean", "CertificationError"]

ROUNDING_FLOOR = 1e-12  # relative error floor reported for converged quadratures


def _constant_gradient(u: HarmonicFunction):
    """The gradient vector if u is affine, else None."""
    p = u.poly
    if p is not None and p.degree <= 1:
        return u.gradients(np.zeros((1, u.dimension)))[0]
    return None


def _sqrt_interval(lo_g, hi_g):
    s_lo = np.sqrt(np.maximum(lo_g, 0.0))
    s_hi = np.sqrt(np.maximum(hi_g, 0.0))
    return (s_lo + s_hi) / 2, (s_hi - s_lo) / 2


def sup_grad_balls(u: HarmonicFunction, centers, radii, tolerance: float = 1e-6,
                   mode: str = "certified", **budget) -> tuple[np.ndarray, np.ndarray, str]:
    """Batched sup of |grad u| over balls: (values, error_bounds, mode).

    Certified values are midpoints of [sqrt(best sample), sqrt(bound)].  The
    maximum over a closed ball is attained on its sphere since |grad u|^2 is
    subharmonic, so only the sphere is searched.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),)).copy()
    if centers.shape[1] != u.dimension:
        raise DimensionError(f"expected points in R^{u.dimension}, got R^{centers.shape[1]}")
    for c, r in zip(centers, radii):
        if not u.harmonic_on_ball(c, r):
            raise SingularPointError(f"ball B({c.tolist()}, {r}) contains a point charge")
    const = _constant_gradient(u)
    if const is not None:
        v = float(np.linalg.norm(const))
        return np.full(len(radii), v), np.zeros(len(radii)), "exact"
    if mode == "sampled":
        nodes, _ = sphere_rule(u.dimension, budget.get("angular", 64))
        pts = centers[:, None, :] + radii[:, None, None] * nodes[None]
        g = np.linalg.norm(u.gradients(pts.reshape(-1, u.dimension)), axis=1).reshape(len(radii), -1)
        return g.max(axis=1), np.zeros(len(radii)), "sampled"
    if mode != "certified":
        raise ValueError(f"unknown mode {mode!r}")
    ext = certify.sphere_max(u, centers, radii, rel_tol=tolerance, **budget)
    value, err = _sqrt_interval(ext.sample, ext.bound)
    return value, err, "certified"


def sup_grad_cubes(u: HarmonicFunction, lo, hi, tolerance: float = 1e-6, **budget):
    """Batched certified sup of |grad u| over boxes (searched on their faces)."""
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    for a, b in zip(lo, hi):
        if not u.harmonic_on_box(a, b):
            raise SingularPointError("box contains a point charge")
    const = _constant_gradient(u)
    if const is not None:
        v = float(np.linalg.norm(const))
        return np.full(len(lo), v), np.zeros(len(lo)), "exact"
    flo, fhi, owner = certify.box_faces(lo, hi)
    ext = certify.box_extremum(u, flo, fhi, "max", rel_tol=tolerance, owner=owner,
                               n_owner=len(lo), **budget)
    if np.any(ext.status != "converged"):
        raise CertificationError(f"box sup not certified to rel_tol={tolerance}")
    value, err = _sqrt_interval(ext.sample, ext.bound)
    return value, err, "certified"


def sup_grad(u: HarmonicFunction, region, tolerance: float = 1e-6, mode: str = "certified",
             **budget) -> NormEstimate:
    """sup of |grad u| over a Ball or a Cube (anything with ``center`` and ``side``)."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if hasattr(region, "radius"):
        v, e, m = sup_grad_balls(u, [region.center], [region.radius], tolerance, mode, **budget)
    else:
        c = np.asarray([float(x) for x in region.center])
        h = float(region.side) / 2
        if mode == "sampled":
            raise ValueError("sampled mode is only offered for balls")
        v, e, m = sup_grad_cubes(u, c - h, c + h, tolerance, **budget)
    return NormEstimate(float(v[0]), float(e[0]), m)


def _ball_mean(u, center, radius, radial, angular):
    nodes, w = ball_rule(u.dimension, radial, angular)
    g = u.gradients(np.asarray(center, dtype=float) + radius * nodes)
    return float(np.einsum("i,ij,ij->", w, g, g) / w.sum())


def mean_square_grad(u: HarmonicFunction, ball: Ball, tolerance: float = 1e-10,
                     radial: int = 8, angular: int = 16, max_radial: int = 256) -> NormEstimate:
    """Mean of |grad u|^2 over the ball (the mean of the square, not its root).

    The product rule is doubled in both directions until two successive
    values agree to ``tolerance`` (relative); the last change is the error bound.
    """
    if not u.harmonic_on_ball(ball.center, ball.radius):
        raise SingularPointError("ball contains a point charge")
    const = _constant_gradient(u)
    if const is not None:
        return NormEstimate(float(const @ const), 0.0, "exact")
    prev = _ball_mean(u, ball.center, ball.radius, radial, angular)
    while radial < max_radial:
        radial, angular = 2 * radial, 2 * angular
        cur = _ball_mean(u, ball.center, ball.radius, radial, angular)
        change = abs(cur - prev)
        if change <= tolerance * abs(cur):
            return NormEstimate(cur, max(change, ROUNDING_FLOOR * abs(cur)), "sampled")
        prev = cur
    raise CertificationError(f"ball quadrature did not reach tolerance {tolerance} "
                             f"with {max_radial} radial nodes")


def sphere_mean(values_fn, center, radius: float, n: int, angular: int) -> float:
    """Average of values_fn over the sphere, by the product sphere rule."""
    nodes, w = sphere_rule(n, angular)
    vals = values_fn(np.asarray(center, dtype=float) + radius * nodes)
    return float(w @ vals / w.sum())


def sphere_l2_norm(u: HarmonicFunction, ball: Ball, tolerance: float = 1e-10,
                   angular: int = 16, max_angular: int = 1024) -> NormEstimate:
    """L2 norm of u on the sphere of the ball, surface measure not normalised."""
    n = u.dimension
    if not u.harmonic_on_ball(ball.center, ball.radius):
        raise SingularPointError("sphere meets a point charge")

    def norm(k):
        nodes, w = sphere_rule(n, k)
        v = u.values(np.asarray(ball.center) + ball.radius * nodes)
        return float(np.sqrt(ball.radius ** (n - 1) * (w @ (v * v))))

    prev = norm(angular)
    while angular < max_angular:
        angular *= 2
        cur = norm(angular)
        change = abs(cur - prev)
        if change <= tolerance * abs(cur) or cur == 0.0:
            return NormEstimate(cur, max(change, ROUNDING_FLOOR * abs(cur)), "sampled")
        prev = cur
    raise CertificationError(f"sphere quadrature did not reach tolerance {tolerance}")
