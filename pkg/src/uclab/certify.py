"""Certified extrema of g = |grad u|^2 by vectorised branch and bound.

Every routine works on a batch of regions ("owners") at once.  Cells are
axis-aligned boxes; each carries a sample point p inside the region and a
second-order Taylor model of g around p (exact gradient and Hessian) with a
cubic remainder

    |R3| <= ||D^3 g|| d^3 / 6,

where ||D^3 g|| is bounded on a box containing the segment [p, y], either
term-wise on the explicit polynomial D^3 g or from the chain rule
||D^3 g|| <= 2 (3 ||D^2u|| ||D^3u|| + ||Du|| ||D^4u||).  Cells whose bound
cannot beat the best sample are discarded; survivors split in two along every
non-degenerate axis.  The best samples are polished by projected gradient
steps, which only sharpens the one-sided value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonic import HarmonicFunction
from .quadrature import sphere_rule

TINY_G = 1e-60  # (1e-30)^2: below this |grad u| counts as vanishing


class CertificationError(RuntimeError):
    """Refinement budget exhausted before the requested accuracy."""


@dataclass
class Extremum:
    """Per-owner result on the scale of g = |grad u|^2."""

    sample: np.ndarray  # best sampled g (a certified one-sided value)
    bound: np.ndarray  # certified bound on the other side
    status: np.ndarray  # "converged" | "above" | "below" | "budget"
    argbest: np.ndarray  # sample point realising ``sample``


def _g_jet(u: HarmonicFunction, p: np.ndarray):
    """g, grad g and D^2 g at the sample points."""
    _, grad, hess, third = u.jet(p, order=3)
    g = np.einsum("ij,ij->i", grad, grad)
    dg = 2 * np.einsum("ijk,ik->ij", hess, grad)
    d2g = 2 * (np.einsum("mik,mkj->mij", hess, hess) + np.einsum("mk,mkij->mij", grad, third))
    return g, dg, d2g


def _third_g_bound(u: HarmonicFunction, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Bound on ||D^3 g|| over boxes: D^3 g = 2 sym(3 D^2u (x) D^3u + Du . D^4u)."""
    b1, b2, b3, b4 = u.derivative_bounds(lo, hi)
    chain = 2 * (3 * b2 * b3 + b1 * b4)
    direct = u.gradsq_third_bound(lo, hi)
    return chain if direct is None else np.minimum(chain, direct)


def _quad_max(b: np.ndarray, hess: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Upper bound on max_{|w| <= d} b.w + w^T hess w / 2, per row.

    In the eigenbasis of ``hess`` the disk sits inside the box |w_i| <= d, so
    the maximum is at most a sum of one-dimensional maximisations.
    """
    lam, vec = np.linalg.eigh(hess)
    bi = np.abs(np.einsum("mij,mi->mj", vec, b))
    d = d[:, None]
    inner = (lam < 0) & (bi <= -lam * d)
    safe = np.where(lam < 0, -lam, 1.0)
    parts = np.where(inner, bi**2 / (2 * safe), bi * d + lam * d**2 / 2)
    return parts.sum(axis=1)


class _SphereMax:
    """Maximise g over spheres (= over closed balls, g being subharmonic)."""

    mode = "max"

    def __init__(self, centers, radii):
        self.centers = centers
        self.radii = radii

    def initial(self, start: int):
        n = self.centers.shape[1]
        k = len(self.radii)
        grid = (np.stack(np.meshgrid(*[np.arange(start)] * n, indexing="ij"), -1).reshape(-1, n) / start)
        side = 2 * self.radii / start
        lo = (self.centers - self.radii[:, None])[:, None, :] + grid[None] * (2 * self.radii)[:, None, None]
        lo = lo.reshape(-1, n)
        owner = np.repeat(np.arange(k), len(grid))
        hi = lo + np.repeat(side, len(grid))[:, None]
        return self.keep(lo, hi, owner)

    def keep(self, lo, hi, owner):
        cc = (lo + hi) / 2
        rho = np.linalg.norm(hi - lo, axis=1) / 2
        dist = np.linalg.norm(cc - self.centers[owner], axis=1)
        ok = np.abs(dist - self.radii[owner]) <= rho * (1 + 1e-12)
        return lo[ok], hi[ok], owner[ok]

    def seed(self, u, angular: int = 32):
        """Dense sample of each sphere to start pruning with a good incumbent."""
        nodes, _ = sphere_rule(self.centers.shape[1], angular)
        pts = self.centers[:, None, :] + self.radii[:, None, None] * nodes[None]
        grad = u.gradients(pts.reshape(-1, pts.shape[-1])).reshape(pts.shape)
        g = np.einsum("kij,kij->ki", grad, grad)
        j = np.argmax(g, axis=1)
        k = np.arange(len(self.radii))
        return g[k, j], pts[k, j]

    def project(self, y, owner):
        v = y - self.centers[owner]
        nv = np.linalg.norm(v, axis=1)
        nv[nv == 0] = 1.0
        return self.centers[owner] + v * (self.radii[owner] / nv)[:, None]

    def evaluate(self, u, lo, hi, owner):
        # y, p on the sphere, y - p = w + eta n with w tangent, |w| <= d, eta = -|y - p|^2 / (2r).
        # Second-order part along the sphere: (1/2) w^T (P H P - (dg.n / r) P) w.
        cc = (lo + hi) / 2
        rho = np.linalg.norm(hi - lo, axis=1) / 2
        c = self.centers[owner]
        r = self.radii[owner]
        v = cc - c
        nv = np.linalg.norm(v, axis=1)
        zero = nv == 0
        v[zero] = 0
        v[zero, 0] = 1
        nv[zero] = 1
        nhat = v / nv[:, None]
        p = c + r[:, None] * nhat
        g, dg, d2g = _g_jet(u, p)
        gn = np.einsum("ij,ij->i", dg, nhat)
        proj = np.eye(p.shape[1])[None] - nhat[:, :, None] * nhat[:, None, :]
        along = proj @ d2g @ proj - (gn / r)[:, None, None] * proj
        tangent = dg - gn[:, None] * nhat
        hn = np.einsum("mij,mj->mi", d2g, nhat)
        hnn = np.einsum("mi,mi->m", hn, nhat)
        mixed = np.linalg.norm(hn - hnn[:, None] * nhat, axis=1)
        d = 2 * rho
        eta = d**2 / (2 * r)
        t3 = _third_g_bound(u, cc - rho[:, None], cc + rho[:, None])
        bound = (g + _quad_max(tangent, along, d)
                 + mixed * d * eta + np.abs(hnn) * eta**2 / 2 + np.maximum(-gn, 0) * eta**2 / (2 * r)
                 + t3 / 6 * d**3)
        return p, g, bound


class _BallMin:
    """Minimise g over closed balls."""

    mode = "min"

    def __init__(self, centers, radii):
        self.centers = centers
        self.radii = radii

    initial = _SphereMax.initial

    def keep(self, lo, hi, owner):
        cc = (lo + hi) / 2
        rho = np.linalg.norm(hi - lo, axis=1) / 2
        dist = np.linalg.norm(cc - self.centers[owner], axis=1)
        ok = dist - self.radii[owner] <= rho * (1 + 1e-12)
        return lo[ok], hi[ok], owner[ok]

    def project(self, y, owner):
        v = y - self.centers[owner]
        nv = np.linalg.norm(v, axis=1)
        shrink = np.where(nv > self.radii[owner], self.radii[owner] / np.where(nv > 0, nv, 1), 1.0)
        return self.centers[owner] + v * shrink[:, None]

    def evaluate(self, u, lo, hi, owner):
        # p = projection of the cell centre onto the ball; |y - p| <= rho for y in cell and ball
        cc = (lo + hi) / 2
        rho = np.linalg.norm(hi - lo, axis=1) / 2
        c = self.centers[owner]
        r = self.radii[owner]
        v = cc - c
        nv = np.linalg.norm(v, axis=1)
        shrink = np.where(nv > r, r / np.where(nv > 0, nv, 1), 1.0)
        p = c + v * shrink[:, None]
        g, dg, d2g = _g_jet(u, p)
        t3 = _third_g_bound(u, cc - rho[:, None], cc + rho[:, None])
        bound = g - _quad_max(-dg, -d2g, rho) - t3 / 6 * rho**3
        return p, g, bound


class _Box:
    """Extremise g over boxes; zero-width axes stay fixed (faces, slices)."""

    def __init__(self, lo, hi, mode, owner=None):
        self.lo = lo
        self.hi = hi
        self.mode = mode
        self.owner = np.arange(len(lo)) if owner is None else owner

    def initial(self, start: int):
        return self.lo.copy(), self.hi.copy(), self.owner.copy()

    def keep(self, lo, hi, owner):
        return lo, hi, owner

    def evaluate(self, u, lo, hi, owner):
        cc = (lo + hi) / 2
        rho = np.linalg.norm(hi - lo, axis=1) / 2
        g, dg, d2g = _g_jet(u, cc)
        dg = np.where(hi > lo, dg, 0.0)
        t3 = _third_g_bound(u, lo, hi)
        active = (hi > lo).astype(float)
        d2g = d2g * active[:, :, None] * active[:, None, :]
        if self.mode == "max":
            return cc, g, g + _quad_max(dg, d2g, rho) + t3 / 6 * rho**3
        return cc, g, g - _quad_max(-dg, -d2g, rho) - t3 / 6 * rho**3


def _polish(u, geom, points, owner, sign, sweeps=3, steps=24):
    """Improve incumbents by projected gradient steps with a step-size scan.

    Any point of the region is a valid sample, so this only tightens the
    one-sided value; it never affects the certificate.
    """
    scale = geom.radii[owner]
    x = points
    gx = u.gradients(x)
    best = np.einsum("ij,ij->i", gx, gx)
    ladder = 2.0 ** -np.arange(steps)
    for _ in range(sweeps):
        _, grad, hess = u.jet(x)
        dg = 2 * np.einsum("ijk,ik->ij", hess, grad) * sign
        norm = np.linalg.norm(dg, axis=1)
        norm[norm == 0] = 1.0
        step = (dg / norm[:, None])[:, None, :] * (scale[:, None] * ladder[None])[:, :, None]
        trial = (x[:, None, :] + step).reshape(-1, x.shape[1])
        trial = geom.project(trial, np.repeat(owner, steps))
        gt = u.gradients(trial)
        val = np.einsum("ij,ij->i", gt, gt).reshape(len(x), steps)
        j = np.argmax(sign * val, axis=1)
        cand = val[np.arange(len(x)), j]
        improve = sign * cand > sign * best
        x = np.where(improve[:, None], trial.reshape(len(x), steps, -1)[np.arange(len(x)), j], x)
        best = np.where(improve, cand, best)
    return x, best


def _split(lo, hi, owner):
    """Halve every cell along each of its non-degenerate axes."""
    for axis in range(lo.shape[1]):
        act = hi[:, axis] > lo[:, axis]
        mid = (lo[act, axis] + hi[act, axis]) / 2
        right_lo = lo[act].copy()
        right_lo[:, axis] = mid
        right_hi = hi[act].copy()
        hi = hi.copy()
        hi[act, axis] = mid
        lo = np.concatenate([lo, right_lo])
        hi = np.concatenate([hi, right_hi])
        owner = np.concatenate([owner, owner[act]])
    return lo, hi, owner


def _run(u, geom, n_owner, *, rel_tol=None, threshold=None, max_depth=40,
         max_cells=2_000_000, start=4, strict=True) -> Extremum:
    """Shared refinement loop.

    With ``rel_tol``: stop an owner once sqrt(bound) and sqrt(sample) agree to
    rel_tol (relative to their mean).  With ``threshold`` (on g): stop once the
    extremum is certainly above or below it.
    """
    lo, hi, owner = geom.initial(start)
    is_max = geom.mode == "max"
    best = np.full(n_owner, -np.inf if is_max else np.inf)
    bound = np.full(n_owner, np.inf if is_max else -np.inf)
    arg = np.full((n_owner, lo.shape[1]), np.nan)
    status = np.array(["budget"] * n_owner, dtype=object)
    live = np.ones(n_owner, dtype=bool)
    if hasattr(geom, "seed"):
        best, arg = geom.seed(u)
    for depth in range(max_depth + 1):
        if len(lo) == 0:
            break
        p, g, b = geom.evaluate(u, lo, hi, owner)
        # per-owner best sample
        if is_max:
            order = np.lexsort((-g, owner))
        else:
            order = np.lexsort((g, owner))
        first = np.ones(len(order), dtype=bool)
        first[1:] = owner[order][1:] != owner[order][:-1]
        idx = order[first]
        cand_owner = owner[idx]
        better = (g[idx] > best[cand_owner]) if is_max else (g[idx] < best[cand_owner])
        best[cand_owner[better]] = g[idx][better]
        arg[cand_owner[better]] = p[idx][better]
        if hasattr(geom, "project") and better.any():
            who = cand_owner[better]
            pts, vals = _polish(u, geom, arg[who], who, 1.0 if is_max else -1.0)
            best[who] = vals
            arg[who] = pts
        cur = np.full(n_owner, -np.inf if is_max else np.inf)
        if is_max:
            np.maximum.at(cur, owner, b)
        else:
            np.minimum.at(cur, owner, b)
        present = np.zeros(n_owner, dtype=bool)
        present[owner] = True
        bound[present] = cur[present]
        done = np.zeros(n_owner, dtype=bool)
        if rel_tol is not None:
            s_hi = np.sqrt(np.maximum(bound if is_max else best, 0))
            s_lo = np.sqrt(np.maximum(best if is_max else bound, 0))
            ok = (s_hi - s_lo) <= rel_tol * (s_hi + s_lo) / 2
            ok |= (bound if is_max else best) <= TINY_G
            done |= ok & present & live
            status[done] = "converged"
        if threshold is not None:
            t = threshold if np.ndim(threshold) == 0 else np.asarray(threshold)
            tt = np.broadcast_to(t, (n_owner,))
            if is_max:
                above = (best > tt) & live & present
                below = (bound <= tt) & live & present & ~above
            else:
                below = (best < tt) & live & present
                above = (bound >= tt) & live & present & ~below
            status[above] = "above"
            status[below] = "below"
            done |= above | below
        live &= ~done
        keep_cell = live[owner]
        if is_max:
            keep_cell &= b >= best[owner]
        else:
            keep_cell &= b <= best[owner]
        if not live.any() or depth == max_depth:
            break
        lo, hi, owner = _split(lo[keep_cell], hi[keep_cell], owner[keep_cell])
        lo, hi, owner = geom.keep(lo, hi, owner)
        if len(lo) > max_cells:
            break
    # owners never touched by surviving cells keep their last bound
    if strict and live.any() and rel_tol is not None and threshold is None:
        raise CertificationError(
            f"{int(live.sum())} region(s) not certified to rel_tol={rel_tol} within depth {max_depth}")
    return Extremum(best, bound, status, arg)


def sphere_max(u, centers, radii, rel_tol=1e-6, **kw) -> Extremum:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),)).copy()
    return _run(u, _SphereMax(centers, radii), len(radii), rel_tol=rel_tol, **kw)


def ball_min_below(u, centers, radii, threshold, **kw) -> Extremum:
    """Decide ``min_{B} g < threshold`` for each ball (status 'below'/'above')."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),)).copy()
    return _run(u, _BallMin(centers, radii), len(radii), threshold=threshold, **kw)


def box_extremum(u, lo, hi, mode="max", rel_tol=None, threshold=None, owner=None,
                 n_owner=None, **kw) -> Extremum:
    """Extremum of g over boxes; several boxes may share an owner (e.g. faces of a cube)."""
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    if owner is not None:
        owner = np.asarray(owner)
        n_owner = int(owner.max()) + 1 if n_owner is None else n_owner
    else:
        n_owner = len(lo)
    return _run(u, _Box(lo, hi, mode, owner), n_owner, rel_tol=rel_tol, threshold=threshold, **kw)


def box_faces(lo: np.ndarray, hi: np.ndarray):
    """The 2n boundary faces of each box, as degenerate boxes, plus owner ids."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    n = lo.shape[1]
    flo, fhi, own = [], [], []
    for axis in range(n):
        for side in (lo, hi):
            a, b = lo.copy(), hi.copy()
            a[:, axis] = side[:, axis]
            b[:, axis] = side[:, axis]
            flo.append(a)
            fhi.append(b)
            own.append(np.arange(len(lo)))
    return np.concatenate(flo), np.concatenate(fhi), np.concatenate(own)
