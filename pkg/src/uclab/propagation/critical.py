"""Effective critical sets: cells where |grad u| is small on B_r relative to the
oscillation of u on the sphere of radius 2r, and their greedy r-ball covers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .. import certify
from ..certify import CertificationError
from ..harmonic import HarmonicFunction, SingularPointError
from ..lattice import Cube
from ..quadrature import sphere_rule
from .sublevel import lattice_cells


@dataclass
class CriticalSetCover:
    r: float
    centers: np.ndarray
    ball_count: int
    detected: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))  # cell centres in C_r(u)
    undecided: int = 0
    context: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"r": self.r, "ball_count": self.ball_count, "centers": self.centers.tolist(),
                "detected_count": int(len(self.detected)), "undecided": self.undecided,
                "context": self.context}


def oscillation_threshold(u: HarmonicFunction, x: np.ndarray, r: float, tolerance: float = 1e-12,
                          angular: int = 16, max_angular: int = 1024) -> np.ndarray:
    """(n/16) r^-2 times the sphere mean of |u(y) - u(x)|^2 over |y - x| = 2r, batched.

    The product sphere rule is doubled until successive values agree.
    """
    x = np.atleast_2d(x)
    n = x.shape[1]
    ux = u.values(x)

    def mean(k):
        nodes, w = sphere_rule(n, k)
        y = (x[:, None, :] + 2 * r * nodes[None]).reshape(-1, n)
        d = u.values(y).reshape(len(x), -1) - ux[:, None]
        return (d * d) @ w / w.sum()

    prev = mean(angular)
    while angular < max_angular:
        angular *= 2
        cur = mean(angular)
        if np.all(np.abs(cur - prev) <= tolerance * np.abs(cur) + 1e-300):
            return n / 16 / r**2 * cur
        prev = cur
    raise CertificationError("sphere mean of the oscillation did not converge")


def greedy_cover(points: np.ndarray, r: float) -> np.ndarray:
    """Centres chosen in input order: each uncovered point opens a ball of radius r."""
    if len(points) == 0:
        return np.zeros((0, points.shape[1] if points.ndim == 2 else 0))
    tree = cKDTree(points)
    covered = np.zeros(len(points), dtype=bool)
    centers = []
    for i in range(len(points)):
        if covered[i]:
            continue
        centers.append(points[i])
        covered[tree.query_ball_point(points[i], r * (1 + 1e-12))] = True
    return np.array(centers)


def effective_critical_set(u: HarmonicFunction, Q: Cube, r: float, K: int,
                           tolerance: float = 1e-12, max_depth: int = 30) -> CriticalSetCover:
    """Evaluate the defining inequality at the centres of the side-1/K cells of Q.

    inf_{B_r(x)} |grad u|^2 is decided against the threshold by certified
    branch and bound; undecided centres are reported separately and kept out
    of the cover.
    """
    if K * r < 1:
        raise ValueError("cell size 1/K must not exceed r")
    cells = lattice_cells(Q, K)
    x = (cells + 0.5) / K - 0.5
    if u.kind == "point_charge_sum":
        d = np.linalg.norm(x[:, None, :] - u.charges[None], axis=2)
        if np.any(d <= 2 * r):
            raise SingularPointError("B_2r(x) meets a point charge")
    rhs = oscillation_threshold(u, x, r, tolerance)
    ext = certify.ball_min_below(u, x, np.full(len(x), r), rhs, max_depth=max_depth)
    inside = ext.status == "below"
    undecided = int(np.sum((ext.status != "below") & (ext.status != "above")))
    pts = x[inside]
    centers = greedy_cover(pts, r)
    return CriticalSetCover(float(r), centers, int(len(centers)), pts, undecided,
                            {"K": K, "cells": int(len(x)), "order": "lexicographic cell order"})


def cover_growth(cover_count: int, N: float) -> float | None:
    """log(ball_count) / N^2: the constant C in a count of the shape C^(N^2)."""
    if N <= 0 or cover_count <= 0:
        return None
    return math.log(cover_count) / N**2
