"""Sublevel sets {|grad u| < e^-a} on the Q0 lattice and their Hausdorff content."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import certify
from ..gmt import ContentEstimate, hausdorff_content
from ..harmonic import HarmonicFunction, SingularPointError
from ..lattice import HALF, Cube, GridSet, LatticeError, is_power_of_three
from ..norms import sup_grad


@dataclass
class SublevelReport:
    a: float
    resolution: int
    cells: GridSet  # certified-below cells plus undecided ones
    below_count: int
    undecided_count: int
    content: ContentEstimate
    sup_grad_Q: float
    normalized: bool
    coarse: bool  # no cell could be decided either way

    def as_dict(self) -> dict:
        return {"a": self.a, "resolution": self.resolution, "below_count": self.below_count,
                "undecided_count": self.undecided_count, "content": self.content.as_dict(),
                "sup_grad_Q": self.sup_grad_Q, "normalized": self.normalized, "coarse": self.coarse,
                "cells": self.cells.to_dict()}


def lattice_cells(Q: Cube, K: int) -> np.ndarray:
    """Index vectors of the side-1/K cells of Q0 inside Q."""
    if not is_power_of_three(K):
        raise LatticeError(f"resolution {K} is not a power of 3")
    pos = [(c + HALF) * K for c in Q.corner]
    width = Q.side * K
    if width.denominator != 1 or any(p.denominator != 1 for p in pos):
        raise LatticeError("Q is not a union of cells at this resolution")
    axes = [np.arange(int(p), int(p) + int(width)) for p in pos]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, Q.dimension)


def sublevel_set(u: HarmonicFunction, Q: Cube, a: float, K: int, max_depth: int = 30):
    """Cells of Q (resolution 1/K) whose min of |grad u| is below e^-a.

    Returns (below, undecided) index arrays; membership is decided by a
    certified minimum of |grad u|^2 over each closed cell against e^(-2a).
    """
    cells = lattice_cells(Q, K)
    lo = cells / K - 0.5
    hi = (cells + 1) / K - 0.5
    if not u.harmonic_on_box(lo.min(axis=0), hi.max(axis=0)):
        raise SingularPointError("Q contains a point charge")
    ext = certify.box_extremum(u, lo, hi, "min", threshold=math.exp(-2 * a), max_depth=max_depth)
    below = ext.status == "below"
    undecided = ~below & (ext.status != "above")
    return cells[below], cells[undecided]


def sublevel_content(u: HarmonicFunction, Q: Cube, a: float, s: float, K: int,
                     tolerance: float = 1e-6, search_depth: int | None = None) -> SublevelReport:
    """Content at exponent s of the sublevel set, with the set itself.

    Undecided cells are kept in the set (pessimistic).  ``normalized``
    records whether the certified sup of |grad u| on Q lies in [1-tol, 1+tol].
    """
    below, undecided = sublevel_set(u, Q, a, K)
    E = GridSet(K, np.concatenate([below, undecided]) if len(undecided) else below)
    sup = sup_grad(u, Q, tolerance)
    normalized = abs(sup.value - 1) <= tolerance + sup.error_bound
    total = len(lattice_cells(Q, K))
    coarse = len(undecided) == total
    if E.is_empty():
        content = ContentEstimate(s, 0.0, 0.0, ())
    else:
        content = hausdorff_content(E, s, search_depth)
    return SublevelReport(float(a), K, E, int(len(below)), int(len(undecided)), content,
                          sup.value, bool(normalized), bool(coarse))


def normalize_on(u: HarmonicFunction, region, tolerance: float = 1e-8) -> HarmonicFunction:
    """u scaled so that the certified sup of |grad u| over the region is 1."""
    est = sup_grad(u, region, tolerance)
    if est.value == 0:
        raise ValueError("cannot normalise a function with vanishing gradient")
    return u.scaled(1.0 / est.value)
