"""Triadic cube lattices over the unit cube Q0 = [-1/2, 1/2]^n.

Cube geometry is exact: corners and sides are Fractions, and every
set-versus-cube query runs on integer cell indices.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

HALF = Fraction(1, 2)


class LatticeError(ValueError):
    """Non-triadic branching, incommensurate resolutions and similar misuse."""


def is_power_of_three(k: int) -> bool:
    if k < 1:
        return False
    while k % 3 == 0:
        k //= 3
    return k == 1


def log3(k: int) -> int:
    if not is_power_of_three(k):
        raise LatticeError(f"{k} is not a power of 3")
    e = 0
    while k > 1:
        k //= 3
        e += 1
    return e


def branching_of(A: int) -> int:
    b = 2 * A + 1
    if not is_power_of_three(b):
        raise LatticeError(f"branching 2A+1 = {b} (A = {A}) is not a power of 3")
    return b


# -- cubes --------------------------------------------------------------------------


@dataclass(frozen=True)
class Cube:
    """Closed axis-aligned cube with exact corner and side.

    ``path`` lists the child index vectors from the root; the root itself has
    generation 0 and an empty path.
    """

    corner: tuple[Fraction, ...]  # lower corner
    side: Fraction
    generation: int = 0
    path: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(Fraction(c) for c in self.corner))
        object.__setattr__(self, "side", Fraction(self.side))
        if self.side <= 0:
            raise LatticeError("cube side must be positive")
        if len(self.path) != self.generation:
            raise LatticeError("path length must equal generation")

    @classmethod
    def unit(cls, n: int) -> "Cube":
        """The root cube Q0 = [-1/2, 1/2]^n."""
        return cls((-HALF,) * n, Fraction(1))

    @classmethod
    def centered(cls, center: Sequence, side) -> "Cube":
        side = Fraction(side)
        return cls(tuple(Fraction(c) - side / 2 for c in center), side)

    @property
    def dimension(self) -> int:
        return len(self.corner)

    @property
    def center(self) -> tuple[Fraction, ...]:
        return tuple(c + self.side / 2 for c in self.corner)

    @property
    def upper(self) -> tuple[Fraction, ...]:
        return tuple(c + self.side for c in self.corner)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Float lower/upper corners (rendered only at evaluation time)."""
        return (np.array([float(c) for c in self.corner]), np.array([float(c) for c in self.upper]))

    @property
    def center_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.center])

    @property
    def volume(self) -> Fraction:
        return self.side ** self.dimension

    @property
    def diameter(self) -> float:
        return float(self.side) * math.sqrt(self.dimension)

    def scaled(self, factor) -> "Cube":
        """Concentric cube with side multiplied by ``factor`` (e.g. 2Q, 100Q)."""
        return Cube.centered(self.center, self.side * Fraction(factor))

    def contains_point(self, x) -> bool:
        return all(c <= Fraction(v) <= c + self.side for c, v in zip(self.corner, x))

    def index_at(self, resolution: int) -> tuple[int, ...]:
        """Integer position among the side-1/resolution cubes of Q0."""
        pos = [(c + HALF) * resolution for c in self.corner]
        if self.side * resolution != 1 or any(p.denominator != 1 for p in pos):
            raise LatticeError(f"cube is not a cell of the 1/{resolution} lattice")
        return tuple(int(p) for p in pos)

    def as_dict(self) -> dict:
        return {"corner": [str(c) for c in self.corner], "side": str(self.side),
                "generation": self.generation, "path": [list(p) for p in self.path]}


def subdivide(Q: Cube, A: int) -> list[Cube]:
    """The (2A+1)^n children of Q, ordered lexicographically by index vector."""
    b = branching_of(A)
    side = Q.side / b
    out = []
    for idx in itertools.product(range(b), repeat=Q.dimension):
        corner = tuple(c + side * i for c, i in zip(Q.corner, idx))
        out.append(Cube(corner, side, Q.generation + 1, Q.path + (idx,)))
    return out


def hyperplane_children(Q: Cube, A: int, axis: int | None = None, level=0) -> list[Cube]:
    """Children of Q meeting the hyperplane {x_axis = level} (default: x_n = 0)."""
    axis = Q.dimension - 1 if axis is None else axis
    level = Fraction(level)
    if not Q.corner[axis] <= level <= Q.corner[axis] + Q.side:
        raise LatticeError(f"hyperplane x_{axis + 1} = {level} misses the cube")
    return [q for q in subdivide(Q, A) if q.corner[axis] <= level <= q.corner[axis] + q.side]


def from_path(root: Cube, path: Iterable[Sequence[int]], A: int) -> Cube:
    """Rebuild a descendant from its path (checks descendant consistency)."""
    b = branching_of(A)
    q = root
    for idx in path:
        if any(not 0 <= i < b for i in idx):
            raise LatticeError(f"child index {idx} outside 0..{b - 1}")
        side = q.side / b
        q = Cube(tuple(c + side * i for c, i in zip(q.corner, idx)), side, q.generation + 1,
                 q.path + (tuple(idx),))
    return q


@dataclass
class CubeTree:
    """A root cube with a fixed branching and lazily materialised generations."""

    root: Cube
    A: int = 1
    levels: list[list[Cube]] = field(default_factory=list)

    def __post_init__(self):
        self.branching = branching_of(self.A)
        if not self.levels:
            self.levels = [[self.root]]

    def level(self, generation: int) -> list[Cube]:
        while len(self.levels) <= generation:
            self.levels.append([c for q in self.levels[-1] for c in subdivide(q, self.A)])
        return self.levels[generation]

    def children(self, q: Cube) -> list[Cube]:
        return subdivide(q, self.A)

    def parent(self, q: Cube) -> Cube | None:
        if q.generation == 0:
            return None
        return from_path(self.root, q.path[:-1], self.A)


# -- grid sets ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridSet:
    """A compact set E given by lattice cells of side 1/resolution inside Q0.

    ``cells`` is a sorted (k, n) integer array of cell indices.  ``slices``
    pins some axes to a coordinate: the represented set is the union of the
    closed cells intersected with {x_i = slices[i]}; e.g. a set in the
    hyperplane {x_n = 0} thickened to one row of cells.
    """

    resolution: int
    cells: np.ndarray
    slices: tuple = ()  # tuple of (axis, Fraction) pairs, sorted by axis

    def __post_init__(self):
        K = int(self.resolution)
        if not is_power_of_three(K):
            raise LatticeError(f"resolution {K} is not a power of 3")
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 2:
            raise LatticeError("cells must be a (k, n) index array")
        if cells.size and (cells.min() < 0 or cells.max() >= K):
            raise LatticeError("cell index outside [0, K)")
        cells = np.unique(cells, axis=0) if len(cells) else cells.reshape(0, cells.shape[1])
        cells.setflags(write=False)
        slices = tuple(sorted((int(a), Fraction(v)) for a, v in dict(self.slices).items()))
        for a, v in slices:
            j_lo, j_hi = _slice_rows(v, K)
            if len(cells) and (cells[:, a].min() < j_lo or cells[:, a].max() > j_hi):
                raise LatticeError(f"cells do not all meet the slice x_{a + 1} = {v}")
        object.__setattr__(self, "resolution", K)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "slices", slices)

    # construction ------------------------------------------------------------
    @classmethod
    def from_cells(cls, resolution: int, cells: Iterable[Sequence[int]], n: int | None = None,
                   slices=()) -> "GridSet":
        arr = np.array(list(cells), dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, n if n is not None else 0)
        return cls(resolution, arr, tuple(dict(slices).items()))

    @classmethod
    def face(cls, n: int, resolution: int, axis: int | None = None, side: str = "low") -> "GridSet":
        """A full (n-1)-face of Q0 (default: the bottom face x_n = -1/2)."""
        axis = n - 1 if axis is None else axis
        j = 0 if side == "low" else resolution - 1
        grids = [np.arange(resolution)] * n
        grids[axis] = np.array([j])
        cells = np.stack(np.meshgrid(*grids, indexing="ij"), -1).reshape(-1, n)
        level = -HALF if side == "low" else HALF
        return cls(resolution, cells, ((axis, level),))

    @classmethod
    def hyperplane(cls, n: int, resolution: int) -> "GridSet":
        """The central slice {x_n = 0} of Q0."""
        mid = (resolution - 1) // 2
        grids = [np.arange(resolution)] * (n - 1) + [np.array([mid])]
        cells = np.stack(np.meshgrid(*grids, indexing="ij"), -1).reshape(-1, n)
        return cls(resolution, cells, ((n - 1, Fraction(0)),))

    @classmethod
    def point(cls, x: Sequence, resolution: int) -> "GridSet":
        """A single point, as the slice of the cell containing it."""
        idx = [min(int((Fraction(v) + HALF) * resolution), resolution - 1) for v in x]
        return cls(resolution, np.array([idx]), tuple((a, Fraction(v)) for a, v in enumerate(x)))

    # basic properties ----------------------------------------------------------
    @property
    def dimension(self) -> int:
        return self.cells.shape[1]

    @property
    def hyperplane_flag(self) -> bool:
        """True if the set lies in {x_n = 0}."""
        return dict(self.slices).get(self.dimension - 1) == 0

    @property
    def free_axes(self) -> list[int]:
        pinned = {a for a, _ in self.slices}
        return [a for a in range(self.dimension) if a not in pinned]

    def __len__(self) -> int:
        return len(self.cells)

    def is_empty(self) -> bool:
        return len(self.cells) == 0

    def __eq__(self, other) -> bool:
        return (isinstance(other, GridSet) and self.resolution == other.resolution
                and self.slices == other.slices and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.resolution, self.slices, self.cells.tobytes()))

    def cell_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(v) for v in c) for c in self.cells}

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Float corners of the represented pieces (pinned axes collapse to the slice)."""
        lo = self.cells / self.resolution - 0.5
        hi = (self.cells + 1) / self.resolution - 0.5
        for a, v in self.slices:
            lo[:, a] = float(v)
            hi[:, a] = float(v)
        return lo, hi

    def refine(self, factor: int = 3) -> "GridSet":
        """The same set at a finer resolution (factor a power of 3)."""
        if not is_power_of_three(factor):
            raise LatticeError("refinement factor must be a power of 3")
        n = self.dimension
        offs = np.stack(np.meshgrid(*[np.arange(factor)] * n, indexing="ij"), -1).reshape(-1, n)
        cells = (self.cells[:, None, :] * factor + offs[None]).reshape(-1, n)
        K = self.resolution * factor
        keep = np.ones(len(cells), dtype=bool)
        for a, v in self.slices:
            j_lo, j_hi = _slice_rows(v, K)
            keep &= (cells[:, a] >= j_lo) & (cells[:, a] <= j_hi)
        return GridSet(K, cells[keep], self.slices)

    def union(self, other: "GridSet") -> "GridSet":
        if self.slices != other.slices:
            raise LatticeError("union needs matching slices")
        a, b = self, other
        while a.resolution < b.resolution:
            a = a.refine()
        while b.resolution < a.resolution:
            b = b.refine()
        return GridSet(a.resolution, np.concatenate([a.cells, b.cells]), a.slices)

    def scaled_third(self) -> "GridSet":
        """The image under x -> x / 3 (exact: resolution 3K, index j + K)."""
        slices = tuple((a, v / 3) for a, v in self.slices)
        return GridSet(3 * self.resolution, self.cells + self.resolution, slices)

    def subset_mask(self, keep: np.ndarray) -> "GridSet":
        return GridSet(self.resolution, self.cells[np.asarray(keep, dtype=bool)], self.slices)

    # serialisation -------------------------------------------------------------
    def linear_indices(self) -> np.ndarray:
        return np.ravel_multi_index(tuple(self.cells.T), (self.resolution,) * self.dimension) \
            if len(self.cells) else np.zeros(0, dtype=np.int64)

    def to_dict(self) -> dict:
        """{resolution, dimension, runs, slices}; runs are [start, length] over sorted linear indices."""
        lin = np.sort(self.linear_indices())
        runs = []
        if len(lin):
            breaks = np.flatnonzero(np.diff(lin) != 1)
            starts = np.concatenate([[0], breaks + 1])
            ends = np.concatenate([breaks, [len(lin) - 1]])
            runs = [[int(lin[s]), int(e - s + 1)] for s, e in zip(starts, ends)]
        return {"resolution": self.resolution, "dimension": self.dimension, "runs": runs,
                "slices": [[a, str(v)] for a, v in self.slices]}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSet":
        K = int(data["resolution"])
        n = int(data["dimension"])
        lin = [np.arange(s, s + length) for s, length in data["runs"]]
        lin = np.concatenate(lin) if lin else np.zeros(0, dtype=np.int64)
        cells = np.stack(np.unravel_index(lin, (K,) * n), -1) if len(lin) else np.zeros((0, n), dtype=np.int64)
        return cls(K, cells, tuple((int(a), Fraction(v)) for a, v in data.get("slices", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "GridSet":
        return cls.from_dict(json.loads(text))


def _slice_rows(v: Fraction, K: int) -> tuple[int, int]:
    """Inclusive range of cell rows (resolution K) whose closed cells contain x = v."""
    t = (v + HALF) * K
    return max(math.ceil(t) - 1, 0), min(math.floor(t), K - 1)


# -- set / cube queries -------------------------------------------------------------


def _axis_ranges(E: GridSet, M: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per axis, the inclusive range of level-M cube indices each piece of E touches."""
    K = E.resolution
    pinned = dict(E.slices)
    out = []
    for a in range(E.dimension):
        j = E.cells[:, a]
        if a in pinned:
            r_lo, r_hi = _slice_rows(pinned[a], M)
            lo = np.full(len(j), r_lo)
            hi = np.full(len(j), r_hi)
        else:
            # closed cell [j/K, (j+1)/K] meets closed cube [k/M, (k+1)/M]
            lo = -((-j * M) // K) - 1
            hi = ((j + 1) * M) // K
        out.append((np.clip(lo, 0, M - 1), np.clip(hi, 0, M - 1)))
    return out


def touched_indices(E: GridSet, M: int) -> np.ndarray:
    """Sorted unique index vectors of the side-1/M cubes of Q0 meeting E."""
    if not is_power_of_three(M):
        raise LatticeError(f"level resolution {M} is not a power of 3")
    n = E.dimension
    if E.is_empty():
        return np.zeros((0, n), dtype=np.int64)
    ranges = _axis_ranges(E, M)
    width = max(int((hi - lo).max()) for lo, hi in ranges) + 1
    offs = np.stack(np.meshgrid(*[np.arange(width)] * n, indexing="ij"), -1).reshape(-1, n)
    lo = np.stack([r[0] for r in ranges], 1)
    hi = np.stack([r[1] for r in ranges], 1)
    out = []
    chunk = max(1, 2_000_000 // len(offs))
    for s in range(0, len(lo), chunk):
        cand = lo[s:s + chunk, None, :] + offs[None]
        ok = np.all(cand <= hi[s:s + chunk, None, :], axis=2)
        out.append(cand[ok])
    return np.unique(np.concatenate(out), axis=0)


def _commensurate(side: Fraction, K: int) -> int:
    M = Fraction(1) / side
    if M.denominator != 1 or not is_power_of_three(int(M)):
        raise LatticeError(f"cube side {side} is not 3^-k")
    if not is_power_of_three(K):
        raise LatticeError(f"set resolution {K} is not a power of 3")
    return int(M)


def cubes_meeting_set(level: Sequence[Cube], E: GridSet) -> list[Cube]:
    """The cubes of ``level`` that intersect E (closed sets), by index arithmetic."""
    if not level:
        return []
    sides = {q.side for q in level}
    if len(sides) != 1:
        raise LatticeError("a tree level must have a single side length")
    M = _commensurate(sides.pop(), E.resolution)
    hit = {tuple(int(v) for v in t) for t in touched_indices(E, M)}
    return [q for q in level if q.index_at(M) in hit]


def count_cubes_meeting(E: GridSet, K: int) -> int:
    """|S|: the number of side-1/K cubes of Q0 meeting E."""
    _commensurate(Fraction(1, K), E.resolution)
    return len(touched_indices(E, K))


def counting_lower_bound_check(E: GridSet, s: float, K: int, search_depth: int | None = None) -> dict:
    """Implied constant |S| / (H^s_inf(E) K^s), using the DP upper bound on the content.

    Because the content enters through an upper bound, the ratio reported is a
    lower bound on the true |S| / (H^s K^s).
    """
    from .gmt import hausdorff_content

    if E.is_empty():
        raise LatticeError("counting bound needs a nonempty set")
    count = count_cubes_meeting(E, K)
    content = hausdorff_content(E, s, search_depth=search_depth)
    if content.upper == 0.0:
        return {"K": K, "s": s, "count": count, "content_upper": 0.0, "ratio": None,
                "vacuous": True}
    return {"K": K, "s": s, "count": count, "content_upper": content.upper,
            "ratio": count / (content.upper * K**s), "vacuous": False}
