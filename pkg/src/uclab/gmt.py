"""Riesz energies and capacities, Hausdorff content, and fractal test sets.

Sets are ``GridSet``s (unions of lattice cells, optionally sliced to a
hyperplane).  Measures are discrete: one atom per cell, with the within-cell
self-interaction of a uniform cell added in closed form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .lattice import HALF, GridSet, log3

SPLIT_TIE = 1e-12  # a split must beat the whole node by this relative margin


# -- measures -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms; optionally each atom stands for a uniform cube cell.

    ``cell_side``/``cell_dim`` describe the cells (side h, dimension k); when
    given, the energy adds each cell's uniform self-energy.  ``lattice`` holds
    integer cell coordinates used for exact near-neighbour corrections.
    """

    points: np.ndarray
    weights: np.ndarray
    cell_side: float | None = None
    cell_dim: int | None = None
    lattice: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def atoms(self) -> list[tuple[tuple[float, ...], float]]:
        return [(tuple(p), float(w)) for p, w in zip(self.points, self.weights)]

    def normalized(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights / self.weights.sum(), self.cell_side,
                               self.cell_dim, self.lattice)

    def with_weights(self, weights: np.ndarray) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, weights, self.cell_side, self.cell_dim, self.lattice)

    @classmethod
    def point_masses(cls, points, weights=None) -> "DiscreteMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.ones(len(pts)) if weights is None else weights
        return cls(pts, w)

    @classmethod
    def uniform_on(cls, E: GridSet) -> "DiscreteMeasure":
        """Uniform probability measure on E: equal mass per cell, atoms at piece centres."""
        if E.is_empty():
            raise ValueError("cannot put a probability measure on an empty set")
        lo, hi = E.cell_bounds()
        k = len(E.free_axes)
        return cls((lo + hi) / 2, np.full(len(E), 1.0 / len(E)), 1.0 / E.resolution, k,
                   E.cells[:, E.free_axes] if k else None)

    @classmethod
    def uniform_segment(cls, atoms: int, length: float = 1.0) -> "DiscreteMeasure":
        """Uniform probability on [0, length] x {0}, one atom per equal cell."""
        h = length / atoms
        x = (np.arange(atoms) + 0.5) * h
        return cls(np.stack([x, np.zeros(atoms)], 1), np.full(atoms, 1.0 / atoms), h, 1,
                   np.arange(atoms)[:, None])

    def merged(self, tol: float = 0.0) -> "DiscreteMeasure":
        """Merge identical atoms; raise if distinct atoms are closer than ``tol``."""
        uniq, inv = np.unique(self.points, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        if len(uniq) == len(self.points) and tol <= 0:
            return self
        w = np.bincount(inv, weights=self.weights)
        if tol > 0 and len(uniq) > 1:
            from scipy.spatial import cKDTree

            if cKDTree(uniq).query_pairs(tol):
                raise ValueError(f"distinct atoms closer than merge tolerance {tol}")
        lattice = None
        if self.lattice is not None and len(uniq) == len(self.points):
            lattice = self.lattice
        return DiscreteMeasure(uniq, w, self.cell_side, self.cell_dim, lattice)


@lru_cache(maxsize=None)
def box_energy(sides: tuple[float, ...], s: float) -> float:
    """Integral over R^k of prod_i (L_i - |z_i|)_+ |z|^-s dz for box sides L.

    In polar coordinates the radial integral is a polynomial in R = min_i L_i / w_i;
    only the angular integral (over one orthant, with breakpoints at the kinks of
    R) is numerical.
    """
    k = len(sides)
    if min(sides) <= 0:
        return 0.0
    if not 0 < s < k:
        return math.inf

    def radial(w):
        R = min(L / wi if wi > 0 else math.inf for L, wi in zip(sides, w))
        poly = np.array([1.0])
        for L, wi in zip(sides, w):
            poly = np.convolve(poly, [L, -wi])  # ascending powers of r
        return sum(a * R ** (k - s + j) / (k - s + j) for j, a in enumerate(poly))

    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
    if k == 1:
        return 2 * radial((1.0,))
    if k == 2:
        val = integrate.quad(lambda t: radial((math.cos(t), math.sin(t))), 0, math.pi / 2,
                             points=[math.atan2(sides[1], sides[0])], **opts)[0]
        return 4 * val
    if k == 3:
        def over_theta(phi):
            c, sn = math.cos(phi), math.sin(phi)
            a = min(sides[0] / c if c > 0 else math.inf, sides[1] / sn if sn > 0 else math.inf)
            return integrate.quad(
                lambda th: radial((math.sin(th) * c, math.sin(th) * sn, math.cos(th))) * math.sin(th),
                0, math.pi / 2, points=[math.atan(a / sides[2])], **opts)[0]
        val = integrate.quad(over_theta, 0, math.pi / 2, points=[math.atan2(sides[1], sides[0])],
                             epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        return 8 * val
    raise ValueError("uniform-cell energies are implemented for k = 1, 2, 3")


def cell_self_energy(k: int, s: float) -> float:
    """E|X - Y|^-s for X, Y independent uniform on the unit k-cube."""
    return box_energy((1.0,) * k, s)


@lru_cache(maxsize=None)
def cell_pair_energy(offset: tuple[int, ...], s: float) -> float:
    """E|c + X - Y|^-s for X, Y uniform on the unit k-cube and integer offset c.

    X - Y has the tent density prod(1 - |z_i|)_+, and a tent centred at m >= 1
    (symmetrised in sign) is half the second difference of (L - |z|)_+ in L,
    so the energy is a signed sum of box energies with sides in {m-1, m, m+1}.
    """
    parts = [[(1, 1.0)] if m == 0 else [(m + 1, 0.5), (m, -1.0), (m - 1, 0.5)] for m in offset]
    total = 0.0
    for combo in itertools.product(*parts):
        coef = math.prod(c for _, c in combo)
        total += coef * box_energy(tuple(float(L) for L, _ in combo), s)
    return total


NEAR_FIELD = 3  # exact cell-pair energies up to this Chebyshev offset


def far_kernel(r: np.ndarray, s: float, k: int) -> np.ndarray:
    """Upper bound on E|x + X - Y|^-s for unit k-cells at distance r (cell units).

    Second-order Taylor expansion of |x|^-s about the offset (odd terms vanish
    by symmetry, Var(Z_i) = 1/6), plus the Lagrange remainder bounded with
    |D^4 |x|^-s| <= s(s+1)(s+2)(s+3) |x|^(-s-4) on |x| >= r - sqrt(k).
    The remainder is only added beyond the near field: closer pairs are always
    overwritten by exact energies.
    """
    r = np.asarray(r, dtype=float)
    moment4 = k / 15 + k * (k - 1) / 36  # E|Z|^4
    rising = s * (s + 1) * (s + 2) * (s + 3)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r ** -s + s * (s + 2 - k) / 12 * r ** (-s - 2)
        gap = r - math.sqrt(k)
        rem = np.where(r > NEAR_FIELD + 0.5, rising / 24 * moment4 * np.abs(gap) ** (-s - 4), 0.0)
    return out + rem


def _near_offsets(k: int) -> list[tuple[int, ...]]:
    rng = range(-NEAR_FIELD, NEAR_FIELD + 1)
    return [c for c in itertools.product(rng, repeat=k) if any(c)]


def _near_field(mu: DiscreteMeasure, s: float):
    """Sparse corrections (i, j, delta): exact cell-pair energy minus the far kernel."""
    if mu.lattice is None or mu.cell_side is None:
        return None
    lat = np.asarray(mu.lattice, dtype=np.int64)
    k = lat.shape[1]
    span = int(lat.max() - lat.min()) + 2 * NEAR_FIELD + 1
    base = lat - lat.min(0) + NEAR_FIELD
    keys = (base * span ** np.arange(k)).sum(1)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    h_s = mu.cell_side ** -s
    rows, cols, vals = [], [], []
    for c in _near_offsets(k):
        target = keys + int((np.array(c) * span ** np.arange(k)).sum())
        pos = np.searchsorted(sorted_keys, target)
        pos = np.minimum(pos, len(keys) - 1)
        hit = sorted_keys[pos] == target
        if not hit.any():
            continue
        exact = cell_pair_energy(tuple(sorted(abs(x) for x in c)), s)
        delta = h_s * (exact - float(far_kernel(math.hypot(*c), s, k)))
        rows.append(np.nonzero(hit)[0])
        cols.append(order[pos[hit]])
        vals.append(np.full(int(hit.sum()), delta))
    if not rows:
        return None
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _pair_sum(points: np.ndarray, weights: np.ndarray, kernel, chunk: int = 1024) -> np.ndarray:
    """Potentials U_i = sum_{j != i} w_j kernel(|x_i - x_j|), chunked."""
    out = np.empty(len(points))
    sq = np.einsum("ij,ij->i", points, points)
    for a in range(0, len(points), chunk):
        b = min(a + chunk, len(points))
        d2 = sq[a:b, None] + sq[None] - 2 * points[a:b] @ points.T
        np.maximum(d2, 0, out=d2)
        vals = kernel(np.sqrt(d2))
        vals[np.arange(b - a), np.arange(a, b)] = 0.0
        out[a:b] = vals @ weights
    return out


class _EnergyOperator:
    """The quadratic form w -> w^T K w of a measure's atoms (for fixed s).

    With the ``uniform_cell`` correction each atom is a uniform cell: the diagonal
    is the cell self-energy, near pairs are exact, and far pairs use an upper
    bound, so the energy of the piecewise-uniform measure is never underestimated.
    """

    def __init__(self, mu: DiscreteMeasure, s: float, correction: str):
        self.mu = mu
        self.s = s
        self.self_coef = 0.0
        self.near = None
        cells = correction == "uniform_cell" and mu.cell_side is not None
        if cells:
            h, k = mu.cell_side, int(mu.cell_dim)
            self.self_coef = h ** -s * cell_self_energy(k, s)
            self.near = _near_field(mu, s)
            self._kernel_fn = lambda d: h ** -s * far_kernel(d / h, s, k)
        else:
            self._kernel_fn = lambda d: np.where(d > 0, d, np.inf) ** -s
        self._dense = len(mu.points) <= 3000
        if self._dense:
            d = np.linalg.norm(mu.points[:, None] - mu.points[None], axis=2)
            self._kernel = self._kernel_fn(d)
            np.fill_diagonal(self._kernel, 0.0)

    def potential(self, w: np.ndarray) -> np.ndarray:
        u = self._kernel @ w if self._dense else _pair_sum(self.mu.points, w, self._kernel_fn)
        u = u + self.self_coef * w
        if self.near is not None:
            r, c, v = self.near
            u = u + np.bincount(r, weights=v * w[c], minlength=len(w))
        return u

    def energy(self, w: np.ndarray) -> float:
        return float(w @ self.potential(w))


def riesz_energy(mu: DiscreteMeasure, s: float, correction: str = "uniform_cell") -> float:
    """I_s(mu) = sum_{i != j} w_i w_j |x_i - x_j|^-s plus cell self-energies.

    ``correction``: ``uniform_cell`` treats atoms as uniform cells (exact self and
    near-neighbour energies, upper-bounded far field); ``drop`` uses midpoint
    values and leaves the diagonal out.
    Pure point masses (no cell data) have infinite self-energy: a single atom
    gives +inf, several atoms give the off-diagonal sum.
    """
    if not s > 0:
        raise ValueError("the Riesz exponent must be positive")
    if correction not in ("uniform_cell", "drop"):
        raise ValueError(f"unknown correction {correction!r}")
    mu = mu.merged()
    if len(mu.points) == 1 and (mu.cell_side is None or correction == "drop"):
        return math.inf
    if mu.cell_side is not None and correction == "uniform_cell" and s >= mu.cell_dim:
        return math.inf
    return _EnergyOperator(mu, s, correction).energy(mu.weights)


@dataclass
class CapacityResult:
    s: float
    capacity_lower: float
    energy: float
    family: str
    sweeps: int
    energies: list = field(default_factory=list)
    correction: str = "uniform_cell"

    def as_dict(self) -> dict:
        return {"s": self.s, "capacity_lower": self.capacity_lower, "energy": self.energy,
                "family": self.family, "sweeps": self.sweeps, "energies": list(self.energies),
                "correction": self.correction}


def capacity_report(E: GridSet, s: float, measure_family: str = "uniform", sweeps: int = 20,
                    correction: str = "uniform_cell") -> CapacityResult:
    """Admissible-measure lower bound on Cap_s(E) with its energy history."""
    n = E.dimension
    if not 0 < s < n:
        raise ValueError(f"capacity exponent s={s} outside (0, n={n}): energies diverge")
    if E.is_empty():
        return CapacityResult(s, 0.0, math.inf, measure_family, 0, [], correction)
    if measure_family not in ("uniform", "greedy_redistribution"):
        raise ValueError(f"unknown measure family {measure_family!r}")
    mu = DiscreteMeasure.uniform_on(E)
    if s >= len(E.free_axes):
        # a uniform measure on a k-dimensional set has infinite s-energy for s >= k
        return CapacityResult(s, 0.0, math.inf, measure_family, 0, [], correction)
    op = _EnergyOperator(mu, s, correction)
    w = mu.weights.copy()
    energy = op.energy(w)
    history = [energy]
    done = 0
    if measure_family == "greedy_redistribution":
        for done in range(1, sweeps + 1):
            u = op.potential(w)
            step = 1.0
            improved = False
            while step > 1e-4:
                trial = w * (energy / u) ** step
                trial /= trial.sum()
                e_trial = op.energy(trial)
                if e_trial < energy:
                    w, energy, improved = trial, e_trial, True
                    break
                step /= 2
            history.append(energy)
            if not improved:
                break
    return CapacityResult(s, 1.0 / energy, energy, measure_family, done, history, correction)


def riesz_capacity_lower(E: GridSet, s: float, measure_family: str = "uniform", sweeps: int = 20) -> float:
    """Lower bound on Cap_s(E): 1 / I_s(mu) for a constructed probability measure."""
    return capacity_report(E, s, measure_family, sweeps).capacity_lower


# -- Hausdorff content --------------------------------------------------------------


@dataclass
class ContentEstimate:
    s: float
    upper: float
    lower: float
    cover: tuple  # ((level, index tuple), ...) of the realising triadic cover
    coarse: bool = False
    triadic_factor: float = 1.0  # arbitrary covers can beat triadic ones by at most this

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper * (1 + 1e-12) + 1e-300:
            raise ValueError(f"content bounds out of order: {self.lower} > {self.upper}")

    def cover_gridset(self, n: int) -> GridSet:
        """The realising cover rasterised at its finest level (for audit)."""
        if not self.cover:
            return GridSet(1, np.zeros((0, n), dtype=np.int64))
        top = max(level for level, _ in self.cover)
        cells = []
        for level, idx in self.cover:
            f = 3 ** (top - level)
            offs = np.stack(np.meshgrid(*[np.arange(f)] * n, indexing="ij"), -1).reshape(-1, n)
            cells.append(np.asarray(idx)[None] * f + offs)
        return GridSet(3**top, np.concatenate(cells))

    def as_dict(self) -> dict:
        return {"s": self.s, "upper": self.upper, "lower": self.lower, "coarse": self.coarse,
                "triadic_factor": self.triadic_factor,
                "cover": [[lvl, list(idx)] for lvl, idx in self.cover]}


def _piece_bounds_int(E: GridSet) -> tuple[np.ndarray, np.ndarray]:
    """Integer piece corners in units of 1/K; pinned axes use the cell row for the node
    assignment and carry zero extent."""
    lo = E.cells.copy()
    hi = E.cells + 1
    for a, _ in E.slices:
        hi[:, a] = lo[:, a]
    return lo, hi


def content_upper(E: GridSet, s: float, search_depth: int | None = None):
    """Optimal triadic cover by dynamic programming; returns (value, cover, coarse)."""
    if E.is_empty():
        raise ValueError("content of an empty set")
    K = E.resolution
    full = log3(K)
    depth = full if search_depth is None else min(int(search_depth), full)
    coarse = depth < full
    n = E.dimension
    plo, phi = _piece_bounds_int(E)
    pinned = [a for a, _ in E.slices]
    # exact extents along pinned axes are zero; elsewhere they come from the pieces
    levels = []
    node = E.cells // (3 ** (full - depth))
    keys, inv = np.unique(node, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    lo = np.full((len(keys), n), np.iinfo(np.int64).max)
    hi = np.full((len(keys), n), np.iinfo(np.int64).min)
    np.minimum.at(lo, inv, plo)
    np.maximum.at(hi, inv, phi)
    for a in pinned:
        hi[:, a] = lo[:, a]
    cost = _diam_cost(lo, hi, K, s)
    levels.append({"keys": keys, "lo": lo, "hi": hi, "cost": cost, "split": np.zeros(len(keys), bool)})
    for _ in range(depth):
        child = levels[-1]
        parent = child["keys"] // 3
        keys, inv = np.unique(parent, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        lo = np.full((len(keys), n), np.iinfo(np.int64).max)
        hi = np.full((len(keys), n), np.iinfo(np.int64).min)
        np.minimum.at(lo, inv, child["lo"])
        np.maximum.at(hi, inv, child["hi"])
        whole = _diam_cost(lo, hi, K, s)
        split = np.bincount(inv, weights=child["cost"], minlength=len(keys))
        use_split = split < whole * (1 - SPLIT_TIE)
        child["parent"] = inv
        levels.append({"keys": keys, "lo": lo, "hi": hi, "cost": np.where(use_split, split, whole),
                       "split": use_split})
    levels.reverse()  # levels[l] is now tree level l (root first)
    # recover the cover top-down
    cover = []
    active = np.array([0])
    for lvl in range(depth + 1):
        info = levels[lvl]
        for i in active[~info["split"][active]]:
            cover.append((lvl, tuple(int(v) for v in info["keys"][i])))
        go = active[info["split"][active]]
        if lvl == depth or len(go) == 0:
            break
        nxt = levels[lvl + 1]
        active = np.flatnonzero(np.isin(nxt["parent"], go))
    return float(levels[0]["cost"][0]), tuple(cover), coarse


def _diam_cost(lo, hi, K, s):
    ext = (hi - lo).astype(np.float64)
    return (np.sqrt(np.einsum("ij,ij->i", ext, ext)) / K) ** s


def _interval_growth(mass: np.ndarray, s: float) -> float:
    """sup over intervals I of mu(I) / |I|^s for a 1D measure uniform within unit-width cells.

    With density constant on each cell and 0 <= s <= 1 the ratio is
    quasi-convex in each endpoint inside a cell, so cell boundaries suffice.
    Lengths are measured in units where the whole axis has length 1.
    """
    K = len(mass)
    if s == 0:
        return 1.0
    csum = np.concatenate([[0.0], np.cumsum(mass)])
    best = 0.0
    lengths = np.arange(1, K + 1)
    for length in lengths:
        window = csum[length:] - csum[:-length]
        best = max(best, float(window.max()) / (length / K) ** s)
    return best


def _is_product(E: GridSet) -> bool:
    sizes = [len(np.unique(E.cells[:, a])) for a in range(E.dimension)]
    return math.prod(sizes) == len(E)


def growth_constant(E: GridSet, s: float) -> float:
    """C with mu(U) <= C diam(U)^s for all U, mu the uniform measure on E.

    Product sets: product of exact one-dimensional interval suprema (the
    exponent is split across free axes, at most 1 per axis).  Otherwise a
    window bound on a (possibly coarsened) mass grid, combined with the
    within-cell density bound.
    """
    free = E.free_axes
    k = len(free)
    if s > k:
        return math.inf
    if _is_product(E):
        K = E.resolution
        margins = []
        for a in free:
            rows = np.bincount(E.cells[:, a], minlength=K).astype(float)
            rows = (rows > 0).astype(float)
            margins.append(rows / rows.sum())
        order = np.argsort([-np.count_nonzero(m) for m in margins], kind="stable")
        remaining = s
        C = 1.0
        for i in order:
            share = min(1.0, remaining)
            remaining -= share
            C *= _interval_growth(margins[i], share)
        return C
    return _window_growth(E, s)


def _window_growth(E: GridSet, s: float, max_cells: int = 4_000_000) -> float:
    free = E.free_axes
    k = len(free)
    K = E.resolution
    density = (1.0 / len(E)) * K**k  # uniform mass per fine cell over its k-volume
    omega = math.pi ** (k / 2) / math.gamma(k / 2 + 1)
    coarse = 1
    while (K // coarse) ** k > max_cells:
        coarse *= 3
    R = K // coarse
    grid = np.zeros((R,) * k)
    np.add.at(grid, tuple((E.cells[:, free] // coarse).T), 1.0 / len(E))
    csums = grid
    for ax in range(k):
        csums = np.concatenate([np.zeros_like(np.take(csums, [0], axis=ax)), np.cumsum(csums, axis=ax)], axis=ax)

    def window_max(m):
        # max mass over windows of m blocks per axis
        out = csums
        for ax in range(k):
            n_ax = out.shape[ax]
            m_ax = min(m, n_ax - 1)
            out = np.take(out, np.arange(m_ax, n_ax), axis=ax) - np.take(out, np.arange(0, n_ax - m_ax), axis=ax)
        return float(out.max())

    C = 0.0
    prev = 0
    m = 1
    t_cap = math.sqrt(k)
    while True:
        t_hi = m / R
        dens = density * omega * 2.0**-k * t_hi ** (k - s)
        bound = dens
        if prev > 0:
            bound = min(bound, window_max(m + 1) / (prev / R) ** s)
        C = max(C, bound)
        if t_hi >= t_cap:
            break
        prev = m
        m = max(m + 1, int(math.ceil(m * 1.25)))
    return max(C, 1.0 / t_cap**s)


def hausdorff_content(E: GridSet, s: float, search_depth: int | None = None) -> ContentEstimate:
    """Two-sided estimate of H^s_inf(E).

    Upper: optimal triadic cover (each node is covered whole, costing the
    diameter of E's part in it to the power s, or split into its children).
    Lower: mass distribution principle, 1 / growth_constant.
    """
    if E.is_empty():
        raise ValueError("content of an empty set")
    upper, cover, coarse = content_upper(E, s, search_depth)
    C = growth_constant(E, s)
    lower = 0.0 if not math.isfinite(C) else min(1.0 / C, upper)
    n = E.dimension
    return ContentEstimate(s, upper, lower, cover, coarse, n ** (s / 2) * 2**s)


# -- fractal sets -------------------------------------------------------------------


def cantor_ratio(dimension: float) -> float:
    """Contraction ratio of the two-piece Cantor set of the given dimension in (0, 1)."""
    return 2.0 ** (-1.0 / dimension)


def _cantor_rows(ratio, depth: int, K: int) -> np.ndarray:
    """Rows of a K-cell partition of [-1/2, 1/2] whose interiors meet the depth-level intervals."""
    exact = isinstance(ratio, Fraction)
    intervals = [(-HALF, HALF)] if exact else [(-0.5, 0.5)]
    for _ in range(depth):
        nxt = []
        for a, b in intervals:
            length = (b - a) * ratio
            nxt += [(a, a + length), (b - length, b)]
        intervals = nxt
    rows = set()
    for a, b in intervals:
        if exact:
            j0 = math.floor((a + HALF) * K)
            j1 = math.ceil((b + HALF) * K)
        else:
            eps = 1e-9
            j0 = math.floor((a + 0.5) * K + eps)
            j1 = math.ceil((b + 0.5) * K - eps)
        rows.update(range(max(j0, 0), min(j1, K)))
    return np.array(sorted(rows), dtype=np.int64)


GENERIC_LEVEL = Fraction(1, 7)  # off every triadic boundary


def cantor_product_set(target_dimension: float, n: int, depth: int, placement: str = "hyperplane") -> GridSet:
    """Product of full intervals, one two-piece Cantor factor and points.

    Dimension t splits as floor(t) full axes plus a Cantor axis of dimension
    frac(t) (ratio 2^(-1/frac)); remaining axes are pinned: to x_n = 0 for
    ``hyperplane`` placement, to an off-lattice level otherwise.
    """
    if not 0 < target_dimension < n:
        raise ValueError(f"target dimension {target_dimension} outside (0, {n})")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if placement not in ("hyperplane", "generic"):
        raise ValueError(f"unknown placement {placement!r}")
    full = int(math.floor(target_dimension + 1e-12))
    frac = target_dimension - full
    if abs(frac) < 1e-12:
        frac = 0.0
    used = full + (1 if frac > 0 else 0)
    if placement == "hyperplane" and used > n - 1:
        raise ValueError(f"dimension {target_dimension} cannot sit in a hyperplane of R^{n}")
    if frac > 0:
        ratio = cantor_ratio(frac)
        if abs(ratio - 1 / 3) < 1e-12:
            ratio = Fraction(1, 3)
        K = 3 ** max(depth, math.ceil(math.log(float(ratio) ** -depth, 3) - 1e-9))
        if isinstance(ratio, Fraction):
            K = 3**depth
    else:
        ratio = None
        K = 3**depth
    axes_rows = []
    slices = []
    for a in range(n):
        if a < full:
            axes_rows.append(np.arange(K))
        elif a == full and frac > 0:
            axes_rows.append(_cantor_rows(ratio, depth, K))
        else:
            level = Fraction(0) if placement == "hyperplane" else GENERIC_LEVEL
            row = min(int((level + HALF) * K), K - 1)
            axes_rows.append(np.array([row]))
            slices.append((a, level))
    cells = np.stack(np.meshgrid(*axes_rows, indexing="ij"), -1).reshape(-1, n)
    return GridSet(K, cells, tuple(slices))


# -- Claim-1 mechanism --------------------------------------------------------------


def claim1_check(E: GridSet, delta: float) -> dict:
    """Growth at exponent n-2+delta/2 bounds the energy at n-2+delta/4.

    With mu(B(x, r)) <= C r^a for a = n-2+delta/2 and t = n-2+delta/4,
    I_t(mu) = int int_0^inf t r^(-t-1) mu(B(x, r)) dr dmu
           <= D^(-t) + t C D^(delta/4) / (delta/4),  D = diam(E).
    C is measured (balls of radius r have diameter 2r, so C = 2^a C_diam).
    """
    n = E.dimension
    a = n - 2 + delta / 2
    t = n - 2 + delta / 4
    if t <= 0:
        raise ValueError("n - 2 + delta/4 must be positive")
    c_diam = growth_constant(E, a)
    C = 2**a * c_diam
    lo, hi = E.cell_bounds()
    D = float(np.linalg.norm(hi.max(axis=0) - lo.min(axis=0)))
    mu = DiscreteMeasure.uniform_on(E)
    energy = riesz_energy(mu, t)
    bound = D**-t + t * C * D ** (delta / 4) / (delta / 4)
    return {"n": n, "delta": delta, "growth_exponent": a, "energy_exponent": t,
            "growth_constant": C, "diameter": D, "energy": energy, "bound": bound,
            "holds": bool(energy <= bound)}
