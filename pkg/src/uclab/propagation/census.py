"""Bad-cube censuses over triadic subdivisions, and the thinness of bad sets.

A cube q is classified with two one-sided numbers:

* ``lower``: a certified lower bound on N(q) over a point grid and a radius
  ladder (see :func:`uclab.doubling.maximal_doubling_lower`);
* ``upper``: the certified doubling index at the centre with r = side and
  ratio 10n, plus an additive comparability constant C0.  C0 is measured in
  the same run as the largest excess of ``lower`` over that centre index.

bad: lower > N + margin; good: upper < N - margin; otherwise undecided.
Undecided cubes count as bad in every ceiling comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..doubling import (VANISHING, VanishingGradient, ball_sup_bounds, default_ladder,
                        doubling_indices, maximal_doubling, maximal_doubling_lower)
from ..gmt import capacity_report
from ..harmonic import HarmonicFunction, SingularPointError
from ..lattice import Cube, GridSet, LatticeError, branching_of, hyperplane_children, is_power_of_three, subdivide

BAD, GOOD, UNDECIDED = "bad", "good", "undecided"


class Inapplicable(Exception):
    """An experiment precondition failed; the outcome is reported, not an error."""

    def __init__(self, reason: str, **details):
        super().__init__(reason)
        self.reason = reason
        self.details = details


@dataclass
class CensusResult:
    level: int
    threshold_N: float
    bad_count: int
    undecided_count: int
    total_count: int
    bound: float
    context: dict = field(default_factory=dict)
    classification: GridSet | None = None  # bad or undecided cubes, for audit

    def __post_init__(self):
        if self.bad_count + self.undecided_count > self.total_count:
            raise ValueError("bad + undecided exceeds the number of cubes")

    @property
    def pessimistic_count(self) -> int:
        return self.bad_count + self.undecided_count

    @property
    def within_bound(self) -> bool:
        return self.pessimistic_count <= self.bound

    def as_dict(self) -> dict:
        out = {"level": self.level, "threshold_N": self.threshold_N, "bad_count": self.bad_count,
               "undecided_count": self.undecided_count, "total_count": self.total_count,
               "bound": self.bound, "within_bound": self.within_bound, "context": self.context}
        if self.classification is not None:
            out["classification"] = self.classification.to_dict()
        return out


@dataclass
class Classification:
    lower: np.ndarray
    center_upper: np.ndarray
    upper: np.ndarray
    status: list
    C0: float


def ceiling(A: int, n: int, delta: float, generation: int = 1, eta: float = 0.5) -> float:
    """eta (2A+1)^(generation (n-2+delta)); eta = 1/2 for the cube census."""
    return eta * float(2 * A + 1) ** (generation * (n - 2 + delta))


def _center_index_upper(u: HarmonicFunction, cubes: list[Cube], ratio: float, tolerance: float) -> np.ndarray:
    """Certified upper end of log(sup B(x_q, ratio l) / sup B(x_q, l))."""
    centers = np.array([q.center_array for q in cubes])
    sides = np.array([float(q.side) for q in cubes])
    lo, hi = ball_sup_bounds(u, np.concatenate([centers, centers]),
                             np.concatenate([sides, ratio * sides]), tolerance)
    k = len(cubes)
    if np.any(hi[:k] < VANISHING):
        raise VanishingGradient("sup |grad u| vanishes on a cube-centred ball")
    return np.log(hi[k:]) - np.log(np.maximum(lo[:k], VANISHING))


def classify_cubes(u: HarmonicFunction, cubes: list[Cube], N: float, margin: float | None = None,
                   density: int = 3, rungs: int = 3, ratio: float | None = None,
                   tolerance: float = 1e-2, C0: float | None = None, batch: int = 2048) -> Classification:
    """Three-way classification of equal-sized cubes against the threshold N."""
    if not cubes:
        return Classification(np.zeros(0), np.zeros(0), np.zeros(0), [], 0.0)
    n = cubes[0].dimension
    ratio = 10.0 * n if ratio is None else float(ratio)
    margin = 0.05 * N if margin is None else float(margin)
    if u.poly is not None and u.poly.degree <= 1:
        zero = np.zeros(len(cubes))
        return Classification(zero, zero, zero, [GOOD if N - margin > 0 else UNDECIDED] * len(cubes), 0.0)
    ladder = default_ladder(float(cubes[0].side), rungs)
    lows = []
    for s in range(0, len(cubes), batch):
        part = cubes[s:s + batch]
        lo = np.array([q.bounds()[0] for q in part])
        hi = np.array([q.bounds()[1] for q in part])
        lows.append(maximal_doubling_lower(u, lo, hi, density, ratio=ratio, tolerance=tolerance,
                                           ladder=ladder)[0])
    lower = np.concatenate(lows)
    center = np.concatenate([_center_index_upper(u, cubes[s:s + batch], ratio, tolerance)
                             for s in range(0, len(cubes), batch)])
    if C0 is None:
        C0 = max(0.0, float(np.max(lower - center)))
    upper = center + C0
    status = [BAD if lo > N + margin else GOOD if up < N - margin else UNDECIDED
              for lo, up in zip(lower, upper)]
    return Classification(lower, center, upper, status, float(C0))


def _classification_map(cubes: list[Cube], status: list) -> GridSet | None:
    """Bad and undecided cubes as cells of the Q0 lattice (None if Q is off-lattice)."""
    side = cubes[0].side
    M = Fraction(1) / side
    if M.denominator != 1 or not is_power_of_three(int(M)):
        return None
    n = cubes[0].dimension
    try:
        cells = [q.index_at(int(M)) for q, s in zip(cubes, status) if s != GOOD]
    except LatticeError:
        return None
    return GridSet.from_cells(int(M), cells, n=n)


def generation(Q: Cube, A: int, k: int) -> list[Cube]:
    level = [Q]
    for _ in range(k):
        level = [c for q in level for c in subdivide(q, A)]
    return level


def precondition(u: HarmonicFunction, Q: Cube, N: float, c: float, grid_density: int = 9,
                 tolerance: float = 1e-3) -> float:
    """Lower bound on N(Q); raises Inapplicable unless it is <= (1 + c) N."""
    lo, hi = Q.bounds()
    n = Q.dimension
    if not u.harmonic_on_box(lo - 49.5 * (hi - lo), hi + 49.5 * (hi - lo)):
        raise Inapplicable("u is not harmonic on 100Q")
    try:
        rep = maximal_doubling(u, Q, grid_density, tolerance=tolerance)
    except SingularPointError as exc:
        raise Inapplicable(str(exc))
    if rep.index_value > (1 + c) * N:
        raise Inapplicable("maximal doubling of Q exceeds (1 + c) N", NQ_lower=rep.index_value,
                           N=N, c=c, ratio=10.0 * n)
    return rep.index_value


def bad_cube_census(u: HarmonicFunction, Q: Cube, A: int, N: float, generations: int = 1,
                    c: float = 0.1, deltas=(0.5,), margin: float | None = None, density: int = 3,
                    rungs: int = 3, tolerance: float = 1e-2, check_precondition: bool = True
                    ) -> list[CensusResult]:
    """Count bad subcubes of Q generation by generation.

    Generation k uses all (2A+1)^(kn) subcubes, each cube being a child of Q
    for the branching (2A+1)^k, so its ceiling is 1/2 (2A+1)^(k (n-2+delta)).
    The first delta sets ``bound``; every requested delta is in the context.
    """
    branching_of(A)
    n = Q.dimension
    NQ = precondition(u, Q, N, c) if check_precondition else None
    margin_used = 0.05 * N if margin is None else margin
    out = []
    for k in range(1, generations + 1):
        cubes = generation(Q, A, k)
        cl = classify_cubes(u, cubes, N, margin_used, density, rungs, tolerance=tolerance)
        bad = cl.status.count(BAD)
        und = cl.status.count(UNDECIDED)
        bounds = {str(d): ceiling(A, n, d, k) for d in deltas}
        ctx = {"A": A, "c": c, "deltas": list(deltas), "eta": 0.5, "margin": margin_used,
               "density": density, "rungs": rungs, "ratio": 10.0 * n, "C0_measured": cl.C0,
               "NQ_lower": NQ, "ceilings": bounds,
               "within": {d: bad + und <= b for d, b in bounds.items()},
               "counting": "pessimistic: undecided counted as bad"}
        out.append(CensusResult(k, N, bad, und, len(cubes), ceiling(A, n, deltas[0], k), ctx,
                                _classification_map(cubes, cl.status)))
    return out


def _double_cube_lower(u: HarmonicFunction, Q: Cube, density: int, tolerance: float) -> float:
    try:
        return maximal_doubling(u, Q.scaled(2), density, tolerance=tolerance).index_value
    except SingularPointError as exc:
        raise Inapplicable(str(exc))


def hyperplane_census(u: HarmonicFunction, Q: Cube, A: int, N: float, etas=(0.5,), deltas=(0.5,),
                      margin: float | None = None, density: int = 3, rungs: int = 3,
                      tolerance: float = 1e-2, check_precondition: bool = True) -> CensusResult:
    """Census of the children of Q meeting {x_n = 0}, against eta (2A+1)^(n-2+delta)."""
    n = Q.dimension
    if Q.center[-1] != 0:
        raise Inapplicable("Q is not centred on the hyperplane {x_n = 0}")
    N2Q = _double_cube_lower(u, Q, 9, 1e-3) if check_precondition else None
    if check_precondition and N2Q > 2 * N:
        raise Inapplicable("maximal doubling of 2Q exceeds 2N", N2Q_lower=N2Q, N=N)
    cubes = hyperplane_children(Q, A)
    margin_used = 0.05 * N if margin is None else margin
    cl = classify_cubes(u, cubes, N, margin_used, density, rungs, tolerance=tolerance)
    bad = cl.status.count(BAD)
    und = cl.status.count(UNDECIDED)
    table = [{"eta": e, "delta": d, "bound": ceiling(A, n, d, 1, e), "within": bad + und <= ceiling(A, n, d, 1, e)}
             for e in etas for d in deltas]
    ctx = {"A": A, "etas": list(etas), "deltas": list(deltas), "margin": margin_used, "density": density,
           "rungs": rungs, "C0_measured": cl.C0, "N2Q_lower": N2Q, "table": table,
           "counting": "pessimistic: undecided counted as bad"}
    return CensusResult(1, N, bad, und, len(cubes), table[0]["bound"], ctx, _classification_map(cubes, cl.status))


def capacity_census(u: HarmonicFunction, Q: Cube, A: int, N: float, delta: float = 0.5,
                    measure_family: str = "uniform", margin: float | None = None, density: int = 3,
                    rungs: int = 3, tolerance: float = 1e-2) -> dict:
    """Capacity of the bad hyperplane cubes (cut by {x_n = 0}) against N(2Q)/N."""
    n = Q.dimension
    s = n - 2 + delta
    if Q.center[-1] != 0:
        raise Inapplicable("Q is not centred on the hyperplane {x_n = 0}")
    cubes = hyperplane_children(Q, A)
    margin_used = 0.05 * N if margin is None else margin
    cl = classify_cubes(u, cubes, N, margin_used, density, rungs, tolerance=tolerance)
    N2Q = _double_cube_lower(u, Q, 9, 1e-3)
    M = Fraction(1) / cubes[0].side
    if M.denominator != 1 or not is_power_of_three(int(M)):
        raise LatticeError("capacity census needs Q to be a cube of the Q0 lattice")

    def cap(keep):
        cells = [q.index_at(int(M)) for q, st in zip(cubes, cl.status) if st in keep]
        E = GridSet.from_cells(int(M), cells, n=n, slices=((n - 1, Fraction(0)),))
        return capacity_report(E, s, measure_family).capacity_lower, len(cells)

    cap_bad, n_bad = cap((BAD,))
    cap_pess, n_pess = cap((BAD, UNDECIDED))
    return {"A": A, "N": N, "delta": delta, "s": s, "bad_count": n_bad, "pessimistic_count": n_pess,
            "capacity_bad": cap_bad, "capacity_pessimistic": cap_pess, "N2Q_lower": N2Q,
            "doubling_ratio": N2Q / N if N > 0 else None, "measure_family": measure_family,
            "vacuous": n_pess == 0}


# -- thinness of the bad set -------------------------------------------------------


def _directions(n: int, rotations: int) -> np.ndarray:
    """Axis directions plus evenly spread unit vectors (deterministic)."""
    dirs = [np.eye(n)[i] for i in range(n)]
    if n == 2:
        for k in range(1, rotations + 1):
            t = np.pi * k / (rotations + 1)
            dirs.append(np.array([np.cos(t), np.sin(t)]))
    else:
        rng = np.random.default_rng(0)
        v = rng.standard_normal((rotations, n))
        dirs.extend(v / np.linalg.norm(v, axis=1)[:, None])
    return np.array(dirs)


def width_of_bad_set(u: HarmonicFunction, q: Cube, c: float, generations_down: int = 2, A: int = 1,
                     N_reference: float | None = None, rungs: int = 4, rotations: int = 16,
                     tolerance: float = 1e-3, ratio: float | None = None) -> dict:
    """Minimal slab width containing the sampled points of
    F = {x in q : sup_{r < diam(q)/(2A+1)} N(x, r) > N_ref / (1 + c)}.

    The sample grid has 3^generations_down points per axis (cell centres);
    the radius sup runs over a dyadic ladder below diam(q)/(2A+1).
    N_ref defaults to the lower bound on the maximal doubling of the cube
    concentric with q and (2A+1) times larger (the parent scale).  The
    pointwise index uses the same ratio as N(Q), 10n by default.
    """
    n = q.dimension
    ratio = 10.0 * n if ratio is None else float(ratio)
    if N_reference is None:
        N_reference = maximal_doubling(u, q.scaled(2 * A + 1), 5, tolerance=tolerance).index_value
    threshold = N_reference / (1 + c)
    m = 3**generations_down
    lo, hi = q.bounds()
    axes = [lo[i] + (np.arange(m) + 0.5) * (hi[i] - lo[i]) / m for i in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)
    rmax = q.diameter / (2 * A + 1)
    ladder = [rmax / 2**k for k in range(1, rungs + 1)]  # strictly below rmax
    centers = np.repeat(pts, len(ladder), axis=0)
    radii = np.tile(ladder, len(pts))
    if u.poly is not None and u.poly.degree <= 1:
        vals = np.zeros(len(pts))
    else:
        v, e = doubling_indices(u, centers, radii, tolerance, ratio=ratio)
        vals = v.reshape(len(pts), len(ladder)).max(axis=1)
    inside = vals > threshold
    F = pts[inside]
    if len(F) == 0:
        width = 0.0
    else:
        proj = F @ _directions(n, rotations).T
        width = float((proj.max(axis=0) - proj.min(axis=0)).min())
    return {"width": width, "relative_width": width / q.diameter, "points": int(len(pts)),
            "bad_points": int(inside.sum()), "threshold": threshold, "N_reference": N_reference,
            "ladder": ladder, "ratio": ratio, "directions": n + rotations, "lower_bound": True}
