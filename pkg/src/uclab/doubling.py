"""Doubling indices of |grad u| and the properties they are expected to obey.

Every sup-based index is a log-ratio of certified suprema, so each value
comes with a rigorous error bar; the maximal index N(Q) is a certified lower
bound over a finite grid of centres and radii.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import certify
from .harmonic import Ball, HarmonicFunction, SingularPointError
from .norms import mean_square_grad, sphere_l2_norm, sup_grad_balls

VANISHING = 1e-30  # certified sup |grad u| below this counts as zero


class VanishingGradient(ValueError):
    """sup |grad u| on the inner ball is indistinguishable from zero."""


@dataclass
class DoublingReport:
    center: tuple
    radius: float
    index_value: float
    error_bound: float
    variant: str  # sup_ratio | l2_ratio | maximal_cube
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in ("sup_ratio", "l2_ratio", "maximal_cube"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def lower(self) -> float:
        return self.index_value - self.error_bound

    @property
    def upper(self) -> float:
        return self.index_value + self.error_bound

    def as_dict(self) -> dict:
        d = asdict(self)
        d["center"] = [float(c) for c in self.center]
        return d


# -- sup-based indices ----------------------------------------------------------------


def ball_sup_bounds(u: HarmonicFunction, centers, radii, tolerance: float = 1e-6,
                    **budget) -> tuple[np.ndarray, np.ndarray]:
    """Certified (lower, upper) bounds on sup_B |grad u| for a batch of balls."""
    v, e, _ = sup_grad_balls(u, centers, radii, tolerance, **budget)
    return v - e, v + e


def _log_ratio(lo_num, hi_num, lo_den, hi_den):
    """Point value and half-width of log(num/den) from interval bounds."""
    with np.errstate(divide="ignore"):
        top = np.log(hi_num) - np.log(lo_den)
        bot = np.log(np.maximum(lo_num, 0)) - np.log(hi_den)
        mid = np.log((lo_num + hi_num) / 2) - np.log((lo_den + hi_den) / 2)
    err = np.maximum(top - mid, mid - bot)
    return mid, err


def doubling_indices(u: HarmonicFunction, centers, radii, tolerance: float = 1e-6,
                     ratio: float = 2.0, **budget) -> tuple[np.ndarray, np.ndarray]:
    """Batched log(sup_{B(x, ratio r)} |grad u| / sup_{B(x, r)} |grad u|) with error bars."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
    k = len(radii)
    lo, hi = ball_sup_bounds(u, np.concatenate([centers, centers]),
                             np.concatenate([radii, ratio * radii]), tolerance, **budget)
    if np.any(hi[:k] < VANISHING):
        bad = int(np.argmax(hi[:k] < VANISHING))
        raise VanishingGradient(f"sup |grad u| on B({centers[bad].tolist()}, {radii[bad]}) "
                                f"is below {VANISHING}")
    return _log_ratio(lo[k:], hi[k:], lo[:k], hi[:k])


def doubling_index(u: HarmonicFunction, x, r: float, tolerance: float = 1e-6, **budget) -> DoublingReport:
    """N(x, r) = log(sup_{B(x,2r)} |grad u| / sup_{B(x,r)} |grad u|)."""
    if not r > 0:
        raise ValueError("radius must be positive")
    if not u.harmonic_on_ball(x, 2 * r):
        raise SingularPointError("B(x, 2r) leaves the harmonicity domain")
    v, e = doubling_indices(u, [x], [r], tolerance, **budget)
    return DoublingReport(tuple(float(c) for c in x), float(r), float(v[0]), float(e[0]), "sup_ratio",
                          {"tolerance": tolerance, "ratio": 2.0})


def l2_doubling_index(u: HarmonicFunction, x, r: float, tolerance: float = 1e-10) -> DoublingReport:
    """N_2(x, r) = log(<|grad u|^2>_{B(x,2r)} / <|grad u|^2>_{B(x,r)}), means of squares."""
    if not u.harmonic_on_ball(x, 2 * r):
        raise SingularPointError("B(x, 2r) leaves the harmonicity domain")
    small = mean_square_grad(u, Ball(tuple(x), r), tolerance)
    big = mean_square_grad(u, Ball(tuple(x), 2 * r), tolerance)
    if small.value + small.error_bound < VANISHING**2:
        raise VanishingGradient(f"mean |grad u|^2 on B({list(x)}, {r}) vanishes")
    value = math.log(big.value / small.value)
    err = small.error_bound / small.value + big.error_bound / big.value
    return DoublingReport(tuple(float(c) for c in x), float(r), value, err, "l2_ratio",
                          {"tolerance": tolerance, "modes": [small.mode, big.mode]})


def default_ladder(side: float, rungs: int = 8) -> list[float]:
    """Dyadic radii side, side/2, ..., side/2^(rungs-1)."""
    return [side / 2**k for k in range(rungs)]


def cube_grid(lo, hi, density: int) -> np.ndarray:
    """density^n grid of centres in the closed box, including the corners.

    Odd densities include the centre point.
    """
    axes = [np.linspace(a, b, density) if density > 1 else np.array([(a + b) / 2])
            for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))


def maximal_doubling_lower(u: HarmonicFunction, cubes_lo, cubes_hi, density: int = 9,
                           rungs: int = 8, ratio: float | None = None, tolerance: float = 1e-3,
                           ladder: list[float] | None = None) -> tuple[np.ndarray, list]:
    """Certified lower bounds on N(Q) for a batch of equal cubes.

    For each cube: max over a density^n grid and a radius ladder of
    log(sampled sup on B(x, ratio r)) - log(certified upper sup on B(x, r)).
    Returns the bounds and the maximising (x, r) per cube.
    """
    cubes_lo = np.atleast_2d(np.asarray(cubes_lo, dtype=float))
    cubes_hi = np.atleast_2d(np.asarray(cubes_hi, dtype=float))
    n = cubes_lo.shape[1]
    ratio = 10.0 * n if ratio is None else float(ratio)
    side = float(cubes_hi[0, 0] - cubes_lo[0, 0])
    ladder = default_ladder(side, rungs) if ladder is None else list(ladder)
    unit = cube_grid(np.zeros(n), np.ones(n), density)
    xs = (cubes_lo[:, None, :] + unit[None] * (cubes_hi - cubes_lo)[:, None, :]).reshape(-1, n)
    owner = np.repeat(np.arange(len(cubes_lo)), len(unit))
    centers = np.repeat(xs, len(ladder), axis=0)
    rs = np.tile(np.asarray(ladder), len(xs))
    owners = np.repeat(owner, len(ladder))
    for c in xs:
        if not u.harmonic_on_ball(c, ratio * max(ladder)):
            raise SingularPointError("a maximal-doubling ball leaves the harmonicity domain")
    small = certify.sphere_max(u, centers, rs, rel_tol=tolerance, strict=False)
    big = certify.sphere_max(u, centers, ratio * rs, rel_tol=tolerance, strict=False)
    upper_small = np.sqrt(np.maximum(small.bound, 0))
    lower_big = np.sqrt(np.maximum(big.sample, 0))
    if np.any(upper_small < VANISHING):
        raise VanishingGradient("sup |grad u| vanishes on a maximal-doubling ball")
    vals = np.log(lower_big) - np.log(upper_small)
    best = np.full(len(cubes_lo), -np.inf)
    np.maximum.at(best, owners, vals)
    arg = []
    for q in range(len(cubes_lo)):
        mask = owners == q
        i = np.flatnonzero(mask)[np.argmax(vals[mask])]
        arg.append((centers[i].tolist(), float(rs[i])))
    return best, arg


def maximal_doubling(u: HarmonicFunction, Q, grid_density: int = 9, radius_ladder: list[float] | None = None,
                     tolerance: float = 1e-3, ratio: float | None = None) -> DoublingReport:
    """Certified lower bound on the maximal doubling index N(Q) (ratio 10n by default)."""
    lo, hi = Q.bounds()
    n = len(lo)
    ratio_used = 10.0 * n if ratio is None else float(ratio)
    ladder = default_ladder(float(Q.side)) if radius_ladder is None else list(radius_ladder)
    const = u.poly is not None and u.poly.degree <= 1
    if const:
        # affine u: every ratio is exactly log 1 = 0
        return DoublingReport(tuple(float(c) for c in Q.center), float(Q.side), 0.0, 0.0, "maximal_cube",
                              {"grid_density": grid_density, "ladder": ladder, "ratio": ratio_used,
                               "lower_bound": True, "argmax": None})
    best, arg = maximal_doubling_lower(u, lo, hi, grid_density, ratio=ratio_used, tolerance=tolerance,
                                       ladder=ladder)
    return DoublingReport(tuple(float(c) for c in Q.center), float(Q.side), float(best[0]), 0.0,
                          "maximal_cube", {"grid_density": grid_density, "ladder": ladder,
                                           "ratio": ratio_used, "lower_bound": True,
                                           "tolerance": tolerance, "argmax": arg[0]})


# -- sphere norms ---------------------------------------------------------------------


def three_spheres_defect(u: HarmonicFunction, x, r1: float, r2: float, r3: float,
                         tolerance: float = 1e-12) -> float:
    """log||u||_{r2} - a log||u||_{r1} - (1 - a) log||u||_{r3}, a = log(r3/r2) / log(r3/r1)."""
    return three_spheres_report(u, x, r1, r2, r3, tolerance)["defect"]


def three_spheres_report(u: HarmonicFunction, x, r1: float, r2: float, r3: float,
                         tolerance: float = 1e-12) -> dict:
    if not 0 < r1 <= r2 <= r3 or r1 == r3:
        raise ValueError("need 0 < r1 <= r2 <= r3 with r1 < r3")
    if not u.harmonic_on_ball(x, r3):
        raise SingularPointError("the outer sphere leaves the harmonicity domain")
    alpha = math.log(r3 / r2) / math.log(r3 / r1)
    norms = [sphere_l2_norm(u, Ball(tuple(x), r), tolerance) for r in (r1, r2, r3)]
    if any(nm.value <= 0 for nm in norms):
        raise VanishingGradient("a sphere norm vanishes")
    logs = [math.log(nm.value) for nm in norms]
    if r1 == r2:
        defect = 0.0
    else:
        defect = logs[1] - alpha * logs[0] - (1 - alpha) * logs[2]
    err = sum(w * nm.error_bound / nm.value for w, nm in zip((alpha, 1.0, 1 - alpha), norms))
    return {"defect": defect, "alpha": alpha, "error_bound": err, "norms": [nm.value for nm in norms]}


# -- properties -----------------------------------------------------------------------


def big_scale_doubling_check(u: HarmonicFunction, x, r: float, t: float, N_threshold: float,
                             slack: float = 0.0, tolerance: float = 1e-6) -> dict:
    """Measured decay exponent e(t) = log(sup_{B(x,tr)} / sup_{B(x,r)}) / log t.

    Applicable only when N(x, t r) >= N_threshold (checked first, with the
    certified lower end of the index); the expected conclusion is e(t) >= N/6.
    """
    if not 0 < t < 0.5:
        raise ValueError("t must lie in (0, 1/2)")
    try:
        pre = doubling_index(u, x, t * r, tolerance)
    except VanishingGradient:
        return {"applicable": False, "reason": "vanishing gradient", "t": t}
    if pre.lower < N_threshold:
        return {"applicable": False, "reason": "doubling below threshold", "N": pre.index_value,
                "t": t, "threshold": N_threshold}
    lo, hi = ball_sup_bounds(u, [x, x], [t * r, r], tolerance)
    mid = (lo + hi) / 2
    e = math.log(mid[0] / mid[1]) / math.log(t)
    e_err = (math.log(hi[0] / lo[0]) / 2 + math.log(hi[1] / lo[1]) / 2) / abs(math.log(t))
    target = N_threshold / 6
    return {"applicable": True, "t": t, "N": pre.index_value, "N_error": pre.error_bound,
            "exponent": e, "exponent_error": e_err, "target": target, "slack": slack,
            "holds": bool(e + e_err >= target - slack)}


def almost_monotonicity_gap(u: HarmonicFunction, x, r: float, theta: float = 0.25,
                            tolerance: float = 1e-6) -> float:
    """N(x, theta r) - 2 N(x, r): the constant C needed at this (x, r); certified upper end."""
    v, e = doubling_indices(u, [x, x], [theta * r, r], tolerance)
    return float((v[0] + e[0]) - 2 * (v[1] - e[1]))


def l2_ladder(u: HarmonicFunction, x, radii, tolerance: float = 1e-10) -> dict:
    """N_2 along increasing radii, with the worst violation of monotonicity."""
    radii = sorted(float(r) for r in radii)
    reps = [l2_doubling_index(u, x, r, tolerance) for r in radii]
    vals = np.array([rp.index_value for rp in reps])
    errs = np.array([rp.error_bound for rp in reps])
    drops = vals[:-1] - vals[1:]
    allowed = 2 * np.maximum(errs[:-1], errs[1:])  # 2 x error bound per comparison
    return {"radii": radii, "values": vals.tolist(), "errors": errs.tolist(),
            "max_drop": float(drops.max()) if len(drops) else 0.0,
            "monotone": bool(np.all(drops <= allowed))}
