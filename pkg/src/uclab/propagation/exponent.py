"""Propagation-of-smallness exponent fits and the weak-bound arithmetic."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .. import certify
from ..gmt import hausdorff_content
from ..harmonic import HarmonicFunction
from ..lattice import GridSet
from ..norms import sup_grad_balls

MIN_FAMILY = 4


class FitError(ValueError):
    """Too few instances, or degenerate data, for an exponent fit."""


def _covers_half_ball(E: GridSet) -> bool:
    """True if every lattice cell meeting the closed ball B(0, 1/2) is in E."""
    if E.slices:
        return False
    K = E.resolution
    n = E.dimension
    idx = np.stack(np.meshgrid(*[np.arange(K)] * n, indexing="ij"), -1).reshape(-1, n)
    lo = idx / K - 0.5
    hi = (idx + 1) / K - 0.5
    nearest = np.clip(0.0, lo, hi)
    meets = np.linalg.norm(nearest, axis=1) <= 0.5
    return E.cell_set() >= {tuple(int(v) for v in c) for c in idx[meets]}


def sup_over_set(u: HarmonicFunction, E: GridSet, tolerance: float) -> tuple[float, float]:
    """Certified sup of |grad u| over E (all pieces share one owner)."""
    lo, hi = E.cell_bounds()
    ext = certify.box_extremum(u, lo, hi, "max", rel_tol=tolerance, owner=np.zeros(len(lo), dtype=int),
                               n_owner=1)
    if ext.status[0] != "converged":
        raise certify.CertificationError("sup over E not certified")
    s_lo, s_hi = math.sqrt(max(ext.sample[0], 0.0)), math.sqrt(max(ext.bound[0], 0.0))
    return (s_lo + s_hi) / 2, (s_hi - s_lo) / 2


def fit_propagation_exponent(u_family: list[HarmonicFunction], E: GridSet, tolerance: float = 1e-6,
                             delta: float | None = None, content_exponent: float | None = None) -> dict:
    """Slope alpha of log sigma against log eps across a family.

    Each u is scaled to certified sup |grad u| = 1 on B(0, 1); then
    eps = sup over E and sigma = sup over B(0, 1/2).  If E contains every
    lattice cell meeting B(0, 1/2), E is clipped to the target ball, so
    eps = sigma.  Otherwise E must lie in the closed ball B(0, 1/2).
    """
    if len(u_family) < MIN_FAMILY:
        raise FitError(f"family has {len(u_family)} members; at least {MIN_FAMILY} are needed")
    n = E.dimension
    clip = _covers_half_ball(E)
    if not clip:
        lo, hi = E.cell_bounds()
        far = np.maximum(np.abs(lo), np.abs(hi))
        if np.any(np.linalg.norm(far, axis=1) > 0.5 + 1e-12):
            raise ValueError("E must lie inside the closed ball B(0, 1/2)")
    zero = np.zeros((1, n))
    rows = []
    for u in u_family:
        v, e, _ = sup_grad_balls(u, zero, [1.0], tolerance)
        w = u.scaled(1.0 / v[0])
        sig, sig_err, _ = sup_grad_balls(w, zero, [0.5], tolerance)
        if clip:
            eps, eps_err = float(sig[0]), float(sig_err[0])
        else:
            eps, eps_err = sup_over_set(w, E, tolerance)
        rows.append({"eps": eps, "eps_error": eps_err, "sigma": float(sig[0]), "sigma_error": float(sig_err[0]),
                     "normalizer": float(v[0])})
    x = np.log([r["eps"] for r in rows])
    y = np.log([r["sigma"] for r in rows])
    if np.ptp(x) == 0:
        if np.ptp(y) == 0 and clip:
            alpha, logC, resid = 1.0, 0.0, np.zeros(len(x))
        else:
            raise FitError("all eps coincide; the slope is undetermined")
    else:
        alpha, logC = np.polyfit(x, y, 1)
        resid = y - (alpha * x + logC)
    dof = max(len(x) - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(resid**2) / dof / sxx)) if sxx > 0 else 0.0
    out = {"alpha": float(alpha), "log_C": float(logC), "residual": float(np.sqrt(np.mean(resid**2))),
           "alpha_stderr": stderr, "bounded_away_from_zero": bool(alpha - 2 * stderr > 0),
           "members": rows, "clipped_to_half_ball": clip, "delta": delta}
    if content_exponent is not None and not E.is_empty():
        est = hausdorff_content(E, content_exponent)
        out["content"] = {"s": content_exponent, "upper": est.upper, "lower": est.lower}
    return out


def weak_bound_calculator(kappa: float, epsilon: float, C_census: float, beta: float) -> dict:
    """Smallest N >= 0 with N^3 log C - N log kappa >= beta log(1/eps), and exp(-N).

    The frequency of a normalised u must be at least N; with unit sup on
    B(0, 1) the doubling definition then gives sup_{B(0,1/2)} |grad u| <= e^-N.
    """
    if min(kappa, epsilon, C_census, beta) <= 0 or epsilon > 1:
        raise ValueError("inputs must be positive with epsilon <= 1")
    logC = math.log(C_census)
    logk = math.log(kappa)
    rhs = beta * math.log(1 / epsilon)
    if rhs <= 0:  # N = 0 already satisfies the inequality
        return {"N": 0.0, "smallness": 1.0, "cube_root_shape": 0.0}
    if logC <= 0:
        return {"N": None, "smallness": None, "reason": "log C must be positive for a root"}

    def f(N):
        return N**3 * logC - N * logk - rhs

    # f(0) = -rhs <= 0 and f decreases until sqrt(log k / (3 log C)), then increases
    lo = math.sqrt(max(logk, 0.0) / (3 * logC))
    hi = max(1.0, 2 * lo)
    while f(hi) < 0:
        hi *= 2
    N = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return {"N": float(N), "smallness": math.exp(-N), "cube_root_shape": rhs ** (1 / 3)}
