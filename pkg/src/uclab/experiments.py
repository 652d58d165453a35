"""Dispatch from a validated config to the library operations.

Each runner returns an :class:`Outcome`: JSON-ready results, measured
constants, one headline number (used by sweeps), findings and optional
side files keyed by suffix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import doubling, gmt, lattice, zoo
from .config import ExperimentConfig
from .lattice import Cube, GridSet
from .propagation import census, critical, exponent, recursion, sublevel
from .report import csv_text

Inapplicable = census.Inapplicable


@dataclass
class Outcome:
    results: dict
    constants: dict = field(default_factory=dict)
    headline: float | None = None
    findings: list = field(default_factory=list)
    sides: dict = field(default_factory=dict)  # suffix -> text


# -- selectors ----------------------------------------------------------------------


def cube_from_spec(spec, n: int) -> Cube:
    """``"unit"``, or {center: [...], side: "1/9"} with exact rational strings."""
    if spec in (None, "unit"):
        return Cube.unit(n)
    center = tuple(Fraction(str(c)) for c in spec["center"])
    return Cube.centered(center, Fraction(str(spec["side"])))


def set_from_spec(spec: dict) -> GridSet:
    """GridSets by type: cantor, face, hyperplane, half_ball, point, cells."""
    t = spec["type"]
    if t == "cantor":
        return gmt.cantor_product_set(float(spec["dimension"]), int(spec["n"]), int(spec["depth"]),
                                      spec.get("placement", "hyperplane"))
    if t == "face":
        return GridSet.face(int(spec["n"]), int(spec["K"]))
    if t == "hyperplane":
        return GridSet.hyperplane(int(spec["n"]), int(spec["K"]))
    if t == "half_ball":
        n, K = int(spec["n"]), int(spec["K"])
        idx = np.stack(np.meshgrid(*[np.arange(K)] * n, indexing="ij"), -1).reshape(-1, n)
        lo, hi = idx / K - 0.5, (idx + 1) / K - 0.5
        meets = np.linalg.norm(np.clip(0.0, lo, hi), axis=1) <= 0.5
        return GridSet(K, idx[meets])
    if t == "point":
        return GridSet.point([Fraction(str(v)) for v in spec["x"]], int(spec["K"]))
    if t == "cells":
        return GridSet.from_dict(spec)
    raise ValueError(f"unknown set type {t!r}")


def _function(cfg: ExperimentConfig):
    return zoo.from_selector(cfg.function, cfg.seed)


def _functions(cfg: ExperimentConfig) -> list:
    if cfg.functions is not None:
        return zoo.family_from_selector(cfg.functions, cfg.seed)
    return [_function(cfg)]


def _tol(cfg, name, default):
    return float(cfg.tolerances.get(name, default))


# -- doubling -----------------------------------------------------------------------


def run_doubling_index(cfg):
    u = _function(cfg)
    p = cfg.params
    rep = doubling.doubling_index(u, p["x"], float(p["r"]), _tol(cfg, "sup", 1e-6))
    return Outcome({"report": rep.as_dict()}, headline=rep.index_value)


def run_l2_doubling_index(cfg):
    u = _function(cfg)
    p = cfg.params
    rep = doubling.l2_doubling_index(u, p["x"], float(p["r"]), _tol(cfg, "quadrature", 1e-10))
    return Outcome({"report": rep.as_dict()}, headline=rep.index_value)


def run_maximal_doubling(cfg):
    u = _function(cfg)
    p = cfg.params
    Q = cube_from_spec(p.get("cube"), u.dimension)
    rep = doubling.maximal_doubling(u, Q, int(p.get("grid_density", 9)), p.get("radius_ladder"),
                                    _tol(cfg, "sup", 1e-3), p.get("ratio"))
    return Outcome({"report": rep.as_dict()}, headline=rep.index_value)


def run_three_spheres(cfg):
    u = _function(cfg)
    p = cfg.params
    rows = []
    for triple in p["radii"]:
        r = doubling.three_spheres_report(u, p.get("x", [0.0] * u.dimension), *triple,
                                          tolerance=_tol(cfg, "quadrature", 1e-12))
        rows.append({"radii": list(triple), **r})
    worst = max(r["defect"] for r in rows)
    return Outcome({"triples": rows}, {"max_defect": worst}, headline=worst)


def run_big_scale_doubling(cfg):
    u = _function(cfg)
    p = cfg.params
    rep = doubling.big_scale_doubling_check(u, p["x"], float(p["r"]), float(p["t"]), float(cfg.thresholds["N"]),
                                            float(p.get("slack", 0.0)), _tol(cfg, "sup", 1e-6))
    if not rep["applicable"]:
        raise Inapplicable(rep.pop("reason"), **rep)
    return Outcome({"report": rep}, headline=rep["exponent"])


def run_almost_monotonicity(cfg):
    fam = _functions(cfg)
    p = cfg.params
    theta = float(p.get("theta", 0.25))
    centers = p.get("centers", [[0.0, 0.0], [0.1, 0.1]])
    radii = p.get("radii", [0.1, 0.2, 0.4])
    gaps = []
    for i, u in enumerate(fam):
        for x in centers:
            for r in radii:
                if not u.harmonic_on_ball(x, 2 * r):
                    continue
                gaps.append({"member": i, "x": x, "r": r,
                             "gap": doubling.almost_monotonicity_gap(u, x, r, theta, _tol(cfg, "sup", 1e-6))})
    C_emp = max(g["gap"] for g in gaps)
    return Outcome({"samples": gaps, "theta": theta}, {"C_emp": C_emp}, headline=C_emp)


# -- censuses -----------------------------------------------------------------------


def _census_args(cfg):
    p = cfg.params
    return dict(margin=p.get("margin"), density=int(p.get("density", 3)), rungs=int(p.get("rungs", 3)),
                tolerance=_tol(cfg, "classification", 1e-2))


def run_bad_cube_census(cfg):
    """One census per function; N is thresholds.N, or N(Q)/(1 + c) when N is "auto"."""
    fams = _functions(cfg)
    A = int(cfg.lattice.get("A", 4))
    gens = int(cfg.lattice.get("generations", 1))
    c = float(cfg.thresholds.get("c", 0.05))
    deltas = cfg.params.get("deltas", [float(cfg.thresholds.get("delta", 0.5))])
    rows, findings, inapplicable = [], [], []
    for i, u in enumerate(fams):
        Q = cube_from_spec(cfg.params.get("cube"), u.dimension)
        N = cfg.thresholds.get("N", "auto")
        try:
            if N == "auto" or "N" not in cfg.thresholds:
                NQ = census.precondition(u, Q, math.inf, c)
                N = NQ / (1 + c)
            res = census.bad_cube_census(u, Q, A, float(N), gens, c, tuple(deltas), **_census_args(cfg))
        except Inapplicable as exc:
            inapplicable.append({"member": i, "reason": exc.reason, **exc.details})
            continue
        for r in res:
            for d, ok in r.context["within"].items():
                if not ok:
                    findings.append({"type": "ceiling_violation", "member": i, "generation": r.level,
                                     "delta": float(d), "count": r.pessimistic_count,
                                     "bad": r.bad_count, "undecided": r.undecided_count,
                                     "ceiling": r.context["ceilings"][d]})
        rows.append({"member": i, "function": u.to_dict(), "N": float(N), "censuses": [r.as_dict() for r in res]})
    if not rows:
        raise Inapplicable("precondition failed for every function", members=inapplicable)
    total = sum(cs["bad_count"] + cs["undecided_count"] for row in rows for cs in row["censuses"])
    csv_rows = [[row["member"], cs["level"], row["N"], cs["bad_count"], cs["undecided_count"], cs["total_count"],
                 cs["bound"]] for row in rows for cs in row["censuses"]]
    sides = {"csv": csv_text(["member", "generation", "N", "bad", "undecided", "total", "ceiling"], csv_rows)}
    C0 = max(cs["context"]["C0_measured"] for row in rows for cs in row["censuses"])
    return Outcome({"members": rows, "inapplicable": inapplicable, "A": A, "c": c},
                   {"C0_max": C0}, headline=float(total), findings=findings, sides=sides)


def run_hyperplane_census(cfg):
    u = _function(cfg)
    Q = cube_from_spec(cfg.params.get("cube"), u.dimension)
    A = int(cfg.lattice.get("A", 4))
    etas = cfg.params.get("etas", [float(cfg.thresholds.get("eta", 0.5))])
    deltas = cfg.params.get("deltas", [float(cfg.thresholds.get("delta", 0.5))])
    r = census.hyperplane_census(u, Q, A, float(cfg.thresholds["N"]), tuple(etas), tuple(deltas),
                                 **_census_args(cfg))
    findings = [{"type": "ceiling_violation", **row} for row in r.context["table"] if not row["within"]]
    return Outcome({"census": r.as_dict()}, {"C0": r.context["C0_measured"]}, float(r.pessimistic_count), findings)


def run_capacity_census(cfg):
    u = _function(cfg)
    Q = cube_from_spec(cfg.params.get("cube"), u.dimension)
    r = census.capacity_census(u, Q, int(cfg.lattice.get("A", 4)), float(cfg.thresholds["N"]),
                               float(cfg.thresholds.get("delta", 0.5)), cfg.params.get("measure_family", "uniform"),
                               **_census_args(cfg))
    return Outcome({"census": r}, headline=r["capacity_bad"])


def run_width_of_bad_set(cfg):
    u = _function(cfg)
    q = cube_from_spec(cfg.params["cube"], u.dimension)
    r = census.width_of_bad_set(u, q, float(cfg.thresholds.get("c", 0.1)), int(cfg.params.get("generations_down", 2)),
                                int(cfg.lattice.get("A", 1)), cfg.params.get("N_reference"),
                                tolerance=_tol(cfg, "sup", 1e-3))
    return Outcome({"width": r}, headline=r["width"])


# -- sets and content ---------------------------------------------------------------


def run_sublevel_content(cfg):
    u = _function(cfg)
    Q = cube_from_spec(cfg.params.get("cube"), u.dimension)
    n = u.dimension
    s = float(cfg.thresholds.get("s", n - 2 + float(cfg.thresholds.get("delta", 0.5))))
    K = int(cfg.lattice.get("K", 81))
    r = sublevel.sublevel_content(u, Q, float(cfg.thresholds["a"]), s, K, _tol(cfg, "sup", 1e-6))
    return Outcome({"sublevel": r.as_dict()}, headline=r.content.upper,
                   sides={"gridset.json": r.cells.dumps() + "\n"})


def run_effective_critical_set(cfg):
    u = _function(cfg)
    Q = cube_from_spec(cfg.params.get("cube"), u.dimension)
    cov = critical.effective_critical_set(u, Q, float(cfg.params["r"]), int(cfg.lattice.get("K", 81)))
    N = cfg.thresholds.get("N")
    consts = {"cover_growth": critical.cover_growth(cov.ball_count, float(N))} if N else {}
    return Outcome({"cover": cov.as_dict()}, consts, headline=float(cov.ball_count))


def run_recursion_simulate(cfg):
    p = cfg.params
    params = {"A": cfg.lattice.get("A", 4), "delta": cfg.thresholds.get("delta", 0.5), "c": cfg.thresholds.get("c", 1.0),
              "C1": cfg.thresholds.get("C1", 0.1), "N0": p.get("N0", 10.0)}
    b = p.get("boundary", {"C": 2.0, "beta": 1.0})
    boundary = recursion.base_case_boundary(float(b["C"]), float(b["beta"]), float(params["N0"]))
    N_range = tuple(p.get("N_range", (10.0, 160.0)))
    a_range = tuple(p.get("a_range", (0.0, 1000.0)))
    variant = p.get("variant", "proof")
    coarse, fine, gap = recursion.refine_oracle(params, boundary, N_range, a_range, p.get("a_step"),
                                                int(p.get("oracle_factor", 4)), variant)
    fit = recursion.fit_decay(coarse)
    replay = (recursion.induction_replay(float(params["A"]), float(params["delta"]), float(params["c"]),
                                         float(params["C1"]), fit["beta"]) if fit["beta"] else None)
    stride = int(p.get("report_stride", max(1, len(coarse.a) // 50)))
    return Outcome({"state": coarse.as_dict(stride), "fit": fit, "replay": replay, "oracle_gap": gap,
                    "oracle_factor": int(p.get("oracle_factor", 4))},
                   {"beta_prime": fit["beta"], "C_prime": fit["C"]}, headline=fit["beta"])


def run_fit_propagation_exponent(cfg):
    fam = _functions(cfg)
    E = set_from_spec(cfg.params["set"])
    r = exponent.fit_propagation_exponent(fam, E, _tol(cfg, "sup", 1e-6), cfg.thresholds.get("delta"),
                                          cfg.params.get("content_exponent"))
    return Outcome({"fit": r}, {"alpha": r["alpha"]}, headline=r["alpha"])


def run_weak_bound(cfg):
    p = cfg.params
    r = exponent.weak_bound_calculator(float(p["kappa"]), float(p["epsilon"]), float(p["C"]), float(p["beta"]))
    if r["N"] is None:
        raise Inapplicable(r["reason"])
    return Outcome({"bound": r}, headline=r["N"])


def run_riesz_capacity(cfg):
    E = set_from_spec(cfg.params["set"])
    r = gmt.capacity_report(E, float(cfg.thresholds["s"]), cfg.params.get("measure_family", "uniform"),
                            int(cfg.params.get("sweeps", 20)))
    return Outcome({"capacity": r.as_dict()}, headline=r.capacity_lower)


def run_hausdorff_content(cfg):
    E = set_from_spec(cfg.params["set"])
    est = gmt.hausdorff_content(E, float(cfg.thresholds["s"]), cfg.params.get("search_depth"))
    return Outcome({"content": est.as_dict()}, headline=est.upper,
                   sides={"cover.json": est.cover_gridset(E.dimension).dumps() + "\n"})


def run_counting_bound(cfg):
    E = set_from_spec(cfg.params["set"])
    s = float(cfg.thresholds["s"])
    rows = [lattice.counting_lower_bound_check(E, s, int(K)) for K in cfg.params.get("K_values", [27, 81, 243])]
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    spread = max(ratios) / min(ratios) if ratios else None
    return Outcome({"checks": rows, "spread": spread}, {"C_n_min": min(ratios) if ratios else None},
                   headline=spread)


RUNNERS = {
    "doubling_index": run_doubling_index,
    "l2_doubling_index": run_l2_doubling_index,
    "maximal_doubling": run_maximal_doubling,
    "three_spheres": run_three_spheres,
    "big_scale_doubling": run_big_scale_doubling,
    "almost_monotonicity": run_almost_monotonicity,
    "bad_cube_census": run_bad_cube_census,
    "hyperplane_census": run_hyperplane_census,
    "capacity_census": run_capacity_census,
    "width_of_bad_set": run_width_of_bad_set,
    "sublevel_content": run_sublevel_content,
    "effective_critical_set": run_effective_critical_set,
    "recursion_simulate": run_recursion_simulate,
    "fit_propagation_exponent": run_fit_propagation_exponent,
    "weak_bound": run_weak_bound,
    "riesz_capacity": run_riesz_capacity,
    "hausdorff_content": run_hausdorff_content,
    "counting_bound": run_counting_bound,
}
