"""End-to-end acceptance checks, one per criterion, each printing a pass/fail line.

The lines are collected and repeated in the terminal summary (see conftest).
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from uclab import zoo
from uclab.cli import execute, run
from uclab.config import load
from uclab.doubling import almost_monotonicity_gap, doubling_index, l2_ladder, three_spheres_report
from uclab.gmt import DiscreteMeasure, cantor_product_set, hausdorff_content, riesz_capacity_lower, riesz_energy
from uclab.harmonic import HarmonicFunction
from uclab.lattice import Cube, GridSet, counting_lower_bound_check
from uclab.propagation.critical import effective_critical_set
from uclab.propagation.exponent import fit_propagation_exponent
from uclab.propagation.recursion import base_case_boundary, fit_decay, refine_oracle
from uclab.propagation.sublevel import sublevel_set

from conftest import ACCEPTANCE_LINES, planar_abs_grad

ROOT = Path(__file__).resolve().parents[1]
CANTOR_DIM = math.log(2) / math.log(3)


def verdict(tag: str, ok: bool, detail: str) -> None:
    line = f"{tag:<4} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_c1_homogeneity_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    for n in (2, 3):
        for d in range(2, 9):
            u = zoo.homogeneous(n, d, 0)
            for r in (0.125, 0.25):
                worst = max(worst, abs(doubling_index(u, (0,) * n, r, 1e-7).index_value - (d - 1) * math.log(2)))
    dt = time.perf_counter() - t0
    verdict("C1", worst <= 1e-4 and dt < 10, f"max |N - (d-1) log 2| = {worst:.2e} (<= 1e-4), {dt:.1f} s (< 10 s)")


def test_c2_three_spheres():
    rng = np.random.default_rng(2)
    worst = -math.inf
    fam = zoo.random_zoo(2, 25, 21, 8) + zoo.random_zoo(3, 25, 22, 6)
    for u in fam:
        x = tuple(rng.uniform(-0.1, 0.1, u.dimension))
        for _ in range(5):
            r1, r2, r3 = np.sort(rng.uniform(0.05, 0.9, 3))
            worst = max(worst, three_spheres_report(u, x, r1, r2, r3)["defect"])
    eq = max(abs(three_spheres_report(zoo.homogeneous(n, d, 0), (0,) * n, 0.1, 0.3, 0.8)["defect"])
             for n in (2, 3) for d in (1, 3, 6))
    verdict("C2", worst <= 1e-6 and eq <= 1e-8,
            f"max defect {worst:.2e} over {len(fam)}x5 (<= 1e-6); pure harmonics |defect| {eq:.1e} (<= 1e-8)")


def test_c3_l2_monotonicity():
    fam = zoo.random_zoo(2, 25, 31, 8) + zoo.random_zoo(3, 25, 32, 6)
    bad = 0
    for u in fam:
        rep = l2_ladder(u, (0.05,) * u.dimension, np.geomspace(0.01, 0.5, 16))
        bad += not rep["monotone"]
    gaps = [almost_monotonicity_gap(u, x[: u.dimension], r, 0.25)
            for u in fam for x in ((0.0, 0.0, 0.0), (0.2, -0.1, 0.05)) for r in (0.05, 0.1, 0.2)
            if u.harmonic_on_ball(x[: u.dimension], 2 * r)]
    C_emp = max(gaps)
    verdict("C3", bad == 0 and C_emp <= 10,
            f"{bad}/{len(fam)} ladders with a drop > 2 error bounds; C_emp = {C_emp:.3f} at theta = 1/4 (<= 10)")


def test_c4_riesz_segment():
    err = riesz_energy(DiscreteMeasure.uniform_segment(10_000), 0.5) / (8 / 3) - 1
    cap = riesz_capacity_lower(GridSet.hyperplane(2, 243), 0.5)
    verdict("C4", abs(err) < 1e-3 and cap >= 0.374,
            f"relative energy error {err:.2e} at 1e4 atoms (< 1e-3); capacity lower bound {cap:.5f} (>= 0.374)")


def test_c5_content_exactness():
    seg = hausdorff_content(GridSet.hyperplane(2, 243), 1.0).upper
    cant = hausdorff_content(cantor_product_set(CANTOR_DIM, 1, 5, "generic"), CANTOR_DIM)
    E = cantor_product_set(CANTOR_DIM, 2, 3, "hyperplane")
    scale = max(abs(hausdorff_content(E.scaled_third(), s).upper / hausdorff_content(E, s).upper - 3**-s)
                for s in (0.5, CANTOR_DIM, 1.0))
    ok = seg == 1.0 and 0.5 <= cant.lower <= cant.upper <= 1.5 and scale <= 1e-12
    verdict("C5", ok, f"segment H^1 = {seg!r}; Cantor [{cant.lower:.4f}, {cant.upper:.4f}] in [0.5, 1.5]; "
                      f"scaling error {scale:.1e}")


def test_c6_counting_band():
    cases = {"face": (GridSet.face(2, 243), 1.0),
             "cantor x face": (cantor_product_set(1 + CANTOR_DIM, 3, 5, "generic"), 1 + CANTOR_DIM),
             "cantor (plane)": (cantor_product_set(CANTOR_DIM, 2, 5, "hyperplane"), CANTOR_DIM)}
    spans = {}
    for name, (E, s) in cases.items():
        ratios = [counting_lower_bound_check(E, s, K)["ratio"] for K in (27, 81, 243)]
        spans[name] = max(ratios) / min(ratios)
    ok = all(v <= 10 for v in spans.values())
    verdict("C6", ok, "band max/min: " + ", ".join(f"{k} {v:.2f}" for k, v in spans.items()) + " (<= 10)")


def test_c7_critical_sets():
    t0 = time.perf_counter()
    lin = effective_critical_set(zoo.linear(2), Cube.unit(2), 1 / 27, 81).ball_count
    sad = effective_critical_set(zoo.saddle(2), Cube.unit(2), 1 / 9, 27)
    origin = any(np.allclose(p, 0.0) for p in sad.detected)
    u = zoo.random_harmonic(2, 4, 0)
    K, r = 81, 1 / 27
    cov = effective_critical_set(u, Cube.unit(2), r, K)
    idx = np.stack(np.meshgrid(np.arange(K), np.arange(K), indexing="ij"), -1).reshape(-1, 2)
    x = (idx + 0.5) / K - 0.5
    circle = np.exp(2j * np.pi * np.arange(4096) / 4096)
    disk = (np.sqrt(np.linspace(0, 1, 60))[:, None] * r * np.exp(2j * np.pi * np.arange(240) / 240)[None]).ravel()
    vals = lambda z: u.values(np.stack([z.real, z.imag], -1))  # noqa: E731
    hits = []
    for p in x:
        w = p[0] + 1j * p[1]
        rhs = 2 / 16 / r**2 * np.mean((vals(w + 2 * r * circle) - vals(np.array([w]))[0]) ** 2)
        if (planar_abs_grad(u, w + disk) ** 2).min() < rhs:
            hits.append(p)
    centres = []
    for p in hits:
        if not any(np.linalg.norm(p - c) <= r * (1 + 1e-12) for c in centres):
            centres.append(p)
    dt = time.perf_counter() - t0
    ok = lin == 0 and origin and cov.ball_count == len(centres) and dt < 60
    verdict("C7", ok, f"x1 cover {lin}; saddle origin detected {origin}; degree-4 cover {cov.ball_count} vs "
                      f"exhaustive {len(centres)}; {dt:.1f} s (< 60 s)")


def test_c8_sublevel_disk():
    K = 243
    u = zoo.saddle(2)
    idx = np.stack(np.meshgrid(np.arange(K), np.arange(K), indexing="ij"), -1).reshape(-1, 2)
    lo, hi = idx / K - 0.5, (idx + 1) / K - 0.5
    near = np.linalg.norm(np.clip(0.0, lo, hi), axis=1)
    far = np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)), axis=1)
    ok, sizes = True, []
    for a in (1, 2, 3):
        below, und = sublevel_set(u, Cube.unit(2), a, K)
        got = {tuple(c) for c in np.concatenate([below, und])}
        rho = math.exp(-a) / 2
        ok &= {tuple(c) for c in idx[far < rho]} <= got <= {tuple(c) for c in idx[near < rho]}
        sizes.append(len(got))
    verdict("C8", ok, f"cells {sizes} for a = 1, 2, 3 lie between the inner and outer disk covers")


@pytest.fixture(scope="module")
def curated_census(tmp_path_factory):
    base = load(ROOT / "configs" / "census_curated_zoo.json")
    out = tmp_path_factory.mktemp("census")
    t0 = time.perf_counter()
    reports = {A: run(base.with_value("lattice.A", A), str(out / f"A{A}")) for A in (4, 13)}
    return reports, time.perf_counter() - t0


def _census_rows(reports):
    rows = []
    for A, rep in reports.items():
        for m in rep.results["members"]:
            for cs in m["censuses"]:
                rows.append((A, m["member"], cs["bad_count"], cs["undecided_count"], cs["bound"]))
    return rows


def test_c9_census_experiment(curated_census):
    """The experiment's obligations: run in budget, report every violation, and
    never find more certified-bad cubes than the ceiling allows."""
    reports, dt = curated_census
    rows = _census_rows(reports)
    expected = {(A, m) for A, m, b, u, c in rows if b + u > c}
    emitted = {(A, f["member"]) for A, rep in reports.items() for f in rep.failures
               if f["type"] == "ceiling_violation"}
    certified = sum(b <= c for A, m, b, u, c in rows)
    ok = dt < 1800 and emitted == expected and certified == len(rows)
    verdict("C9a", ok, f"{len(rows)} censuses in {dt:.0f} s (< 1800 s); {len(emitted)} violations emitted as "
                       f"findings; certified bad <= ceiling in {certified}/{len(rows)}")


@pytest.mark.xfail(strict=True, reason="margin-band undecided cubes beside off-origin zeros exceed the "
                                       "pessimistic ceiling; reported as findings")
def test_c9_pessimistic_ceiling(curated_census):
    reports, _ = curated_census
    rows = _census_rows(reports)
    over = [(A, m, b, u, c) for A, m, b, u, c in rows if b + u > c]
    detail = "; ".join(f"A={A} member {m}: {b}+{u} > {c:g}" for A, m, b, u, c in over)
    verdict("C9b", not over, f"bad+undecided <= ceiling in {len(rows) - len(over)}/{len(rows)}"
                             + (f" ({detail})" if over else ""))


def test_c10_recursion():
    params = {"A": 4, "delta": 0.5, "c": 1.0, "C1": 0.1, "N0": 10.0}
    coarse, _, gap = refine_oracle(params, base_case_boundary(2.0, 1.0, 10.0), (10, 160), (0, 1000))
    fit = fit_decay(coarse)
    ok = fit["beta"] > 0 and fit["holds"] and gap < 0.01
    verdict("C10", ok, f"beta' = {fit['beta']:.4f} (> 0), C' = {fit['C']:.4f}, bound holds on grid {fit['holds']}; "
                       f"4x-density gap {gap:.2e} (< 1e-2)")


def gap_peaked(k: int) -> HarmonicFunction:
    """u = Re F with F'(z) = (z^2 - 1/4)^k: |grad u| peaks at 0 along the segment and
    vanishes at its endpoints, so the sup over a Cantor set sees its central gap."""
    coef = P.polyint(P.polypow([-0.25, 0.0, 1.0], k))
    poly = None
    for j, c in enumerate(coef):
        if j and c:
            term = zoo.real_power(j).poly.scale(float(c))
            poly = term if poly is None else poly + term
    return HarmonicFunction.from_poly(poly)


def test_c11_propagation_exponent():
    K = 27
    idx = np.stack(np.meshgrid(np.arange(K), np.arange(K), indexing="ij"), -1).reshape(-1, 2)
    lo, hi = idx / K - 0.5, (idx + 1) / K - 0.5
    ball = GridSet.from_cells(K, idx[np.linalg.norm(np.clip(0.0, lo, hi), axis=1) <= 0.5])
    mixed = [zoo.random_harmonic(2, d, 40 + d) for d in (2, 3, 4, 5)]
    alpha_ball = fit_propagation_exponent(mixed, ball)["alpha"]
    fam = [gap_peaked(k) for k in range(1, 7)]  # degrees 3, 5, ..., 13
    fits = {}
    for delta in (0.25, 0.5, 1.0):
        E = cantor_product_set(delta, 2, 4, "hyperplane")  # dimension n - 2 + delta in the plane
        rep = fit_propagation_exponent(fam, E, 1e-9, delta)
        # closed form: with g = max_E |x^2 - 1/4|, eps = (g / (5/4))^k and sigma = (2/5)^k
        a, b = E.cell_bounds()
        gap = np.where((a[:, 0] <= 0) & (b[:, 0] >= 0), 0.0, np.minimum(abs(a[:, 0]), abs(b[:, 0]))).min()
        exact = math.log(0.4) / math.log((0.25 - gap**2) / 1.25)
        fits[delta] = (rep["alpha"], rep["residual"], exact)
    ok = abs(alpha_ball - 1) <= 1e-3 and all(a > 0 and res < 0.1 and abs(a - ex) < 1e-6
                                             for a, res, ex in fits.values())
    verdict("C11", ok, f"alpha(B_1/2) = {alpha_ball:.6f}; Cantor " +
            ", ".join(f"delta {d}: alpha {a:.4f} (closed form {ex:.4f}) resid {res:.1e}"
                      for d, (a, res, ex) in fits.items()))


def test_c12_determinism(tmp_path):
    cfg = load(ROOT / "configs" / "theorem33_n2.json")
    same = True
    for k in (1, 2):
        run(cfg, str(tmp_path / str(k)))
        for suffix in ("json", "csv"):
            same &= (tmp_path / str(k) / f"theorem33_n2.{suffix}").read_bytes() == \
                (ROOT / "tests" / "golden" / f"theorem33_n2.{suffix}").read_bytes()
    rep, _, _ = execute(load(ROOT / "configs" / "three_spheres_random.json"))
    rep2, _, _ = execute(load(ROOT / "configs" / "three_spheres_random.json"))
    same &= rep.dumps() == rep2.dumps()
    verdict("C12", same, "golden report and CSV byte-identical across two runs; seeded config reproducible")
