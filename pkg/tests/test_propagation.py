import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uclab import zoo
from uclab.harmonic import HarmonicFunction
from uclab.lattice import Cube, GridSet, hyperplane_children
from uclab.polynomial import Poly
from uclab.propagation.census import (BAD, GOOD, Inapplicable, bad_cube_census, capacity_census, classify_cubes,
                                      generation, hyperplane_census, precondition, width_of_bad_set, _directions)
from uclab.propagation.critical import effective_critical_set
from uclab.propagation.exponent import FitError, fit_propagation_exponent, weak_bound_calculator
from uclab.propagation.recursion import (RecursionGridError, base_case_boundary, fit_decay, recursion_simulate,
                                         refine_oracle)
from uclab.propagation.sublevel import sublevel_content, sublevel_set

from conftest import planar_abs_grad


def power_index(d: int, q: Cube) -> float:
    """Exact maximal doubling of Re z^d on q: |grad u| = d|z|^(d-1), so
    log sup B(x, 20r) / sup B(x, r) = (d-1) log((|x| + 20r) / (|x| + r)),
    largest at the point of q nearest 0 with r = side."""
    lo, hi = q.bounds()
    m = float(np.linalg.norm(np.clip(0.0, lo, hi)))
    s = float(q.side)
    return (d - 1) * math.log((m + 20 * s) / (m + s))


def planar_value(u, z):
    """u = Re f(z) from the serialised spherical-harmonic terms (independent of Poly)."""
    coef = {}
    for t in u.to_dict()["terms"]:
        d, m, a = t["degree"], t["order"], float(t["amplitude"])
        coef[d] = coef.get(d, 0) + (a if m >= 0 else -1j * a) / math.sqrt(math.pi * (2 if d == 0 else 1))
    return np.real(sum(c * z**d for d, c in coef.items()))


# -- censuses -----------------------------------------------------------------------


def test_linear_census_has_no_bad_cubes(linear2):
    for N in (0.1, 1.0, 5.0):
        for res in bad_cube_census(linear2, Cube.unit(2), 4, N, generations=2):
            assert res.bad_count == 0 and res.undecided_count == 0


def test_census_above_global_index_is_empty():
    u = zoo.real_power(4)
    NQ = precondition(u, Cube.unit(2), math.inf, 0.1)
    res = bad_cube_census(u, Cube.unit(2), 4, 2 * NQ, c=0.1, check_precondition=False)[0]
    assert res.bad_count == 0


@pytest.mark.parametrize("d,generations", [(3, 2), (5, 1), (7, 1)])
def test_census_against_exact_power_oracle(d, generations):
    u = zoo.real_power(d)
    N = 2 * (d - 1) * math.log(2)
    for k in range(1, generations + 1):
        cubes = generation(Cube.unit(2), 4, k)
        cl = classify_cubes(u, cubes, N)
        exact = np.array([power_index(d, q) for q in cubes])
        status = np.array(cl.status)
        assert np.all(cl.lower <= exact + 1e-9)
        assert np.all(exact[status == BAD] > 1.05 * N)
        assert np.all(exact[status == GOOD] < 0.95 * N)
        assert (status == BAD).sum() == (exact > 1.05 * N).sum()


def test_census_monotone_in_threshold():
    u = zoo.shifted_real_power(3, 0.1 + 0.3j)
    cubes = generation(Cube.unit(2), 4, 1)
    counts = [classify_cubes(u, cubes, N, margin=0.1).status.count(BAD) for N in (1.0, 2.0, 3.0, 4.0)]
    assert counts == sorted(counts, reverse=True)


def test_precondition_is_reported_not_raised_as_error():
    with pytest.raises(Inapplicable) as exc:
        bad_cube_census(zoo.real_power(6), Cube.unit(2), 4, 1.0, c=0.1)
    assert exc.value.details["NQ_lower"] > 1.1


def test_hyperplane_census_against_exact_oracle():
    d = 5
    u = zoo.real_power(d)
    N = 2 * (d - 1) * math.log(2)
    res = hyperplane_census(u, Cube.unit(2), 4, N, check_precondition=False)
    kids = hyperplane_children(Cube.unit(2), 4)
    exact = np.array([power_index(d, q) for q in kids])
    assert res.total_count == 9
    assert (exact > 1.05 * N).sum() <= res.bad_count + res.undecided_count
    assert res.bad_count <= (exact > 1.05 * N).sum()


def test_hyperplane_census_linear(linear2):
    res = hyperplane_census(linear2, Cube.unit(2), 4, 1.0)
    assert res.bad_count == 0
    with pytest.raises(Inapplicable):
        hyperplane_census(linear2, Cube.centered(("0", "1/9"), "1/9"), 4, 1.0)


def test_capacity_census_vacuous_for_linear(linear2):
    rep = capacity_census(linear2, Cube.unit(2), 4, 1.0)
    assert rep["vacuous"] and rep["capacity_pessimistic"] == 0.0


# -- thinness -----------------------------------------------------------------------


def test_width_of_linear_is_zero(linear2):
    rep = width_of_bad_set(linear2, Cube.centered(("0", "0"), "1/3"), 0.5)
    assert rep["width"] == 0.0 and rep["bad_points"] == 0


@pytest.mark.parametrize("c", [0.05, 0.5, 2.0])
def test_width_of_saddle_against_dense_grid(saddle, c):
    q = Cube.centered(("1/9", "0"), "1/3")
    rep = width_of_bad_set(saddle, q, c, generations_down=2)
    # |grad u| = 2|x| gives N(x, r) = log((|x| + 20 r) / (|x| + r)), largest at the top rung
    r = rep["ladder"][0]
    m = 90
    lo, hi = q.bounds()
    axes = [lo[i] + (np.arange(m) + 0.5) * (hi[i] - lo[i]) / m for i in range(2)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
    R = np.linalg.norm(pts, axis=1)
    F = pts[np.log((R + 20 * r) / (R + r)) > rep["threshold"]]
    proj = F @ _directions(2, 16).T
    oracle = float((proj.max(0) - proj.min(0)).min()) if len(F) else 0.0
    spacing = float(q.side) / 9
    assert rep["width"] <= oracle + 1e-12
    assert oracle - rep["width"] <= 2 * spacing


# -- sublevel sets ------------------------------------------------------------------


@pytest.mark.parametrize("a", [1, 2, 3])
def test_sublevel_set_is_the_exact_disk(saddle, a):
    K = 243
    below, undecided = sublevel_set(saddle, Cube.unit(2), a, K)
    got = {tuple(c) for c in np.concatenate([below, undecided])}
    radius = math.exp(-a) / 2
    idx = np.stack(np.meshgrid(np.arange(K), np.arange(K), indexing="ij"), -1).reshape(-1, 2)
    lo, hi = idx / K - 0.5, (idx + 1) / K - 0.5
    near = np.linalg.norm(np.clip(0.0, lo, hi), axis=1)
    far = np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)), axis=1)
    inside = {tuple(c) for c in idx[far < radius]}
    meets = {tuple(c) for c in idx[near < radius]}
    assert inside <= got <= meets


def test_sublevel_content_monotone_in_a(saddle):
    vals = [sublevel_content(saddle, Cube.unit(2), a, 0.5, 81).content.upper for a in (0.5, 1, 2, 3, 4)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_sublevel_empty_for_nonvanishing_gradient():
    u = HarmonicFunction.from_poly(Poly(2, {(1, 0): 1.0, (2, 0): 0.05, (0, 2): -0.05}))
    rep = sublevel_content(u, Cube.unit(2), 1.0, 0.5, 27)
    assert rep.below_count == rep.undecided_count == 0
    assert rep.content.upper == 0.0


# -- effective critical sets --------------------------------------------------------


def test_critical_set_of_linear_is_empty(linear2):
    cov = effective_critical_set(linear2, Cube.unit(2), 1 / 27, 81)
    assert cov.ball_count == 0 and cov.undecided == 0


def test_critical_set_of_saddle_contains_origin_cell(saddle):
    cov = effective_critical_set(saddle, Cube.unit(2), 1 / 9, 27)
    assert any(np.allclose(p, 0.0) for p in cov.detected)


def brute_greedy_count(points, r):
    centres = []
    for p in points:
        if not any(np.linalg.norm(p - c) <= r * (1 + 1e-12) for c in centres):
            centres.append(p)
    return len(centres)


def test_critical_cover_against_exhaustive_enumeration():
    u = zoo.random_harmonic(2, 4, 0)
    K, r = 81, 1 / 27
    cov = effective_critical_set(u, Cube.unit(2), r, K)
    idx = np.stack(np.meshgrid(np.arange(K), np.arange(K), indexing="ij"), -1).reshape(-1, 2)
    x = (idx + 0.5) / K - 0.5
    z = x[:, 0] + 1j * x[:, 1]
    # the sphere mean of a trigonometric polynomial is exact on 4096 equispaced nodes
    circle = np.exp(2j * np.pi * np.arange(4096) / 4096)
    rhs = np.array([2 / 16 / r**2 * np.mean((planar_value(u, w + 2 * r * circle) - planar_value(u, w)) ** 2)
                    for w in z])
    disk = (np.sqrt(np.linspace(0, 1, 60))[:, None] * r * np.exp(2j * np.pi * np.arange(240) / 240)[None]).ravel()
    mins = np.array([(planar_abs_grad(u, w + disk) ** 2).min() for w in z])
    clear = np.abs(mins - rhs) > 1e-3 * rhs
    assert clear.all()
    oracle = x[mins < rhs]
    assert cov.ball_count > 0
    assert {tuple(np.round(p, 12)) for p in cov.detected} == {tuple(np.round(p, 12)) for p in oracle}
    assert cov.ball_count == brute_greedy_count(oracle, r)


@pytest.mark.parametrize("seed", [0, 2, 5])
def test_critical_cover_halving_stability(seed):
    u = zoo.random_harmonic(2, 4, seed)
    a = effective_critical_set(u, Cube.unit(2), 1 / 27, 81).ball_count
    b = effective_critical_set(u, Cube.unit(2), 1 / 54, 81).ball_count
    assert b >= a / 4**2


# -- recursion ----------------------------------------------------------------------


PARAMS = {"A": 4, "delta": 0.5, "c": 1.0, "C1": 0.1, "N0": 10.0}


def test_zero_boundary_gives_zero():
    st_ = recursion_simulate(PARAMS, lambda N, a: np.zeros_like(np.asarray(a, float)), (10, 160), (0, 1000))
    assert np.all(st_.M == 0) and np.all(st_.tails == 0)


def test_constant_boundary_two_level_closed_form():
    kappa, cap = 0.01, 1.0
    st_ = recursion_simulate(PARAMS, lambda N, a: np.full(np.shape(a), kappa), (10, 20), (0, 200), cap=cap)
    assert len(st_.N) == 2
    w1, w2 = 4**1.5, 4**-0.5
    # hand-rolled: below the grid the first term sees kappa and the second the row's own
    # tail, so the tail is the fixed point of x = w1 kappa + w2 x; every node equals it
    tail = min(cap, w1 * kappa * sum(w2**j for j in range(200)))
    assert tail == pytest.approx(0.16, rel=1e-12)
    np.testing.assert_allclose(st_.M[0], kappa, rtol=0)
    np.testing.assert_allclose(st_.M[1], tail, rtol=1e-12)
    kappa_big = 0.1  # the prefactor sum 1.6 exceeds the cap: capped everywhere
    st2 = recursion_simulate(PARAMS, lambda N, a: np.full(np.shape(a), kappa_big), (10, 20), (0, 200), cap=cap)
    np.testing.assert_array_equal(st2.M[1], cap)


@settings(max_examples=10, deadline=None)
@given(scale=st.floats(1.0, 5.0), C=st.floats(0.1, 3.0))
def test_recursion_monotone(scale, C):
    lo = recursion_simulate(PARAMS, base_case_boundary(C, 1.0, 10.0), (10, 80), (0, 300))
    hi = recursion_simulate(PARAMS, base_case_boundary(C * scale, 1.0, 10.0), (10, 80), (0, 300))
    assert np.all(np.diff(lo.M, axis=1) <= 1e-15)
    assert np.all(lo.M <= hi.M + 1e-15)


def test_recursion_refuses_misaligned_grid():
    with pytest.raises(RecursionGridError):
        recursion_simulate(PARAMS, base_case_boundary(), (10, 160), (0, 100), a_step=0.37)


def test_recursion_decay_fit_and_refinement():
    coarse, fine, gap = refine_oracle(PARAMS, base_case_boundary(2.0, 1.0, 10.0), (10, 160), (0, 1000))
    fit = fit_decay(coarse)
    assert fit["beta"] > 0 and fit["holds"]
    assert gap < 0.01


def test_statement_variant_is_flagged():
    st_ = recursion_simulate(PARAMS, base_case_boundary(), (10, 40), (0, 200), variant="statement")
    assert st_.variant == "statement" and st_.notes


# -- exponent fits and the weak bound -----------------------------------------------


def half_ball_cells(K: int) -> GridSet:
    idx = np.stack(np.meshgrid(np.arange(K), np.arange(K), indexing="ij"), -1).reshape(-1, 2)
    lo, hi = idx / K - 0.5, (idx + 1) / K - 0.5
    return GridSet.from_cells(K, idx[np.linalg.norm(np.clip(0.0, lo, hi), axis=1) <= 0.5])


def test_exponent_is_one_on_the_target_ball():
    fam = [zoo.random_harmonic(2, d, s) for d, s in ((2, 1), (3, 2), (5, 3), (7, 4))]
    rep = fit_propagation_exponent(fam, half_ball_cells(27))
    assert rep["alpha"] == pytest.approx(1.0, abs=1e-3)
    assert rep["clipped_to_half_ball"]


def test_exponent_closed_form_for_homogeneous_segment():
    # E = [-1/6, 1/6] x {0}; with sup over B(0, 1) normalised to 1,
    # eps = 6^-(d-1) and sigma = 2^-(d-1), so alpha = log 2 / log 6
    E = GridSet.from_cells(3, [(1, 1)], slices=((1, Fraction(0)),))
    fam = [zoo.real_power(d) for d in range(2, 8)]
    rep = fit_propagation_exponent(fam, E, tolerance=1e-9)
    assert rep["alpha"] == pytest.approx(math.log(2) / math.log(6), abs=1e-6)
    assert rep["residual"] < 1e-6


def test_exponent_needs_four_members():
    with pytest.raises(FitError):
        fit_propagation_exponent([zoo.real_power(2)] * 3, half_ball_cells(9))


def test_weak_bound_examples():
    assert weak_bound_calculator(2.0, 1.0, math.e, 1.0)["N"] == 0.0
    assert weak_bound_calculator(0.5, 1.0, math.e, 3.0)["N"] == 0.0
    rep = weak_bound_calculator(1.0, math.exp(-8), math.e, 1.0)
    assert rep["N"] == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("kappa,eps,C,beta", [(3.0, 1e-4, 1.7, 0.6), (0.5, 1e-9, 5.0, 2.0), (20.0, 0.3, 1.1, 1.0)])
def test_weak_bound_against_scan(kappa, eps, C, beta):
    rep = weak_bound_calculator(kappa, eps, C, beta)
    grid = np.linspace(0, 2 * rep["N"] + 1, 2_000_001)
    f = grid**3 * math.log(C) - grid * math.log(kappa) - beta * math.log(1 / eps)
    root = grid[np.nonzero((f[:-1] < 0) & (f[1:] >= 0))[0][-1] + 1]
    assert rep["N"] == pytest.approx(root, abs=grid[1] - grid[0])
    assert rep["smallness"] == pytest.approx(math.exp(-rep["N"]))
