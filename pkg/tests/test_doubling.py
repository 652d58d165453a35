import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uclab import zoo
from uclab.doubling import (DoublingReport, almost_monotonicity_gap, big_scale_doubling_check, doubling_index,
                            l2_doubling_index, l2_ladder, maximal_doubling, three_spheres_defect,
                            three_spheres_report)
from uclab.harmonic import HarmonicFunction
from uclab.lattice import Cube
from uclab.polynomial import Poly

from conftest import dense_circle_sup, planar_abs_grad

# e(1/8) for random_harmonic(2, 10, 2024) at x = (0.1, 0.1), r = 1/2, from 10^6-point
# circle sampling of |f'(z)| (u = Re f); see conftest.planar_abs_grad
BIG_SCALE_ORACLE = 0.27722222222001747


# -- exact cases --------------------------------------------------------------------


def test_linear_has_zero_index(linear2):
    assert doubling_index(linear2, (0.3, 0.1), 0.2).index_value == 0.0
    assert l2_doubling_index(linear2, (0.3, 0.1), 0.2).index_value == 0.0
    assert maximal_doubling(linear2, Cube.unit(2)).index_value == 0.0


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("d", [2, 4, 7])
def test_homogeneous_indices(n, d):
    u = zoo.homogeneous(n, d, 0)
    for r in (0.125, 0.25):
        rep = doubling_index(u, (0,) * n, r)
        assert abs(rep.index_value - (d - 1) * math.log(2)) <= max(rep.error_bound, 1e-5)
        rep2 = l2_doubling_index(u, (0,) * n, r)
        assert rep2.index_value == pytest.approx(2 * (d - 1) * math.log(2), abs=1e-8)


def test_saddle_off_centre_against_dense_sampling(saddle):
    rep = doubling_index(saddle, (0.5, 0.0), 0.25, 1e-9)
    oracle = math.log(dense_circle_sup(lambda z: 2 * np.abs(z), 0.5, 0.5)
                      / dense_circle_sup(lambda z: 2 * np.abs(z), 0.5, 0.25))
    assert abs(rep.index_value - oracle) <= rep.error_bound + 1e-9
    assert oracle == pytest.approx(math.log(4 / 3), abs=1e-12)


def test_l2_index_closed_form():
    # |grad u|^2 = 1 + 0.4 x + 0.04 |x|^2 has disk mean 1 + 0.02 R^2
    u = HarmonicFunction.from_poly(Poly(2, {(1, 0): 1, (2, 0): 0.1, (0, 2): -0.1}))
    rep = l2_doubling_index(u, (0, 0), 0.3, 1e-12)
    assert rep.index_value == pytest.approx(math.log((1 + 0.02 * 0.36) / (1 + 0.02 * 0.09)), abs=1e-11)


def test_maximal_doubling_cubic_on_offset_cube():
    # |grad u| = 3|z|^2; the index (|x|+20r)^2/(|x|+r)^2 peaks at the corner nearest 0 with r = side
    u = zoo.real_power(3)
    Q = Cube.centered(("1/4", "1/4"), "1/10")
    m = 0.2 * math.sqrt(2)
    oracle = 2 * math.log((m + 2.0) / (m + 0.1))
    rep = maximal_doubling(u, Q, tolerance=1e-6)
    assert rep.provenance["lower_bound"]
    assert rep.index_value <= oracle + 1e-6
    assert rep.index_value == pytest.approx(oracle, abs=1e-5)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_maximal_doubling_homogeneous_at_origin(d):
    u = zoo.real_power(d)
    rep = maximal_doubling(u, Cube.centered((0, 0), "1/8"))
    assert rep.index_value >= (d - 1) * math.log(20) - 1e-3


def test_report_validation_and_bounds():
    with pytest.raises(ValueError):
        DoublingReport((0.0,), 1.0, 0.0, 0.0, "bogus", {})
    rep = DoublingReport((0.0, 0.0), 0.5, 2.0, 0.1, "sup_ratio", {})
    assert (rep.lower, rep.upper) == (1.9, 2.1)
    with pytest.raises(ValueError):
        doubling_index(zoo.saddle(), (0, 0), 0.0)


# -- three spheres ------------------------------------------------------------------


@pytest.mark.parametrize("n,d", [(2, 3), (3, 4)])
def test_three_spheres_equality_for_single_harmonic(n, d):
    u = zoo.homogeneous(n, d, 0)
    assert abs(three_spheres_defect(u, (0,) * n, 0.1, 0.3, 0.9)) <= 1e-8


def test_three_spheres_mixed_degrees_closed_form():
    # ||u||_r^2 = sum a_d^2 r^(2d + n - 1) for orthonormal spherical harmonics
    u = HarmonicFunction("spherical_harmonic_sum", 2, ((1, 0, 1.0), (4, 0, 0.5)))
    r1, r2, r3 = 0.2, 0.5, 0.9

    def lognorm(r):
        return 0.5 * math.log(r**3 + 0.25 * r**9)

    a = math.log(r3 / r2) / math.log(r3 / r1)
    exact = lognorm(r2) - a * lognorm(r1) - (1 - a) * lognorm(r3)
    got = three_spheres_defect(u, (0, 0), r1, r2, r3)
    assert exact < 0
    assert got == pytest.approx(exact, abs=1e-10)


def test_three_spheres_degenerate_radii(saddle):
    rep = three_spheres_report(saddle, (0.1, 0.0), 0.3, 0.3, 0.6)
    assert rep["defect"] == 0.0
    with pytest.raises(ValueError):
        three_spheres_defect(saddle, (0, 0), 0.5, 0.4, 0.6)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), radii=st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3, unique=True))
def test_three_spheres_defect_nonpositive(seed, radii):
    u = zoo.random_harmonic(3, 5, seed)
    r1, r2, r3 = sorted(radii)
    rep = three_spheres_report(u, (0.1, 0.0, -0.1), r1, r2, r3)
    assert rep["defect"] <= rep["error_bound"] + 1e-10


# -- big-scale doubling -------------------------------------------------------------


@pytest.mark.parametrize("t", [0.1, 0.25, 0.4])
def test_big_scale_homogeneous_exponent(t):
    u = zoo.real_power(5)
    rep = big_scale_doubling_check(u, (0, 0), 0.5, t, N_threshold=1.0)
    assert rep["applicable"]
    assert rep["exponent"] == pytest.approx(4.0, abs=rep["exponent_error"] + 1e-6)


def test_big_scale_inapplicable_for_linear(linear2):
    rep = big_scale_doubling_check(linear2, (0, 0), 0.5, 0.25, N_threshold=0.1)
    assert not rep["applicable"]


def test_big_scale_random_degree_ten_against_oracle():
    u = zoo.random_harmonic(2, 10, 2024)
    rep = big_scale_doubling_check(u, (0.1, 0.1), 0.5, 1 / 8, N_threshold=0.05, tolerance=1e-9)
    assert rep["applicable"]
    assert rep["exponent"] == pytest.approx(BIG_SCALE_ORACLE, abs=rep["exponent_error"] + 1e-7)


def test_big_scale_oracle_reproducible_from_helper():
    u = zoo.random_harmonic(2, 10, 2024)
    x = 0.1 + 0.1j
    e = math.log(dense_circle_sup(lambda z: planar_abs_grad(u, z), x, 1 / 16)
                 / dense_circle_sup(lambda z: planar_abs_grad(u, z), x, 0.5)) / math.log(1 / 8)
    assert e == pytest.approx(BIG_SCALE_ORACLE, abs=1e-9)


# -- invariants ---------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), r=st.floats(0.02, 0.4),
       x=st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3)))
def test_indices_nonnegative(seed, r, x):
    u = zoo.random_harmonic(2, 6, seed)
    rep = doubling_index(u, x, r, 1e-6)
    assert rep.index_value >= -rep.error_bound
    rep2 = l2_doubling_index(u, x, r)
    assert rep2.index_value >= -rep2.error_bound


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.sampled_from([2, 3]))
def test_l2_index_monotone_along_ladder(seed, n):
    u = zoo.random_harmonic(n, 6, seed)
    rep = l2_ladder(u, (0.05,) * n, np.geomspace(0.01, 0.5, 16))
    assert rep["monotone"]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0.3, 3.0),
       b=st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2)))
def test_doubling_scaling_invariance(seed, lam, b):
    u = zoo.random_harmonic(2, 5, seed)
    v = u.compose_affine(lam * np.eye(2), np.array(b))  # v(y) = u(lam y + b)
    x, r = np.array([0.05, -0.1]), 0.1
    a = doubling_index(v, x, r, 1e-7)
    c = doubling_index(u, lam * x + np.array(b), lam * r, 1e-7)
    assert abs(a.index_value - c.index_value) <= a.error_bound + c.error_bound + 1e-9


def test_almost_monotonicity_constant_on_zoo():
    gaps = []
    for u in zoo.random_zoo(2, 12, 5, 8):
        for x in ([0.0, 0.0], [0.2, -0.1]):
            for r in (0.05, 0.1, 0.2):
                if u.harmonic_on_ball(x, 2 * r):
                    gaps.append(almost_monotonicity_gap(u, x, r, 0.25))
    assert max(gaps) <= 10
