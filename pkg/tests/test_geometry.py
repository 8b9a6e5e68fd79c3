import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import betainc

from knn_extremes.geometry import (ball_box_intersection, ball_box_volume,
                                   regularized_incomplete_beta, spherical_cap_volume,
                                   union_two_balls_exact, union_two_balls_paper_formula,
                                   unit_ball_volume)
from oracles import lens_3d, qmc_ball_box


@pytest.mark.parametrize("d, expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3),
                                         (4, math.pi ** 2 / 2)])
def test_unit_ball_volume(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-15)


def test_unit_ball_volume_rejects_zero():
    with pytest.raises(ValueError):
        unit_ball_volume(0)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.1, 20), st.floats(0.1, 20))
@settings(max_examples=300, deadline=None)
def test_incomplete_beta_matches_scipy(x, a, b):
    assert regularized_incomplete_beta(x, a, b) == pytest.approx(betainc(a, b, x), rel=1e-11,
                                                                 abs=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 7])
def test_cap_trivial_values(d):
    assert spherical_cap_volume(d, 0.0) == pytest.approx(unit_ball_volume(d) / 2, rel=1e-14)
    assert spherical_cap_volume(d, 1.0) == 0.0
    assert spherical_cap_volume(d, -1.0) == pytest.approx(unit_ball_volume(d), rel=1e-14)


def test_cap_three_dim_closed_form():
    # pi h^2 (3 - h) / 3 with h = 1 - a
    h = 0.5
    assert spherical_cap_volume(3, 0.5) == pytest.approx(math.pi * h * h * (3 - h) / 3, rel=1e-13)
    assert spherical_cap_volume(3, 0.5) == pytest.approx(0.654498, abs=1e-6)


def test_cap_two_dim_segment():
    # circular segment area arccos(a) - a sqrt(1 - a^2)
    for a in np.linspace(-0.99, 0.99, 23):
        expected = math.acos(a) - a * math.sqrt(1 - a * a)
        assert spherical_cap_volume(2, a) == pytest.approx(expected, rel=1e-12)


def test_cap_rejects_offset_outside():
    with pytest.raises(ValueError):
        spherical_cap_volume(3, 1.5)


@given(st.integers(1, 10), st.floats(0, 1))
def test_cap_complement(d, a):
    total = spherical_cap_volume(d, a) + spherical_cap_volume(d, -a)
    assert total == pytest.approx(unit_ball_volume(d), rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_union_coincident_and_disjoint(d):
    assert union_two_balls_exact(d, 1.0, 0.0) == pytest.approx(unit_ball_volume(d), rel=1e-14)
    assert union_two_balls_exact(d, 1.0, 2.0) == pytest.approx(2 * unit_ball_volume(d), rel=1e-14)
    assert union_two_balls_exact(d, 1.0, 5.0) == pytest.approx(2 * unit_ball_volume(d), rel=1e-14)


def test_union_three_dim_lens():
    exact = union_two_balls_exact(3, 1.0, 1.0)
    assert exact == pytest.approx(9 * math.pi / 4, abs=1e-12)
    assert exact == pytest.approx(2 * 4 * math.pi / 3 - lens_3d(1.0, 1.0), abs=1e-12)


@given(st.floats(0.1, 3.0), st.floats(0.0, 1.0))
def test_union_three_dim_lens_property(r, frac):
    t = 2 * r * frac
    assert union_two_balls_exact(3, r, t) == pytest.approx(
        8 * math.pi * r ** 3 / 3 - lens_3d(r, t), rel=1e-11, abs=1e-12)


def test_union_one_dim_is_interval_union():
    assert union_two_balls_exact(1, 1.0, 1.0) == 3.0
    assert union_two_balls_exact(1, 0.5, 0.2) == pytest.approx(1.2)


@given(st.integers(1, 6), st.floats(0.1, 2.0), st.floats(0, 5), st.floats(0, 5))
def test_union_monotone_in_distance(d, r, t1, t2):
    lo, hi = sorted((t1, t2))
    assert union_two_balls_exact(d, r, lo) <= union_two_balls_exact(d, r, hi) * (1 + 1e-14)


def test_union_rejects_bad_arguments():
    with pytest.raises(ValueError):
        union_two_balls_exact(2, 0.0, 1.0)
    with pytest.raises(ValueError):
        union_two_balls_exact(2, 1.0, -0.1)


def test_planar_formula_values():
    assert union_two_balls_paper_formula(2, 0.0) == pytest.approx(math.pi, rel=1e-15)
    assert union_two_balls_paper_formula(2, 2.0) == pytest.approx(2 * math.pi, rel=1e-15)
    assert union_two_balls_paper_formula(2, 1.0) == pytest.approx(
        4 * math.pi / 3 + math.sqrt(3) / 2, rel=1e-14)
    assert union_two_balls_paper_formula(2, 1.0) == pytest.approx(5.054816, abs=1e-6)


def test_planar_formula_matches_exact_in_the_plane():
    for t in np.linspace(0, 2, 100):
        assert union_two_balls_paper_formula(2, t) == pytest.approx(
            union_two_balls_exact(2, 1.0, t), rel=1e-12)


def test_planar_formula_is_wrong_in_three_dims():
    assert union_two_balls_paper_formula(3, 1.0) == pytest.approx(73 * math.pi / 36, rel=1e-14)
    assert union_two_balls_paper_formula(3, 1.0) < union_two_balls_exact(3, 1.0, 1.0) - 0.6


@pytest.mark.parametrize("d, t", [(1, 1.0), (2, -0.1), (2, 2.1)])
def test_planar_formula_rejects(d, t):
    with pytest.raises(ValueError):
        union_two_balls_paper_formula(d, t)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_ball_box_interior_and_corner(d):
    kappa = unit_ball_volume(d)
    assert ball_box_volume(np.full(d, 0.5), 0.25) == kappa * 0.25 ** d
    assert ball_box_volume(np.zeros(d), 0.5) == pytest.approx(kappa * 0.5 ** d / 2 ** d, rel=1e-9)
    assert ball_box_volume(np.ones(d), 0.5) == pytest.approx(kappa * 0.5 ** d / 2 ** d, rel=1e-9)


def test_ball_box_half_disk():
    assert ball_box_volume([0.0, 0.5], 0.3) == pytest.approx(math.pi * 0.09 / 2, rel=1e-9)
    assert ball_box_volume([0.0, 0.5], 0.3) == pytest.approx(0.141372, abs=1e-6)


def test_ball_box_edge_of_cube_three_dims():
    # center on an edge: a quarter ball
    v = ball_box_volume([0.0, 0.0, 0.5], 0.3)
    assert v == pytest.approx(unit_ball_volume(3) * 0.027 / 4, rel=1e-9)


def test_ball_box_empty_and_full():
    assert ball_box_volume([3.0, 3.0], 0.5) == 0.0
    assert ball_box_volume([0.5, 0.5, 0.5], 2.0) == pytest.approx(1.0, rel=1e-12)


def test_ball_box_general_box():
    v = ball_box_intersection([0.0, 0.0], 1.0, [0.0, 0.0], [2.0, 2.0])
    assert v == pytest.approx(math.pi / 4, rel=1e-9)
    with pytest.raises(ValueError):
        ball_box_intersection([0.0, 0.0], 1.0, [1.0, 0.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        ball_box_intersection([0.0, 0.0], 0.0, [0.0, 0.0], [1.0, 1.0])


def test_ball_box_planar_segment_closed_form():
    # disk of radius r centered at distance h < r outside one face: a circular segment
    r, h = 0.4, 0.1
    v = ball_box_volume([0.5, -h], r)
    a = h / r
    expected = r * r * (math.acos(a) - a * math.sqrt(1 - a * a))
    assert v == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_ball_box_qmc_oracle(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        center = rng.random(d)
        r = math.exp(rng.uniform(math.log(0.05), math.log(math.sqrt(d))))
        est, se = qmc_ball_box(center, r, log2_points=16)
        assert abs(ball_box_volume(center, r) - est) <= 4 * se + 1e-12


coords = st.floats(0.0, 1.0)


@given(st.integers(1, 3).flatmap(lambda d: st.tuples(st.lists(coords, min_size=d, max_size=d),
                                                     st.floats(0.01, 1.8), st.floats(0.01, 1.8))))
@settings(max_examples=60, deadline=None)
def test_ball_box_monotone_in_radius(args):
    center, r1, r2 = args
    lo, hi = sorted((r1, r2))
    assert ball_box_volume(center, lo) <= ball_box_volume(center, hi) + 1e-9 * ball_box_volume(center, hi) + 1e-12


@given(st.integers(1, 3).flatmap(lambda d: st.tuples(st.lists(coords, min_size=d, max_size=d),
                                                     st.floats(0.01, 1.0))))
@settings(max_examples=60, deadline=None)
def test_ball_box_bounds(args):
    center, r = args
    d = len(center)
    v = ball_box_volume(center, r)
    kappa = unit_ball_volume(d)
    assert 0.0 <= v <= min(kappa * r ** d, 1.0) * (1 + 1e-9) + 1e-12
    # the orthant pointing into the cube stays inside it while the radius is at most 1/2
    if r <= 0.5:
        assert v >= kappa * r ** d / 2 ** d * (1 - 1e-9) - 1e-12
