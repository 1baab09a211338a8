import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bandit_dopd.exceptions import ParameterError
from bandit_dopd.geometry import (
    Ball,
    Box,
    inner_radius,
    outer_radius,
    project,
    sample_unit_ball,
    sample_unit_sphere,
)


# -- radii ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "fset, expected",
    [(Box(5.0, 10), 5.0), (Ball(2.0, 3), 2.0), (Box(1.0, 1), 1.0)],
)
def test_inner_radius_examples(fset, expected):
    assert inner_radius(fset) == expected


@pytest.mark.parametrize(
    "fset, expected",
    [(Box(5.0, 10), 5.0 * np.sqrt(10)), (Ball(2.0, 3), 2.0), (Box(1.0, 4), 2.0)],
)
def test_outer_radius_examples(fset, expected):
    assert outer_radius(fset) == pytest.approx(expected, rel=1e-15)


def test_box_outer_radius_value():
    assert outer_radius(Box(5.0, 10)) == pytest.approx(15.811, abs=1e-3)


@pytest.mark.parametrize("fset", [Box(2.0, 3), Ball(1.5, 4)])
def test_radii_sandwich_by_sampling(fset):
    rng = np.random.default_rng(0)
    # points of norm <= r are inside
    inner = sample_unit_ball(rng, fset.dim, 5000) * fset.inner_radius
    assert np.all(fset.contains(inner))
    # points inside have norm <= R
    inside = fset.sample(rng, size=5000)
    assert np.all(np.linalg.norm(inside, axis=1) <= fset.outer_radius + 1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_invalid_sizes_rejected(bad):
    with pytest.raises(ParameterError):
        Box(bad, 2)
    with pytest.raises(ParameterError):
        Ball(bad, 2)


def test_invalid_dimension_rejected():
    with pytest.raises(ParameterError):
        Box(1.0, 0)


# -- projection ----------------------------------------------------------------


def test_project_box_clamp_example():
    out = project(Box(5.0, 2), 0.5, np.array([3.0, -1.0]))
    np.testing.assert_array_equal(out, [2.5, -1.0])


def test_project_ball_radial_example():
    out = project(Ball(2.0, 2), 1.0, np.array([3.0, 4.0]))
    np.testing.assert_allclose(out, [1.2, 1.6], rtol=0, atol=1e-15)


@pytest.mark.parametrize("fset", [Box(5.0, 3), Ball(2.0, 3)])
def test_project_inside_point_unchanged(fset):
    x = np.array([0.3, -0.2, 0.1])
    np.testing.assert_array_equal(project(fset, 1.0, x), x)


@pytest.mark.parametrize("shrink", [0.0, -0.1, 1.01])
def test_project_rejects_bad_shrink(shrink):
    with pytest.raises(ParameterError):
        project(Box(1.0, 2), shrink, np.zeros(2))


def _sets(dim):
    return st.one_of(
        st.floats(0.1, 10).map(lambda h: Box(h, dim)),
        st.floats(0.1, 10).map(lambda r: Ball(r, dim)),
    )


points = arrays(np.float64, 3, elements=st.floats(-50, 50, allow_nan=False))


@settings(max_examples=300, deadline=None)
@given(fset=_sets(3), shrink=st.floats(0.01, 1.0), x=points)
def test_projection_idempotent_and_member(fset, shrink, x):
    px = fset.project(x, shrink)
    np.testing.assert_array_equal(fset.project(px, shrink), px)
    assert fset.contains(px, shrink, tol=1e-12)


@settings(max_examples=200, deadline=None)
@given(fset=_sets(3), shrink=st.floats(0.01, 1.0), x=points, y=points)
def test_projection_nonexpansive_hypothesis(fset, shrink, x, y):
    d = np.linalg.norm(fset.project(x, shrink) - fset.project(y, shrink))
    assert d <= np.linalg.norm(x - y) + 1e-12


@pytest.mark.parametrize("fset", [Box(1.0, 5), Ball(1.0, 5)])
def test_projection_nonexpansive_many_pairs(fset):
    rng = np.random.default_rng(1)
    X = rng.normal(scale=3.0, size=(10_000, 5))
    Y = rng.normal(scale=3.0, size=(10_000, 5))
    lhs = np.linalg.norm(fset.project(X, 0.8) - fset.project(Y, 0.8), axis=1)
    rhs = np.linalg.norm(X - Y, axis=1)
    assert np.all(lhs <= rhs + 1e-12)


def _grid(fset, shrink, spacing):
    """Dense grid of the shrunken set for brute-force projection."""
    R = shrink * fset.outer_radius if isinstance(fset, Ball) else shrink * fset.half_width
    axis = np.arange(-R, R + spacing / 2, spacing)
    G = np.array(list(itertools.product(axis, repeat=fset.dim)))
    return G[fset.contains(G, shrink)]


@pytest.mark.parametrize("fset", [Box(1.0, 1), Box(1.0, 2), Ball(1.0, 2), Box(0.3, 3), Ball(0.3, 3)])
def test_projection_matches_grid_oracle(fset):
    rng = np.random.default_rng(2)
    shrink = 0.9
    spacing = 1e-2
    G = _grid(fset, shrink, spacing)
    X = rng.uniform(-3, 3, size=(200, fset.dim))
    P = fset.project(X, shrink)
    for x, px in zip(X, P):
        best = G[np.argmin(np.sum((G - x) ** 2, axis=1))]
        d_proj, d_grid = np.linalg.norm(px - x), np.linalg.norm(best - x)
        # the projection is at least as close as any grid point, and no closer by more than the grid spacing
        assert d_proj <= d_grid + 1e-12
        assert d_grid - d_proj <= spacing
        if isinstance(fset, Box):
            # for boxes the grid argmin is also coordinate-wise within the spacing
            assert np.max(np.abs(best - px)) <= spacing


# -- sphere sampling -----------------------------------------------------------


@pytest.mark.parametrize("p", [1, 2, 5, 50])
def test_sphere_samples_have_unit_norm(p):
    U = sample_unit_sphere(np.random.default_rng(p), p, 1000)
    np.testing.assert_allclose(np.linalg.norm(U, axis=1), 1.0, atol=1e-12)


def test_sphere_p1_is_plus_minus_one():
    U = sample_unit_sphere(np.random.default_rng(0), 1, 20_000).ravel()
    assert set(np.unique(U)) == {-1.0, 1.0}
    assert abs(np.mean(U == 1.0) - 0.5) < 0.02


def test_sphere_mean_near_zero():
    U = sample_unit_sphere(np.random.default_rng(3), 4, 100_000)
    assert np.linalg.norm(U.mean(axis=0)) < 0.02


def test_sphere_second_moment_is_identity_over_p():
    p = 4
    U = sample_unit_sphere(np.random.default_rng(4), p, 1_000_000)
    M = U.T @ U / U.shape[0]
    assert np.max(np.abs(M - np.eye(p) / p)) < 0.02


def test_sphere_single_sample_shape():
    assert sample_unit_sphere(np.random.default_rng(0), 3).shape == (3,)


def test_ball_samples_inside_unit_ball():
    V = sample_unit_ball(np.random.default_rng(0), 3, 10_000)
    assert np.all(np.linalg.norm(V, axis=1) <= 1.0)
    # E||v||^2 = p / (p + 2) for the uniform ball
    assert np.mean(np.sum(V**2, axis=1)) == pytest.approx(3 / 5, abs=0.01)


@pytest.mark.parametrize("fset", [Box(2.0, 3), Ball(2.0, 3)])
def test_set_samples_respect_shrink(fset):
    X = fset.sample(np.random.default_rng(0), shrink=0.5, size=2000)
    assert np.all(fset.contains(X, 0.5))


def test_extreme_samples_lie_on_the_boundary():
    rng = np.random.default_rng(11)
    box, ball = Box(2.0, 3), Ball(1.5, 4)
    V = box.sample_extreme(rng, 500)
    assert V.shape == (500, 3)
    np.testing.assert_array_equal(np.abs(V), 2.0)
    assert len({tuple(v) for v in V}) == 8
    S = ball.sample_extreme(rng, 500)
    np.testing.assert_allclose(np.linalg.norm(S, axis=1), 1.5, rtol=1e-12)
    assert box.sample_extreme(rng).shape == (3,)
