"""Grid construction, difference operators, and quadrature."""

import numpy as np
import pytest

from epitaxy_lab.grids import (
    GridError,
    StripGrid,
    diff_matrices,
    gradient,
    integrate,
    integrate_upper,
    node_weights,
    sym_gradient,
)


@pytest.fixture
def grid():
    return StripGrid(0.0, 2.0, -0.5, 1.5, 16, 20)


def test_geometry_accessors(grid):
    assert grid.shape == (17, 21)
    assert grid.hx == pytest.approx(0.125)
    assert grid.hy == pytest.approx(0.1)
    assert grid.x[0] == grid.a and grid.x[-1] == grid.b
    assert grid.X.shape == grid.shape and grid.Y.shape == grid.shape
    assert np.all(np.diff(grid.y) > 0)


def test_rejects_degenerate_extents():
    with pytest.raises(GridError):
        StripGrid(0.0, 0.0, -1.0, 1.0, 16, 16)
    with pytest.raises(GridError):
        StripGrid(0.0, 1.0, 1.0, -1.0, 16, 16)
    with pytest.raises(GridError):
        StripGrid(0.0, 1.0, -1.0, 1.0, 4, 16)


def test_gradient_exact_on_affine(grid):
    f = 3.0 * grid.X - 2.0 * grid.Y + 1.0
    g = gradient(grid, f)
    assert np.allclose(g[..., 0], 3.0, atol=1e-12)
    assert np.allclose(g[..., 1], -2.0, atol=1e-12)


def test_gradient_shape_check(grid):
    with pytest.raises(GridError):
        gradient(grid, np.zeros((3, 3)))


def test_periodic_wrap_matches_interior():
    grid = StripGrid(0.0, 1.0, 0.0, 1.0, 32, 8)
    f = np.sin(2 * np.pi * grid.X)
    g = gradient(grid, f, periodic_x=True)
    # last column wraps to node 1 (same physical point as node 0)
    expected = (f[1, :] - f[-1, :]) / grid.hx
    assert np.allclose(g[-1, :, 0], expected, atol=1e-12)


def test_diff_matrices_annihilate_constants(grid):
    dx, dy = diff_matrices(grid, periodic_x=True)
    ones = np.ones(grid.shape).ravel()
    assert np.abs(dx @ ones).max() < 1e-13
    assert np.abs(dy @ ones).max() < 1e-13


def test_no_checkerboard_null_mode(grid):
    # central differences annihilate (-1)^i; forward differences must not
    dx, _ = diff_matrices(grid, periodic_x=False)
    f = ((-1.0) ** np.arange(grid.nx + 1))[:, None] * np.ones(grid.shape)
    assert np.abs(dx @ f.ravel()).max() > 1.0 / grid.hx


def test_sym_gradient_symmetric_and_exact(grid):
    v = np.empty(grid.shape + (2,))
    v[..., 0] = 0.5 * grid.X + 0.25 * grid.Y
    v[..., 1] = -0.75 * grid.X + 1.5 * grid.Y
    e = sym_gradient(grid, v)
    assert np.allclose(e[..., 0, 1], e[..., 1, 0], atol=1e-14)
    assert np.allclose(e[..., 0, 0], 0.5, atol=1e-12)
    assert np.allclose(e[..., 1, 1], 1.5, atol=1e-12)
    assert np.allclose(e[..., 0, 1], 0.5 * (0.25 - 0.75), atol=1e-12)


def test_integrate_exact_for_bilinear(grid):
    f = (1.0 + 2.0 * grid.X) * (3.0 - grid.Y)
    exact_x = 2.0 + 2.0 ** 2  # int_0^2 (1 + 2x) dx
    exact_y = 3.0 * 2.0 - 0.5 * (1.5 ** 2 - 0.5 ** 2)
    assert integrate(grid, f) == pytest.approx(exact_x * exact_y, rel=1e-13)


def test_region_masks_split_the_strip(grid):
    ones = np.ones(grid.shape)
    full = integrate(grid, ones)
    up = integrate_upper(grid, ones)
    low = integrate(grid, ones, "lower")
    assert up + low == pytest.approx(full, rel=1e-13)
    assert up == pytest.approx(2.0 * 1.5, rel=1e-13)


def test_rect_region_is_cell_resolved(grid):
    ones = np.ones(grid.shape)
    # rectangle snapped to cell boundaries integrates exactly
    val = integrate(grid, ones, (0.25, 0.0, 1.0, 0.5))
    assert val == pytest.approx(0.75 * 0.5, rel=1e-13)


def test_node_weights_cached_instances(grid):
    w1 = node_weights(grid, "upper")
    w2 = node_weights(grid, "upper")
    assert w1 is w2
