"""Stored energy density, eigenstrain, gradient, and the displacement solve."""

import numpy as np
import pytest

from epitaxy_lab.elasticity import (
    DisplacementBC,
    ElasticModel,
    ElasticityError,
    SolverError,
    bulk_energy,
    bulk_gradient,
    isotropic_tensor,
    solve_displacement,
    strain_norm_sq,
    voigt_matrix,
)
from epitaxy_lab.grids import StripGrid


@pytest.fixture
def grid():
    return StripGrid(0.0, 1.0, -0.5, 1.5, 24, 48)


def film_indicator(grid, height=1.0):
    return np.where(grid.Y <= height + 1e-12, 1.0, 0.0)


# ---------------------------------------------------------------------------
# tensor and model


def test_identity_density_worked_value():
    model = ElasticModel.isotropic(1.0, 1.0)
    assert model.density(np.eye(2)) == pytest.approx(4.0, abs=1e-14)


def test_isotropic_tensor_symmetries():
    c = isotropic_tensor(1.3, 0.7)
    assert np.allclose(c, np.einsum("jikl->ijkl", c))
    assert np.allclose(c, np.einsum("ijlk->ijkl", c))
    assert np.allclose(c, np.einsum("klij->ijkl", c))


def test_voigt_eigenvalues_isotropic():
    model = ElasticModel.isotropic(1.0, 1.0)
    assert np.allclose(np.sort(model.voigt_eigs), [2.0, 2.0, 4.0])
    assert model.growth_constant == pytest.approx(4.0)
    v = voigt_matrix(model.c)
    assert np.allclose(v, v.T)


def test_model_validation():
    with pytest.raises(ElasticityError, match="shape"):
        ElasticModel(np.eye(4))
    bad = isotropic_tensor(1.0, 1.0)
    bad = bad.copy()
    bad[0, 1, 0, 0] += 0.3  # break minor symmetry
    with pytest.raises(ElasticityError, match="minor"):
        ElasticModel(bad)
    with pytest.raises(ElasticityError, match="positive definite"):
        ElasticModel.isotropic(1.0, 0.0)


def test_eigenstrain_field(grid):
    model = ElasticModel.isotropic(1.0, 1.0, t=0.1)
    e0 = model.eigenstrain_field(grid)
    sub = grid.Y < 0.0
    assert np.all(e0[sub] == 0.0)
    assert np.all(e0[~sub, 0, 0] == 0.1)
    assert np.all(e0[..., 1, 1] == 0.0)
    assert np.all(e0[..., 0, 1] == 0.0)


def test_bc_validation():
    with pytest.raises(ElasticityError):
        DisplacementBC(lateral="sideways")


# ---------------------------------------------------------------------------
# energy and gradient


def test_relaxed_state_zero_energy(grid):
    model = ElasticModel.isotropic(1.0, 1.0, t=0.0)
    assert bulk_energy(model, grid, film_indicator(grid), np.zeros(grid.shape + (2,))) == 0.0


def test_gradient_matches_directional_fd(grid):
    # energy is quadratic in v, so central differences are exact to roundoff
    rng = np.random.default_rng(3)
    model = ElasticModel.isotropic(1.0, 1.2, t=0.1)
    w = 0.5 + 0.5 * rng.random(grid.shape)
    v = 0.01 * rng.standard_normal(grid.shape + (2,))
    g = bulk_gradient(model, grid, w, v, eta=1e-3)
    h = 1e-6
    for _ in range(20):
        i = rng.integers(grid.shape[0])
        j = rng.integers(grid.shape[1])
        k = rng.integers(2)
        vp = v.copy()
        vp[i, j, k] += h
        vm = v.copy()
        vm[i, j, k] -= h
        fd = (bulk_energy(model, grid, w, vp, 1e-3)
              - bulk_energy(model, grid, w, vm, 1e-3)) / (2 * h)
        assert abs(fd - g[i, j, k]) <= 1e-5 * max(1.0, abs(g[i, j, k]))


def test_rigid_motions_leave_energy_unchanged(grid):
    # translations and the infinitesimal rotation (-y, x) have E(v) = 0
    model = ElasticModel.isotropic(1.0, 1.0, t=0.1)
    bc = DisplacementBC(lateral="free", clamp_bottom=False)
    w = film_indicator(grid)
    base = bulk_energy(model, grid, w, np.zeros(grid.shape + (2,)), 1e-6, bc)
    shift = np.zeros(grid.shape + (2,))
    shift[..., 0] = 0.7
    shift[..., 1] = -0.3
    rot = np.stack([-grid.Y, grid.X], axis=-1)
    for v in (shift, rot, shift + 2.0 * rot):
        assert abs(bulk_energy(model, grid, w, v, 1e-6, bc) - base) <= 1e-10
        assert strain_norm_sq(grid, v, bc) <= 1e-20


# ---------------------------------------------------------------------------
# solver


def test_solve_flat_film_matches_analytic(grid):
    # periodic flat film: optimal e_yy = lam t / (lam + 2 mu), W = (4/3) t^2
    model = ElasticModel.isotropic(1.0, 1.0, t=0.1)
    w = film_indicator(grid)
    res = solve_displacement(model, grid, w, eta=1e-6, tol=1e-10)
    assert res.converged and res.residual <= 1e-10
    want = (4.0 / 3.0) * 0.1**2  # film area is 1
    assert res.energy == pytest.approx(want, rel=0.05)
    # interior vertical strain approaches t/3
    e_yy = (res.v[:, 25, 1] - res.v[:, 24, 1]) / grid.hy
    assert np.allclose(e_yy, 0.1 / 3.0, atol=5e-3)


def test_solution_is_a_minimum(grid):
    rng = np.random.default_rng(11)
    model = ElasticModel.isotropic(1.0, 1.0, t=0.1)
    w = film_indicator(grid)
    res = solve_displacement(model, grid, w, eta=1e-6, tol=1e-10)
    for _ in range(10):
        pert = 1e-3 * rng.standard_normal(grid.shape + (2,))
        pert[:, 0] = 0.0  # keep the clamp
        assert bulk_energy(model, grid, w, res.v + pert, 1e-6) >= res.energy - 1e-14


def test_solver_error_carries_diagnostics(grid):
    model = ElasticModel.isotropic(1.0, 1.0, t=0.1)
    with pytest.raises(SolverError) as exc:
        solve_displacement(model, grid, film_indicator(grid), eta=1e-6, maxiter=2)
    assert exc.value.iterations == 2
    assert exc.value.residual > 0.0


def test_eta_required_when_phase_vanishes(grid):
    model = ElasticModel.isotropic(1.0, 1.0, t=0.1)
    with pytest.raises(ElasticityError, match="eta"):
        solve_displacement(model, grid, film_indicator(grid), eta=0.0)


def test_strain_norm_weighted(grid):
    v = np.zeros(grid.shape + (2,))
    v[..., 1] = np.maximum(grid.Y, 0.0)  # e_yy = 1 on the upper half
    full = strain_norm_sq(grid, v)
    assert full == pytest.approx(1.0 * 1.5, rel=0.05)  # |E|^2 = 1 over area 1.5
    half = strain_norm_sq(grid, v, weight=np.full(grid.shape, 0.5))
    assert half == pytest.approx(0.5 * full)
