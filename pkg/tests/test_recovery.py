"""Recovery constructions: transition profiles, mass-exact fields, covers."""

import numpy as np
import pytest

from epitaxy_lab.elasticity import ElasticModel
from epitaxy_lab.envelopes import SurfaceDensity, build_envelope_table
from epitaxy_lab.geometry import AdatomMeasure, BVProfile, decompose, delta_cover
from epitaxy_lab.grids import StripGrid
from epitaxy_lab.phase_field import DoubleWell, film_volume
from epitaxy_lab.recovery import (
    RecoveryError,
    build_u,
    build_v,
    build_w,
    mollify_profile,
    ode_residual,
    optimal_profile,
    recovery_sequence,
    translate_field,
)


WELL = DoubleWell.quartic()


# ---------------------------------------------------------------------------
# transition profile


def test_optimal_profile_solves_the_ode():
    for eps in (0.16, 0.08, 0.04):
        opt = optimal_profile(eps, WELL)
        assert opt.lift == pytest.approx(np.sqrt(eps))
        assert ode_residual(opt, WELL) <= 1e-6
        assert np.all(np.diff(opt.gamma) <= 0)
        assert opt.max_slope <= opt.deriv_bound * (1 + 1e-9)
        assert opt.T_eps == pytest.approx(eps * opt.S_eps)


def test_profile_endpoints_and_clamping():
    opt = optimal_profile(0.08, WELL)
    assert opt(0.0) == pytest.approx(1.0)
    assert opt(1.0) == pytest.approx(0.0, abs=1e-12)
    assert opt(-0.5) == 1.0 and opt(2.0) == 0.0
    assert opt.at_distance(0.0) == pytest.approx(1.0)
    assert opt.at_distance(2.0 * opt.T_eps) == 0.0


def test_optimal_profile_validation():
    with pytest.raises(RecoveryError):
        optimal_profile(0.0, WELL)
    with pytest.raises(RecoveryError):
        optimal_profile(1.5, WELL)
    with pytest.raises(RecoveryError):
        optimal_profile(0.1, WELL, lift=0.0)


# ---------------------------------------------------------------------------
# mollification


def test_mollify_flat_reproduces():
    prof = BVProfile.flat(1.0, a=0.0, b=1.0)
    g = mollify_profile(prof, 0.1)
    assert np.allclose(g.ys, 1.0, atol=1e-12)
    assert g.mass == pytest.approx(prof.mass, abs=1e-9)


def test_mollify_preserves_mass_and_smooths():
    prof = BVProfile.from_breakpoints([0.0, 0.45, 0.55, 1.0],
                                      [1.0, 1.0, 1.4, 1.4])
    g = mollify_profile(prof, 0.08)
    assert g.mass == pytest.approx(prof.mass, abs=1e-9)
    assert np.isfinite(g.lipschitz)
    assert g.lipschitz <= prof.lipschitz * (1 + 1e-9)


def test_mollify_carries_cuts():
    prof = BVProfile.from_breakpoints([0.0, 1.0], [1.0, 1.0],
                                      cuts=((0.5, 0.4, 1.0),))
    g = mollify_profile(prof, 0.05)
    assert g.cuts == prof.cuts


def test_mollify_width_limit():
    with pytest.raises(RecoveryError, match="too large"):
        mollify_profile(BVProfile.flat(1.0), 0.3)


# ---------------------------------------------------------------------------
# phase field with exact mass


@pytest.fixture(scope="module")
def grid():
    return StripGrid(0.0, 1.0, -0.25, 2.0, 64, 144)


def test_build_w_exact_mass(grid):
    prof = BVProfile.flat(1.0)
    bw = build_w(prof, grid, 0.08, WELL)
    assert abs(film_volume(grid, bw.w) - prof.mass) <= 1e-9
    assert 0.0 < bw.alpha <= 1.0
    assert bw.w.min() >= 0.0 and bw.w.max() <= 1.0
    assert np.all(bw.w[grid.Y < 0.0] == 1.0)
    assert bw.opt.lift == pytest.approx(0.08**2)  # default lift is eps^2


def test_build_w_mass_capacity(grid):
    with pytest.raises(RecoveryError, match="capacity"):
        build_w(BVProfile.flat(1.0), grid, 0.08, WELL, mass=10.0)


def test_translate_field_linear_exact(grid):
    f = grid.Y.copy()
    shifted = translate_field(f, grid, 0.25)
    inner = grid.Y - 0.25 > grid.y_min  # away from the clamped bottom edge
    assert np.allclose(shifted[inner], (grid.Y - 0.25)[inner], atol=1e-12)


def test_build_v_zero_displacement(grid):
    z = np.zeros(grid.shape + (2,))
    out = build_v(z, grid, 0.08, 0.0, np.ones(grid.shape))
    assert out.shift == 0.0
    assert not np.any(out.v) and not np.any(out.translated)


def test_build_v_shift_and_masking(grid):
    prof = BVProfile.flat(1.0)
    bw = build_w(prof, grid, 0.08, WELL)
    v = np.zeros(grid.shape + (2,))
    v[..., 1] = 1.0 + grid.Y
    out = build_v(v, grid, 0.08, 0.5, bw.w, transition=bw.alpha * bw.tube_width)
    want = 1.1 * bw.alpha * bw.tube_width * np.sqrt(2.0)  # ell clamps to 1
    assert out.shift == pytest.approx(want)
    dead = translate_field(bw.w, grid, out.shift) == 0.0
    assert np.all(out.v[dead] == 0.0)
    assert np.any(out.translated[dead] != 0.0)  # bare translation is unmasked


def test_build_v_validation(grid):
    v = np.zeros((3, 3, 2))
    with pytest.raises(RecoveryError, match="shape"):
        build_v(v, grid, 0.08, 0.0, np.ones(grid.shape))
    good = np.ones(grid.shape + (2,))
    with pytest.raises(RecoveryError, match="nonnegative"):
        build_v(good, grid, 0.08, -1.0, np.ones(grid.shape))
    with pytest.raises(RecoveryError, match="exceeds the grid"):
        build_v(good, grid, 0.08, 0.0, np.ones(grid.shape), transition=5.0)


# ---------------------------------------------------------------------------
# adatom density on a cover


def test_build_u_reproduces_rect_masses(grid):
    prof = BVProfile.flat(1.0)
    mu = AdatomMeasure.from_decomposition(decompose(prof), 0.5)
    eps = 0.08
    bw = build_w(prof, grid, eps, WELL)
    cover = delta_cover(prof, 0.6, pad_y=0.3, min_cell=max(grid.hx, grid.hy),
                        protect=(0.05, 0.2))
    bu = build_u(mu, bw.w, grid, WELL, eps, cover)
    assert abs(bu.diffuse_mass - mu.total_mass) <= 1e-8
    assert bu.masses.sum() == pytest.approx(mu.total_mass, abs=1e-12)
    assert np.all(bu.u >= 0.0)


def test_build_u_cover_must_hold_the_mass(grid):
    mu = AdatomMeasure.from_decomposition(decompose(BVProfile.flat(1.0)), 0.5)
    bw = build_w(BVProfile.flat(1.0), grid, 0.08, WELL)
    wrong = delta_cover(BVProfile.flat(0.4), 0.3, pad_y=0.05)
    with pytest.raises(RecoveryError, match="misses part of the sharp mass"):
        build_u(mu, bw.w, grid, WELL, 0.08, wrong)


def test_build_u_needs_transition_density(grid):
    # the cover sits on a graph where the phase field is constant 1
    prof = BVProfile.flat(1.0)
    mu = AdatomMeasure.from_decomposition(decompose(prof), 0.5)
    far = build_w(BVProfile.flat(1.8), grid, 0.04, WELL)
    cover = delta_cover(prof, 0.4, pad_y=0.05)
    with pytest.raises(RecoveryError, match="larger delta or a smaller eps"):
        build_u(mu, far.w, grid, WELL, 0.04, cover)


# ---------------------------------------------------------------------------
# full sequence


def test_recovery_sequence_smoke(grid):
    psi = SurfaceDensity.quadratic(1.0, 0.0, 1.0)
    table = build_envelope_table(psi, s_max=16.0)
    model = ElasticModel.isotropic(1.0, 1.0, t=0.0)
    prof = BVProfile.flat(1.0)
    mu = AdatomMeasure.from_decomposition(decompose(prof), 0.5)
    bundle = recovery_sequence(prof, mu, (0.16, 0.08), WELL, psi, table,
                               model, grid)
    assert len(bundle.configs) == 2
    for row in bundle.rows:
        assert abs(row["mass_w"] - prof.mass) <= 1e-9
        assert abs(row["mass_mu"] - mu.total_mass) <= 1e-8
        assert row["strain_sq"] == 0.0  # no mismatch, zero displacement
    gaps = bundle.gaps()
    assert gaps[1] < gaps[0]  # tighter at smaller eps
    assert bundle.sharp.bulk == 0.0
    assert bundle.sharp.total == pytest.approx(table.tilde_at(0.5) * 1.0, abs=1e-9)


def test_recovery_sequence_schedule_validation(grid):
    psi = SurfaceDensity.constant(1.0)
    table = build_envelope_table(psi, s_max=4.0)
    model = ElasticModel.isotropic(1.0, 1.0, t=0.0)
    prof = BVProfile.flat(1.0)
    mu = AdatomMeasure.from_decomposition(decompose(prof), 0.0)
    with pytest.raises(RecoveryError, match="empty"):
        recovery_sequence(prof, mu, (), WELL, psi, table, model, grid)
    with pytest.raises(RecoveryError, match="decreasing"):
        recovery_sequence(prof, mu, (0.08, 0.08), WELL, psi, table, model, grid)
