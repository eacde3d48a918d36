"""Experiment harness: spec validation, verdict helpers, reports, emission."""

import os
from types import SimpleNamespace

import numpy as np
import pytest

from epitaxy_lab.elasticity import ElasticModel
from epitaxy_lab.envelopes import SurfaceDensity
from epitaxy_lab.geometry import BVProfile
from epitaxy_lab.grids import StripGrid
from epitaxy_lab.harness import (
    ConvergenceReport,
    ExperimentSpec,
    HarnessError,
    emit,
    gap_trend_ok,
    loglog_slope,
    report_csv_text,
    run_compactness_monitor,
    run_liminf_probe,
    run_limsup,
)
from epitaxy_lab.phase_field import DoubleWell, PhaseFieldEnergy


def limsup_spec(name="unit-limsup"):
    return ExperimentSpec(
        name=name,
        profile=BVProfile.flat(1.0),
        psi=SurfaceDensity.constant(1.0),
        well=DoubleWell.quartic(),
        model=ElasticModel.isotropic(1.0, 1.0, t=0.0),
        grid=StripGrid(0.0, 1.0, -0.25, 2.0, 64, 144),
        adatom_mass=0.0,
        schedule=(0.16, 0.08),
    )


def liminf_spec(name="unit-liminf"):
    return ExperimentSpec(
        name=name,
        profile=BVProfile.flat(1.0),
        psi=SurfaceDensity.constant(1.0),
        well=DoubleWell.quartic(),
        model=ElasticModel.isotropic(1.0, 1.0, t=0.0),
        grid=StripGrid(0.0, 1.0, -0.25, 1.75, 40, 80),
        adatom_mass=0.1,
        schedule=(0.16,),
        seeds=(0, 1, 2),
        minimize_outer=6,
    )


# ---------------------------------------------------------------------------
# spec validation and helpers


def test_spec_enforces_resolution_policy():
    with pytest.raises(HarnessError, match="cell"):
        ExperimentSpec(
            name="coarse",
            profile=BVProfile.flat(1.0),
            psi=SurfaceDensity.constant(1.0),
            well=DoubleWell.quartic(),
            model=ElasticModel.isotropic(1.0, 1.0),
            grid=StripGrid(0.0, 1.0, -0.25, 1.75, 10, 20),
            schedule=(0.16, 0.08),
        )


def test_spec_schedule_and_mass_validation():
    good = limsup_spec()
    with pytest.raises(HarnessError, match="nonempty"):
        ExperimentSpec(name="x", profile=good.profile, psi=good.psi,
                       well=good.well, model=good.model, grid=good.grid,
                       schedule=())
    with pytest.raises(HarnessError, match="decreasing"):
        ExperimentSpec(name="x", profile=good.profile, psi=good.psi,
                       well=good.well, model=good.model, grid=good.grid,
                       schedule=(0.08, 0.16))
    with pytest.raises(HarnessError, match="nonnegative"):
        ExperimentSpec(name="x", profile=good.profile, psi=good.psi,
                       well=good.well, model=good.model, grid=good.grid,
                       schedule=(0.16, 0.08), adatom_mass=-0.1)


def test_spec_film_mass_default_and_override():
    spec = limsup_spec()
    assert spec.target_film_mass == pytest.approx(1.0)
    spec2 = ExperimentSpec(
        name="override", profile=spec.profile, psi=spec.psi, well=spec.well,
        model=spec.model, grid=spec.grid, film_mass=0.7, schedule=(0.16, 0.08))
    assert spec2.target_film_mass == 0.7


def test_surface_measure_spreads_adatom_mass():
    spec = ExperimentSpec(
        name="mu", profile=BVProfile.flat(1.0), psi=SurfaceDensity.constant(1.0),
        well=DoubleWell.quartic(), model=ElasticModel.isotropic(1.0, 1.0),
        grid=StripGrid(0.0, 1.0, -0.25, 2.0, 64, 144),
        adatom_mass=0.5, schedule=(0.16, 0.08))
    mu = spec.surface_measure()
    assert mu.total_mass == pytest.approx(0.5, abs=1e-12)
    assert mu.max_density() == pytest.approx(0.5)  # unit graph length


# ---------------------------------------------------------------------------
# verdict helpers


def test_gap_trend_ok():
    assert gap_trend_ok([0.4, 0.2, 0.1])
    assert gap_trend_ok([0.4, 0.2, 0.21])  # one small inversion
    assert not gap_trend_ok([0.4, 0.2, 0.3])  # inversion beyond 10%
    assert not gap_trend_ok([0.4, 0.41, 0.4, 0.41])  # two inversions


def test_loglog_slope_recovers_power():
    eps = np.array([0.16, 0.08, 0.04, 0.02])
    assert loglog_slope(eps, 3.0 * eps**1.5) == pytest.approx(1.5, abs=1e-12)
    assert np.isnan(loglog_slope(eps, np.zeros(4)))


def test_report_passed():
    rep = ConvergenceReport("r", ("a",), [], {"x": True, "y": True})
    assert rep.passed
    rep.verdicts["y"] = False
    assert not rep.passed


def test_csv_formatting():
    rep = ConvergenceReport("r", ("a", "b", "c"),
                            [{"a": True, "b": 3, "c": 0.125}], {})
    assert report_csv_text(rep) == "a,b,c\n1,3,0.125\n"


# ---------------------------------------------------------------------------
# experiments at unit scale


@pytest.fixture(scope="module")
def limsup_report():
    return run_limsup(limsup_spec())


def test_run_limsup_structure(limsup_report):
    rep = limsup_report
    assert [r["epsilon"] for r in rep.rows] == [0.16, 0.08]
    assert rep.verdicts["mass_w"] and rep.verdicts["mass_mu"]
    assert rep.verdicts["trend"] and rep.verdicts["slope"]
    gaps = [r["gap"] for r in rep.rows]
    assert gaps[1] < gaps[0]
    assert rep.aux["kind"] == "limsup"


def test_monitor_on_recovery_bundle(limsup_report):
    spec = limsup_spec()
    rep = run_compactness_monitor(spec, limsup_report.aux["bundle"])
    assert rep.name == "unit-limsup-monitor"
    assert rep.verdicts["bounded_energy"]
    assert rep.verdicts["bounded_strain"]  # identically zero without mismatch
    assert all(r["strain_sq"] == 0.0 for r in rep.rows)


def test_run_liminf_probe_deterministic():
    a = run_liminf_probe(liminf_spec())
    b = run_liminf_probe(liminf_spec())
    assert report_csv_text(a) == report_csv_text(b)
    assert a.verdicts["mass_w"] and a.verdicts["mass_mu"]
    assert a.rows[0]["seed_spread"] >= 0.0


def test_run_liminf_needs_three_seeds():
    spec = liminf_spec()
    bad = ExperimentSpec(
        name="few", profile=spec.profile, psi=spec.psi, well=spec.well,
        model=spec.model, grid=spec.grid, adatom_mass=spec.adatom_mass,
        schedule=spec.schedule, seeds=(0,), minimize_outer=2)
    with pytest.raises(HarnessError, match="seeds"):
        run_liminf_probe(bad)


# ---------------------------------------------------------------------------
# monitor on synthetic sources


def fake_result(grid, height, energy):
    w = np.where(grid.Y <= height + 1e-12, 1.0, 0.0)
    v = np.zeros(grid.shape + (2,))
    return SimpleNamespace(w=w, v=v, energy=PhaseFieldEnergy(0.0, energy))


def test_monitor_threshold_mass_and_bounds():
    spec = limsup_spec()
    grid = spec.grid
    good = [(0.16, fake_result(grid, 1.0, 2.0)),
            (0.08, fake_result(grid, 1.0, 1.9))]
    rep = run_compactness_monitor(spec, good)
    assert rep.passed
    assert rep.rows[-1]["threshold_mass"] == pytest.approx(1.0, rel=0.02)
    blowup = [(0.16, fake_result(grid, 1.0, 1.0)),
              (0.08, fake_result(grid, 1.0, 2.0))]
    rep2 = run_compactness_monitor(spec, blowup)
    assert not rep2.verdicts["bounded_energy"]
    with pytest.raises(HarnessError, match="empty"):
        run_compactness_monitor(spec, [])


# ---------------------------------------------------------------------------
# emission


def test_emit_writes_deterministic_csv(tmp_path, limsup_report):
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    p1 = emit(limsup_report, str(d1))
    p2 = emit(limsup_report, str(d2))
    assert all(os.path.exists(p) for p in p1 + p2)
    csv1 = next(p for p in p1 if p.endswith(".csv"))
    csv2 = next(p for p in p2 if p.endswith(".csv"))
    with open(csv1, "rb") as fh:
        b1 = fh.read()
    with open(csv2, "rb") as fh:
        b2 = fh.read()
    assert b1 == b2
    assert b1.decode() == report_csv_text(limsup_report)
    svgs = [p for p in p1 if p.endswith(".svg")]
    assert svgs and all(os.path.getsize(p) > 0 for p in svgs)
