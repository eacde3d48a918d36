"""Convergence experiments: limsup gap tables, liminf probes via constrained
minimization, compactness monitoring, and deterministic CSV/SVG reporting.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .elasticity import DisplacementBC, ElasticModel, strain_norm_sq  # noqa: E402
from .envelopes import SurfaceDensity, build_envelope_table  # noqa: E402
from .geometry import AdatomMeasure, BVProfile, decompose, delta_cover, rect_masses  # noqa: E402
from .grids import StripGrid, node_weights  # noqa: E402
from .phase_field import (  # noqa: E402
    DoubleWell,
    MeasureSample,
    diffuse_measure,
    extract_profile,
    minimize_eps,
    project_volume,
    sample_rect_masses,
    weak_star_distance,
)
from .recovery import RecoveryBundle, recovery_sequence  # noqa: E402
from .sharp_energy import sharp_total, subgraph_indicator  # noqa: E402


class HarnessError(ValueError):
    pass


DEFAULT_SCHEDULE = (0.16, 0.08, 0.04, 0.02)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one experiment needs; grid cells must satisfy cell <= eps/4."""

    name: str
    profile: BVProfile
    psi: SurfaceDensity
    well: DoubleWell
    model: ElasticModel
    grid: StripGrid
    adatom_mass: float = 0.0
    film_mass: float | None = None
    schedule: tuple = DEFAULT_SCHEDULE
    seeds: tuple = (0, 1, 2)
    bc: DisplacementBC = DisplacementBC()
    table_s_max: float = 16.0
    minimize_outer: int = 25

    def __post_init__(self):
        sched = tuple(float(e) for e in self.schedule)
        if not sched:
            raise HarnessError("schedule must be nonempty")
        if any(e2 >= e1 for e1, e2 in zip(sched, sched[1:])):
            raise HarnessError("schedule must be strictly decreasing")
        cell = max(self.grid.hx, self.grid.hy)
        if cell > min(sched) / 4 + 1e-12:
            raise HarnessError(
                f"grid cell {cell:.4g} violates the policy cell <= eps/4 "
                f"for eps = {min(sched):g}"
            )
        if self.adatom_mass < 0:
            raise HarnessError("adatom mass must be nonnegative")
        object.__setattr__(self, "schedule", sched)

    @property
    def target_film_mass(self) -> float:
        return self.profile.mass if self.film_mass is None else self.film_mass

    def surface_measure(self) -> AdatomMeasure:
        """Grid-constant measure: the adatom mass spread uniformly on Gamma."""
        decomp = decompose(self.profile)
        length = decomp.total_length
        u = self.adatom_mass / length if length > 0 else 0.0
        return AdatomMeasure.from_decomposition(decomp, u)


@dataclass
class ConvergenceReport:
    name: str
    columns: tuple
    rows: list
    verdicts: dict
    warnings: list = field(default_factory=list)
    aux: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def gap_trend_ok(gaps, rel_slack: float = 0.10) -> bool:
    """Non-increasing gaps, allowing one inversion of at most rel_slack."""
    gaps = np.asarray(gaps, dtype=float)
    inversions = 0
    for g0, g1 in zip(gaps, gaps[1:]):
        if g1 > g0:
            if g1 - g0 > rel_slack * max(abs(g0), 1e-30):
                return False
            inversions += 1
    return inversions <= 1


def loglog_slope(eps, values) -> float:
    """Least-squares slope of log(values) against log(eps)."""
    eps = np.asarray(eps, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    keep = values > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[keep]), np.log(values[keep]), 1)[0])


LIMSUP_COLUMNS = ("epsilon", "alpha", "mass_w", "mass_mu", "bulk", "surface",
                  "sharp_total", "gap")


def run_limsup(spec: ExperimentSpec) -> ConvergenceReport:
    """Recovery-sequence experiment; PASS needs a small final gap and a sane trend."""
    table = build_envelope_table(spec.psi, s_max=spec.table_s_max)
    measure = spec.surface_measure()
    bundle = recovery_sequence(spec.profile, measure, spec.schedule, spec.well,
                               spec.psi, table, spec.model, spec.grid, bc=spec.bc)
    rows = [dict(r) for r in bundle.rows]
    sharp = bundle.sharp.total
    gaps = bundle.gaps()
    warnings = []
    verdicts = {
        "final_gap": bool(abs(gaps[-1]) <= 0.05 * abs(sharp)),
        "mass_w": bool(all(abs(r["mass_w"] - spec.target_film_mass) <= 1e-9
                           for r in rows)),
        "mass_mu": bool(all(abs(r["mass_mu"] - spec.adatom_mass) <= 1e-8
                            for r in rows)),
    }
    if len(gaps) >= 2:
        verdicts["trend"] = gap_trend_ok(gaps)
        verdicts["slope"] = bool(loglog_slope([r["epsilon"] for r in rows], gaps) > 0)
    else:
        warnings.append("schedule of length 1: trend assertion skipped")
    aux = {"bundle": bundle, "kind": "limsup"}
    return ConvergenceReport(spec.name, LIMSUP_COLUMNS, rows, verdicts, warnings, aux)


LIMINF_COLUMNS = ("epsilon", "energy", "sharp_extracted", "gap", "l1_phase",
                  "weak_star", "mass_w", "mass_mu", "seed_spread")


def _seeded_start(spec: ExperimentSpec, eps: float, seed: int):
    """Deterministic perturbed initial data for one minimization run."""
    grid = spec.grid
    rng = np.random.default_rng(seed)
    h0 = spec.target_film_mass / (grid.b - grid.a)
    modes = rng.normal(size=3) * 0.05
    phases = rng.uniform(0, 2 * np.pi, size=3)
    bump = sum(m * np.cos(2 * np.pi * (k + 1) * (grid.X - grid.a) / (grid.b - grid.a) + p)
               for k, (m, p) in enumerate(zip(modes, phases)))
    w0 = 1.0 / (1.0 + np.exp((grid.Y - h0 - bump) / max(eps, 1e-6)))
    w0[grid.Y < 0.0] = 1.0
    w0 = project_volume(grid, w0, spec.target_film_mass)
    u0 = 1.0 + rng.random(grid.shape)
    return w0, u0


def extract_measure(spec: ExperimentSpec, w: np.ndarray, u: np.ndarray,
                    eps: float, profile: BVProfile) -> AdatomMeasure:
    """Integrate the diffuse adatom measure over a cover and re-spread it."""
    grid = spec.grid
    mu = diffuse_measure(spec.well, grid, w, eps,
                         periodic_x=(spec.bc.lateral == "periodic"))
    sample = mu.weighted_sample(u)
    if sample.total_mass <= 0:
        return AdatomMeasure.from_decomposition(decompose(profile), 0.0)
    ell = max(1.0, profile.lipschitz)
    delta = max(4.0 * eps * (1.0 + ell), 4.05 * max(grid.hx, grid.hy))
    pad = 6.0 * eps + 2.0 * max(grid.hx, grid.hy)
    cover = delta_cover(profile, delta, pad_y=pad, min_cell=max(grid.hx, grid.hy))
    masses = sample_rect_masses(sample, cover)
    decomp = decompose(profile)
    _m, lengths = rect_masses(AdatomMeasure.from_decomposition(decomp, 1.0), cover)
    lost = sample.total_mass - masses.sum()
    dens = []
    for seg in decomp.segments:
        mid = (0.5 * (seg.x0 + seg.x1), 0.5 * (seg.y0 + seg.y1))
        j = next((k for k, r in enumerate(cover.rects)
                  if r.contains(mid[0], mid[1])), None)
        if j is None or lengths[j] <= 0:
            dens.append(0.0)
        else:
            dens.append(masses[j] / lengths[j])
    measure = AdatomMeasure.from_decomposition(decomp, dens)
    if lost > 1e-6 * max(sample.total_mass, 1.0) and measure.segment_mass > 0:
        scale = sample.total_mass / measure.segment_mass
        measure = AdatomMeasure.from_decomposition(
            decomp, [d * scale for d in dens])
    return measure


def run_liminf_probe(spec: ExperimentSpec) -> ConvergenceReport:
    """Minimize at each eps from several seeds and test against the extracted limit."""
    if len(spec.seeds) < 3:
        raise HarnessError("liminf probe needs at least 3 seeds")
    grid = spec.grid
    table = build_envelope_table(spec.psi, s_max=spec.table_s_max)
    target = spec.profile
    chi_target = subgraph_indicator(target, grid)
    wts_up = node_weights(grid, "upper")
    rows = []
    results = []
    warnings = []
    for eps in spec.schedule:
        best = None
        energies = []
        for seed in spec.seeds:
            w0, u0 = _seeded_start(spec, eps, seed)
            res = minimize_eps(spec.model, spec.well, spec.psi, grid, eps,
                               spec.adatom_mass, spec.target_film_mass,
                               w0=w0, u0=u0, bc=spec.bc, outer=spec.minimize_outer)
            energies.append(res.energy.total)
            if best is None or res.energy.total < best.energy.total:
                best = res
            if not res.converged:
                warnings.append(f"eps={eps:g} seed={seed}: outer budget exhausted")
        prof = extract_profile(grid, best.w)
        meas = extract_measure(spec, best.w, best.u, eps, prof)
        sharp = sharp_total(spec.model, grid, prof, meas, table, v=best.v, bc=spec.bc)
        chi = subgraph_indicator(prof, grid)
        l1 = float(np.sum(wts_up * np.abs(chi - chi_target)))
        wsd = weak_star_distance(
            diffuse_measure(spec.well, grid, best.w, eps,
                            spec.bc.lateral == "periodic").weighted_sample(best.u),
            MeasureSample.from_adatom_measure(meas),
            box=(grid.a, 0.0, grid.b, grid.y_max))
        rows.append({
            "epsilon": eps,
            "energy": best.energy.total,
            "sharp_extracted": sharp.total,
            "gap": best.energy.total - sharp.total,
            "l1_phase": l1,
            "weak_star": wsd,
            "mass_w": best.volume,
            "mass_mu": best.mass,
            "seed_spread": max(energies) - min(energies),
        })
        results.append((eps, best))
    last = rows[-1]
    cell_area = grid.hx * (grid.b - grid.a)
    l1s = [r["l1_phase"] for r in rows]
    verdicts = {
        "liminf": bool(last["energy"] >= last["sharp_extracted"]
                       - 0.05 * abs(last["sharp_extracted"])),
        "l1_decreasing": bool(all(b <= a + cell_area for a, b in zip(l1s, l1s[1:]))),
        "mass_w": bool(all(abs(r["mass_w"] - spec.target_film_mass) <= 1e-9
                           for r in rows)),
        "mass_mu": bool(all(abs(r["mass_mu"] - spec.adatom_mass) <= 1e-8
                            for r in rows)),
    }
    aux = {"results": results, "kind": "liminf"}
    return ConvergenceReport(spec.name, LIMINF_COLUMNS, rows, verdicts, warnings, aux)


MONITOR_COLUMNS = ("epsilon", "energy", "strain_sq", "threshold_mass")


def run_compactness_monitor(spec: ExperimentSpec, source) -> ConvergenceReport:
    """Uniform-bound traces along a recovery bundle or minimization results.

    Bounds are measured against the first (largest) eps: every later trace
    value must stay within 1.1x of it. The thresholded phase mass must land
    within 2% of the film mass at the smallest eps.

    For a recovery bundle the strain trace is that of the translated
    displacement (the sequence converging to the sharp v in H1); the masked
    product adds a mask-gradient ring whose raw strain grows like 1/tube by
    construction and is eta-weighted inside the energy, so it is not the
    quantity the uniform bound speaks about. Minimization iterates carry no
    mask, so their own displacement is traced.
    """
    grid = spec.grid
    if isinstance(source, RecoveryBundle):
        seq = [(cfg.eps, cfg.w, row["strain_sq"], row["bulk"] + row["surface"])
               for cfg, row in zip(source.configs, source.rows)]
    else:
        seq = [(eps, res.w, strain_norm_sq(grid, res.v, spec.bc),
                res.energy.total) for eps, res in source]
    if not seq:
        raise HarnessError("empty sequence source")
    rows = []
    for eps, w, strain_sq, energy in seq:
        thr = (w >= 0.5) & (grid.Y >= 0.0)
        rows.append({
            "epsilon": eps,
            "energy": energy,
            "strain_sq": strain_sq,
            "threshold_mass": float(np.sum(node_weights(grid, "upper") * thr)),
        })
    e0 = rows[0]["energy"]
    s0 = rows[0]["strain_sq"]
    target = spec.target_film_mass
    verdicts = {
        "bounded_energy": bool(all(r["energy"] <= 1.1 * abs(e0) + 1e-12 for r in rows)),
        "bounded_strain": bool(all(r["strain_sq"] <= 1.1 * abs(s0) + 1e-12 for r in rows)),
        "threshold_mass": bool(abs(rows[-1]["threshold_mass"] - target)
                               <= 0.02 * max(target, 1e-30)),
    }
    return ConvergenceReport(spec.name + "-monitor", MONITOR_COLUMNS, rows, verdicts)


# ---------------------------------------------------------------------------
# reporting


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def report_csv_text(report: ConvergenceReport) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_fmt(row[c]) for c in report.columns))
    return "\n".join(lines) + "\n"


def emit(report: ConvergenceReport, out_dir: str, formats=("csv", "svg")) -> list:
    """Write the report deterministically; returns the created paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if "csv" in formats:
        path = os.path.join(out_dir, f"{report.name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(report_csv_text(report))
        paths.append(path)
    if "svg" in formats:
        paths.extend(_emit_svg(report, out_dir))
    return paths


def _savefig(fig, path: str, salt: str) -> None:
    with plt.rc_context({"svg.hashsalt": salt}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _emit_svg(report: ConvergenceReport, out_dir: str) -> list:
    paths = []
    rows = report.rows
    if rows and "gap" in report.columns:
        eps = np.asarray([r["epsilon"] for r in rows])
        gaps = np.abs(np.asarray([r["gap"] for r in rows]))
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        ax.loglog(eps, np.maximum(gaps, 1e-300), "o-")
        slope = loglog_slope(eps, gaps)
        ax.set_xlabel("eps")
        ax.set_ylabel("|energy gap|")
        ax.set_title(f"{report.name}: slope {slope:.2f}")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{report.name}_gap.svg")
        _savefig(fig, path, report.name)
        paths.append(path)
    fields = None
    if report.aux.get("kind") == "limsup":
        cfg = report.aux["bundle"].configs[-1]
        fields = [("w", cfg.w), ("u", cfg.u)]
    elif report.aux.get("kind") == "liminf":
        _eps, res = report.aux["results"][-1]
        fields = [("w", res.w), ("u", res.u)]
    if fields:
        fig, axes = plt.subplots(1, len(fields), figsize=(4.5 * len(fields), 3.4))
        axes = np.atleast_1d(axes)
        for ax, (label, f) in zip(axes, fields):
            im = ax.imshow(np.asarray(f).T, origin="lower", aspect="auto")
            ax.set_title(label)
            fig.colorbar(im, ax=ax)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{report.name}_fields.svg")
        _savefig(fig, path, report.name)
        paths.append(path)
    return paths
