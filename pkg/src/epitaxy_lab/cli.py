"""Command line front end.

Every subcommand reads one JSON config (see config module for the schema)
and writes CSV/SVG artifacts under --out. The process exits 0 exactly when
all verdicts of the requested experiment pass.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import load_config, psi_from_config, spec_from_config
from .envelopes import build_envelope_table
from .harness import (
    ConvergenceReport,
    emit,
    run_compactness_monitor,
    run_limsup,
    run_liminf_probe,
    _seeded_start,
)
from .phase_field import minimize_eps
from .recovery import recovery_sequence
from .sharp_energy import sharp_total


def _print_verdicts(report: ConvergenceReport) -> None:
    for key, ok in report.verdicts.items():
        print(f"{report.name}: {key}: {'PASS' if ok else 'FAIL'}")
    for w in report.warnings:
        print(f"{report.name}: warning: {w}")


def _cmd_run_limsup(cfg: dict, out: str) -> int:
    report = run_limsup(spec_from_config(cfg))
    emit(report, out)
    _print_verdicts(report)
    return 0 if report.passed else 1


def _cmd_run_liminf(cfg: dict, out: str) -> int:
    report = run_liminf_probe(spec_from_config(cfg))
    emit(report, out)
    _print_verdicts(report)
    return 0 if report.passed else 1


def _cmd_monitor(cfg: dict, out: str) -> int:
    spec = spec_from_config(cfg)
    limsup = run_limsup(spec)
    report = run_compactness_monitor(spec, limsup.aux["bundle"])
    emit(limsup, out)
    emit(report, out)
    _print_verdicts(report)
    return 0 if report.passed else 1


def _cmd_envelope_table(cfg: dict, out: str) -> int:
    psi = psi_from_config(cfg.get("psi", {"kind": "constant", "value": 1.0}))
    table = build_envelope_table(psi, s_max=float(cfg.get("s_max", 16.0)))
    name = cfg.get("name", "envelope")
    rows = [{"s": s, "psi": p, "psi_cvx": c, "psi_tilde": t, "psi_cut": q}
            for s, p, c, t, q in zip(table.s, table.psi, table.psi_cvx,
                                     table.psi_tilde, table.psi_cut)]
    report = ConvergenceReport(name, ("s", "psi", "psi_cvx", "psi_tilde", "psi_cut"),
                               rows, {"table": True})
    emit(report, out, formats=("csv",))
    s0 = "inf" if table.s0 is None else f"{table.s0:.12g}"
    print(f"{name}: s0 = {s0}, theta = {table.theta:.12g}")
    return 0


def _cmd_sharp_eval(cfg: dict, out: str) -> int:
    spec = spec_from_config(cfg)
    table = build_envelope_table(spec.psi, s_max=spec.table_s_max)
    measure = spec.surface_measure()
    energy = sharp_total(spec.model, spec.grid, spec.profile, measure, table,
                         bc=spec.bc)
    row = {"bulk": energy.bulk, "regular": energy.regular, "jump": energy.jump,
           "cut": energy.cut, "atom": energy.atom, "total": energy.total}
    report = ConvergenceReport(spec.name, tuple(row), [row], {"evaluated": True})
    emit(report, out, formats=("csv",))
    print(f"{spec.name}: sharp total = {energy.total:.12g}")
    return 0


def _cmd_minimize(cfg: dict, out: str) -> int:
    spec = spec_from_config(cfg)
    eps = float(cfg.get("eps", min(spec.schedule)))
    w0, u0 = _seeded_start(spec, eps, spec.seeds[0])
    res = minimize_eps(spec.model, spec.well, spec.psi, spec.grid, eps,
                       spec.adatom_mass, spec.target_film_mass,
                       w0=w0, u0=u0, bc=spec.bc, outer=spec.minimize_outer)
    rows = [{"iter": k, "energy": e, "volume_defect": dv, "mass_defect": dm}
            for k, (e, dv, dm) in enumerate(zip(res.energies, res.volume_trace,
                                                res.mass_trace))]
    diffs = np.diff(res.energies)
    verdicts = {
        "monotone": bool(np.all(diffs <= 1e-10 * np.maximum(1.0, np.abs(res.energies[:-1])))),
        "volume": bool(res.volume_trace.max() <= 1e-9),
        "mass": bool(res.mass_trace.max() <= 1e-8),
    }
    report = ConvergenceReport(spec.name, ("iter", "energy", "volume_defect",
                                           "mass_defect"), rows, verdicts)
    report.aux = {"kind": "liminf", "results": [(eps, res)]}
    emit(report, out)
    _print_verdicts(report)
    return 0 if report.passed else 1


def _cmd_recover(cfg: dict, out: str) -> int:
    spec = spec_from_config(cfg)
    table = build_envelope_table(spec.psi, s_max=spec.table_s_max)
    measure = spec.surface_measure()
    bundle = recovery_sequence(spec.profile, measure, spec.schedule, spec.well,
                               spec.psi, table, spec.model, spec.grid, bc=spec.bc)
    rows = [dict(r) for r in bundle.rows]
    verdicts = {
        "mass_w": bool(all(abs(r["mass_w"] - spec.target_film_mass) <= 1e-9
                           for r in rows)),
        "mass_mu": bool(all(abs(r["mass_mu"] - spec.adatom_mass) <= 1e-8
                            for r in rows)),
    }
    report = ConvergenceReport(spec.name, ("epsilon", "alpha", "mass_w", "mass_mu",
                                           "bulk", "surface", "sharp_total", "gap"),
                               rows, verdicts)
    report.aux = {"kind": "limsup", "bundle": bundle}
    emit(report, out)
    _print_verdicts(report)
    return 0 if report.passed else 1


_COMMANDS = {
    "run-limsup": _cmd_run_limsup,
    "run-liminf": _cmd_run_liminf,
    "monitor": _cmd_monitor,
    "envelope-table": _cmd_envelope_table,
    "sharp-eval": _cmd_sharp_eval,
    "minimize": _cmd_minimize,
    "recover": _cmd_recover,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="epitaxy-lab",
        description="Phase-field laboratory for film profiles with adatoms.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    return _COMMANDS[args.command](cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
