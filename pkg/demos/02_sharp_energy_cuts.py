"""Sharp energy of profiles with jumps and cuts.

A vertical cut of depth d with no adatoms costs psi_cut(0) * d = 2 d when
psi is the constant 1: both sides of the slit are billed. With a nonlinear
density the relaxed envelope decides how much adatom mass the cut absorbs;
beyond the tangency point everything is priced at the recession slope.
"""

import argparse

import numpy as np

from epitaxy_lab import (
    AdatomMeasure,
    BVProfile,
    SurfaceDensity,
    build_envelope_table,
    decompose,
    sharp_surface_energy,
    unrelaxed_surface_energy,
)


def cut_profile(depth):
    return BVProfile.from_breakpoints([0.0, 1.0], [1.0, 1.0],
                                      cuts=((0.5, 1.0 - depth, 1.0),))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--density", type=float, default=0.5,
                    help="uniform adatom density u on the graph")
    args = ap.parse_args()

    psi = SurfaceDensity.quadratic(1.0, 0.0, 1.0)
    table = build_envelope_table(psi)
    print(f"psi = 1 + s^2: s0 = {table.s0:.4f}, theta = {table.theta:.4f}")

    print("\ncut depth sweep at u =", args.density)
    print(f"{'depth':>8s} {'regular':>10s} {'cut':>10s} {'total':>10s}")
    for depth in (0.0, 0.2, 0.4, 0.6, 0.8):
        prof = cut_profile(depth) if depth > 0 else BVProfile.flat(1.0)
        mu = AdatomMeasure.from_decomposition(decompose(prof), args.density)
        e = sharp_surface_energy(mu, table)
        print(f"{depth:8.2f} {e.regular:10.5f} {e.cut:10.5f} {e.surface:10.5f}")

    # doubling is exact for constant psi
    one = build_envelope_table(SurfaceDensity.constant(1.0), s_max=8.0)
    d = 0.375
    mu = AdatomMeasure.from_decomposition(decompose(cut_profile(d)), 0.0)
    e = sharp_surface_energy(mu, one)
    print(f"\nconstant psi, depth {d}: cut term = {e.cut} (exactly 2 d = {2 * d})")

    # the unrelaxed functional refuses jumps, cuts and atoms
    step = BVProfile.from_breakpoints([0.0, 0.5, 0.5, 1.0],
                                      [1.0, 1.0, 1.5, 1.5],
                                      jumps=((0.5, 1.0, 1.5),))
    mu_step = AdatomMeasure.from_decomposition(decompose(step), args.density)
    raw = unrelaxed_surface_energy(mu_step, psi)
    rel = sharp_surface_energy(mu_step, table)
    print(f"\nstep profile: unrelaxed = {raw.describe()}, relaxed = {rel.describe()}")

    # atoms are priced at theta per unit mass
    atom = AdatomMeasure.from_decomposition(
        decompose(BVProfile.flat(1.0)), 0.0, atoms=(((0.5, 1.3), 0.25),))
    e = sharp_surface_energy(atom, table)
    print(f"one atom of mass 0.25: atom term = {e.atom:.5f} "
          f"(theta * m = {table.theta * 0.25:.5f})")


if __name__ == "__main__":
    main()
