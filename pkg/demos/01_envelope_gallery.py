"""Envelope gallery: relaxed surface densities for four example psi.

For each density the table reports the convexification psi_cvx, the convex
sub-additive envelope psi_tilde (equal to psi_cvx up to the tangency point
s0, linear with the recession slope theta beyond), and the cut envelope
psi_cut(s) = 2 psi_tilde(s/2) that prices adatoms on both sides of a slit.
"""

import argparse
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from epitaxy_lab import SurfaceDensity, build_envelope_table


def gallery():
    return [
        ("constant 1", SurfaceDensity.constant(1.0)),
        ("affine 2+3s", SurfaceDensity.affine(2.0, 3.0)),
        ("quadratic 1+s^2", SurfaceDensity.quadratic(1.0, 0.0, 1.0)),
        ("quartic well 1+(s^2-1)^2",
         SurfaceDensity.from_callable(lambda s: 1.0 + (s * s - 1.0) ** 2,
                                      16.0, n=8193)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out/envelopes")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    for ax, (label, psi) in zip(axes.ravel(), gallery()):
        table = build_envelope_table(psi)
        s0 = "inf" if table.s0 is None else f"{table.s0:.4f}"
        print(f"{label:28s} s0 = {s0:>8s}  theta = {table.theta:.6f}")
        s = np.linspace(0.0, 4.0, 400)
        ax.plot(s, psi(s), label="psi", lw=1)
        ax.plot(s, table.cvx_at(s), label="psi_cvx", ls="--", lw=1)
        ax.plot(s, table.tilde_at(s), label="psi_tilde", lw=2)
        ax.plot(s, table.cut_at(s), label="psi_cut", ls=":", lw=2)
        if table.s0 is not None and table.s0 <= s[-1]:
            ax.axvline(table.s0, color="gray", lw=0.5)
        ax.set_title(label, fontsize=9)
        ax.set_ylim(0, min(12.0, 1.1 * float(np.max(psi(s)))))
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(args.out, "envelope_gallery.svg")
    fig.savefig(path)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
