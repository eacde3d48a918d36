"""Linearized elasticity: stored energy density, eigenstrain, bulk energy.

W(A) = (1/2) A : C : A with a positive-definite fourth-order tensor C (minor
symmetries, so W sees only the symmetric part of A). The mismatch eigenstrain
is E0(y) = t e1⊗e1 for y >= 0 and 0 below. The bulk term weights W(E(v) - E0)
by (w + eta) on the upper half-strip and by 1 in the substrate (the substrate
is always occupied by film material).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import StripGrid, diff_matrices, node_weights, sym_gradient


class ElasticityError(ValueError):
    pass


class SolverError(ElasticityError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def isotropic_tensor(lam: float, mu: float) -> np.ndarray:
    """C_ijkl = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)."""
    d = np.eye(2)
    c = lam * np.einsum("ij,kl->ijkl", d, d)
    c += mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
    return c


def voigt_matrix(c: np.ndarray) -> np.ndarray:
    """3x3 Voigt matrix of the quadratic form on symmetric 2x2 matrices.

    Basis: e1⊗e1, e2⊗e2, (e1⊗e2 + e2⊗e1)/sqrt(2); W(A) = (1/2) a^T V a.
    """
    b = [
        np.array([[1.0, 0.0], [0.0, 0.0]]),
        np.array([[0.0, 0.0], [0.0, 1.0]]),
        np.array([[0.0, 1.0], [1.0, 0.0]]) / np.sqrt(2.0),
    ]
    v = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            v[i, j] = np.einsum("ij,ijkl,kl->", b[i], c, b[j])
    return v


@dataclass(frozen=True)
class DisplacementBC:
    """Bottom row clamped (v = 0 at y = y_min); lateral periodic or free."""

    lateral: str = "periodic"
    clamp_bottom: bool = True

    def __post_init__(self):
        if self.lateral not in ("periodic", "free"):
            raise ElasticityError("lateral BC must be 'periodic' or 'free'")


@dataclass(frozen=True)
class ElasticModel:
    """Elastic tensor, mismatch strength t, and diagnostics.

    Positive definiteness on symmetric matrices is certified by the
    eigenvalues of the 3x3 Voigt matrix; the largest one is the growth
    constant reported in diagnostics.
    """

    c: np.ndarray
    t: float = 0.0
    voigt_eigs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (2, 2, 2, 2):
            raise ElasticityError("elastic tensor must have shape (2,2,2,2)")
        if not np.allclose(c, np.einsum("jikl->ijkl", c)) or not np.allclose(
            c, np.einsum("ijlk->ijkl", c)
        ):
            raise ElasticityError("elastic tensor must have minor symmetries")
        if not np.allclose(c, np.einsum("klij->ijkl", c)):
            raise ElasticityError("elastic tensor must have major symmetry")
        eigs = np.linalg.eigvalsh(voigt_matrix(c))
        if eigs.min() <= 0.0:
            raise ElasticityError("quadratic form is not positive definite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "voigt_eigs", eigs)

    @classmethod
    def isotropic(cls, lam: float, mu: float, t: float = 0.0) -> "ElasticModel":
        return cls(isotropic_tensor(lam, mu), float(t))

    @property
    def growth_constant(self) -> float:
        return float(self.voigt_eigs.max())

    def density(self, a: np.ndarray) -> np.ndarray:
        """W(A) = (1/2) A : C : A for fields of 2x2 matrices (..., 2, 2)."""
        return 0.5 * np.einsum("...ij,ijkl,...kl->...", a, self.c, a)

    def stress(self, a: np.ndarray) -> np.ndarray:
        """C : A (used by the solver and the analytic gradient)."""
        return np.einsum("ijkl,...kl->...ij", self.c, a)

    def eigenstrain(self, y) -> np.ndarray:
        """E0(y) = t e1⊗e1 for y >= 0, zero in the substrate."""
        y = np.asarray(y, dtype=float)
        e0 = np.zeros(y.shape + (2, 2))
        e0[..., 0, 0] = np.where(y >= 0.0, self.t, 0.0)
        return e0

    def eigenstrain_field(self, grid: StripGrid) -> np.ndarray:
        return self.eigenstrain(grid.Y)


def _region_weight(grid: StripGrid, w: np.ndarray, eta: float) -> np.ndarray:
    """(w + eta) on y >= 0, 1 in the substrate."""
    return np.where(grid.Y >= 0.0, w + eta, 1.0)


def bulk_energy(
    model: ElasticModel,
    grid: StripGrid,
    w: np.ndarray,
    v: np.ndarray,
    eta: float = 0.0,
    bc: DisplacementBC = DisplacementBC(),
) -> float:
    """int (w + eta) W(E(v) - E0) over Q+ plus the substrate contribution."""
    if np.any(w < -1e-12):
        raise ElasticityError("phase weight must be nonnegative")
    if model.t == 0.0 and not np.any(v):
        return 0.0
    e = sym_gradient(grid, v, periodic_x=(bc.lateral == "periodic"))
    dens = model.density(e - model.eigenstrain_field(grid))
    rho = _region_weight(grid, np.asarray(w, dtype=float), eta)
    return float(np.sum(node_weights(grid) * rho * dens))


def strain_norm_sq(grid: StripGrid, v: np.ndarray, bc: DisplacementBC = DisplacementBC(),
                   weight: np.ndarray | None = None) -> float:
    """int_{Q+} |E(v)|^2 (compactness monitor trace), optionally weighted."""
    e = sym_gradient(grid, v, periodic_x=(bc.lateral == "periodic"))
    dens = np.einsum("...ij,...ij->...", e, e)
    if weight is not None:
        dens = dens * weight
    return float(np.sum(node_weights(grid, "upper") * dens))


# ---------------------------------------------------------------------------
# energy gradient and solver


def _clamp_mask(grid: StripGrid, bc: DisplacementBC) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    if bc.clamp_bottom:
        mask[:, 0] = True
    return mask


def bulk_gradient(
    model: ElasticModel,
    grid: StripGrid,
    w: np.ndarray,
    v: np.ndarray,
    eta: float = 0.0,
    bc: DisplacementBC = DisplacementBC(),
) -> np.ndarray:
    """Analytic gradient of bulk_energy with respect to the nodal values of v."""
    periodic = bc.lateral == "periodic"
    dx, dy = diff_matrices(grid, periodic)
    e = sym_gradient(grid, v, periodic_x=periodic)
    r = model.stress(e - model.eigenstrain_field(grid))
    rho = _region_weight(grid, np.asarray(w, dtype=float), eta)
    q = (node_weights(grid) * rho)[..., None, None] * r
    gx = (dx.T @ q[..., 0, 0].ravel() + dy.T @ q[..., 0, 1].ravel()).reshape(grid.shape)
    gy = (dx.T @ q[..., 0, 1].ravel() + dy.T @ q[..., 1, 1].ravel()).reshape(grid.shape)
    return np.stack([gx, gy], axis=-1)


@dataclass
class SolveResult:
    v: np.ndarray
    energy: float
    residual: float
    iterations: int
    converged: bool


def solve_displacement(
    model: ElasticModel,
    grid: StripGrid,
    w: np.ndarray,
    eta: float,
    bc: DisplacementBC = DisplacementBC(),
    tol: float = 1e-8,
    maxiter: int = 20000,
    v0: np.ndarray | None = None,
) -> SolveResult:
    """Minimize the bulk energy over v with the bottom row clamped.

    Preconditioned (Jacobi) conjugate gradients on the SPD system K v = b,
    where K v = bulk_gradient linear part; stops at relative residual <= tol.
    """
    if eta <= 0.0 and float(np.min(np.asarray(w)[grid.Y >= 0.0])) <= 0.0:
        raise ElasticityError("eta must be positive when the phase vanishes somewhere")
    clamp = _clamp_mask(grid, bc)
    free = ~clamp

    zero = np.zeros(grid.shape + (2,))
    g0 = bulk_gradient(model, grid, w, zero, eta, bc)

    def kv(vfield: np.ndarray) -> np.ndarray:
        g = bulk_gradient(model, grid, w, vfield, eta, bc) - g0
        g[clamp] = vfield[clamp]  # identity on clamped rows
        return g

    b = -g0
    b[clamp] = 0.0

    # Jacobi diagonal of the dominant D^T rho D parts
    periodic = bc.lateral == "periodic"
    dx, dy = diff_matrices(grid, periodic)
    rho = (_region_weight(grid, np.asarray(w, dtype=float), eta) * node_weights(grid)).ravel()
    dx2 = np.asarray(dx.multiply(dx).T @ rho).reshape(grid.shape)
    dy2 = np.asarray(dy.multiply(dy).T @ rho).reshape(grid.shape)
    c = model.c
    diag_x = c[0, 0, 0, 0] * dx2 + c[0, 1, 0, 1] * dy2
    diag_y = c[1, 1, 1, 1] * dy2 + c[0, 1, 0, 1] * dx2
    diag = np.stack([diag_x, diag_y], axis=-1)
    diag[clamp] = 1.0
    diag[diag <= 0] = 1.0

    v = np.array(v0, dtype=float) if v0 is not None else np.zeros(grid.shape + (2,))
    v[clamp] = 0.0
    r = b - kv(v)
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        bnorm = 1.0
    residual = float(np.linalg.norm(r)) / bnorm
    it = 0
    while residual > tol and it < maxiter:
        ap = kv(p)
        alpha = rz / float(np.sum(p * ap))
        v += alpha * p
        r -= alpha * ap
        residual = float(np.linalg.norm(r)) / bnorm
        z = r / diag
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    converged = residual <= tol
    if not converged:
        raise SolverError(
            f"CG did not reach relative residual {tol:g} "
            f"(reached {residual:.3e} in {it} iterations)",
            residual,
            it,
        )
    energy = bulk_energy(model, grid, w, v, eta, bc)
    return SolveResult(v, energy, residual, it, converged)
