"""Diffuse-interface energy: double wells, diffuse surface measures,
weak-star comparison of measures, and constrained alternating minimization.

The regularized energy at thickness eps couples the elastic bulk term,
weighted by (w + eta) on the upper half-strip, with a transition term

    (1/sigma) int_{y>0} [eps |grad w|^2 + P(w)/eps] psi(u) dx,

where sigma = 2 int_0^1 sqrt(P) normalizes a unit transition. The diffuse
adatom measure is mu = (1/sigma)[eps |grad w|^2 + P(w)/eps] L^2 on {y>0};
the adatom field u is constrained by int u dmu = m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .elasticity import DisplacementBC, ElasticModel, bulk_energy, solve_displacement
from .envelopes import SurfaceDensity
from .geometry import AdatomMeasure, AdmissibleCover, BVProfile
from .grids import StripGrid, diff_matrices, gradient, integrate, node_weights, sym_gradient


class PhaseFieldError(ValueError):
    pass


# ---------------------------------------------------------------------------
# double wells


@dataclass(frozen=True)
class DoubleWell:
    """Potential with wells of depth zero exactly at 0 and 1.

    Quartic kind evaluates c t^2 (1-t)^2 in closed form; sampled wells
    interpolate a table on [0, 1] and clamp outside.
    """

    kind: str
    c: float = 1.0
    samples_t: np.ndarray | None = None
    samples_p: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("quartic", "sampled"):
            raise PhaseFieldError(f"unknown well kind {self.kind!r}")
        if self.kind == "quartic":
            if self.c <= 0:
                raise PhaseFieldError("quartic well needs c > 0")
            return
        t = np.asarray(self.samples_t, dtype=float)
        p = np.asarray(self.samples_p, dtype=float)
        if t.ndim != 1 or t.shape != p.shape or t.size < 8:
            raise PhaseFieldError("sampled well needs matching 1d tables")
        if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise PhaseFieldError("well samples must increase from 0 to 1")
        if abs(p[0]) > 1e-12 or abs(p[-1]) > 1e-12:
            raise PhaseFieldError("well must vanish at 0 and 1")
        if np.any(p[1:-1] <= 0.0):
            raise PhaseFieldError("well must be positive strictly between 0 and 1")
        object.__setattr__(self, "samples_t", t)
        object.__setattr__(self, "samples_p", np.maximum(p, 0.0))

    @classmethod
    def quartic(cls, c: float = 1.0) -> "DoubleWell":
        return cls("quartic", float(c))

    @classmethod
    def from_samples(cls, t, p) -> "DoubleWell":
        return cls("sampled", 1.0, np.asarray(t, float), np.asarray(p, float))

    @classmethod
    def from_callable(cls, f, n: int = 2049) -> "DoubleWell":
        t = np.linspace(0.0, 1.0, n)
        return cls.from_samples(t, [float(f(v)) for v in t])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "quartic":
            out = self.c * t * t * (1.0 - t) ** 2
        else:
            out = np.interp(np.clip(t, 0.0, 1.0), self.samples_t, self.samples_p)
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "quartic":
            out = 2.0 * self.c * t * (1.0 - t) * (1.0 - 2.0 * t)
        else:
            tc = np.clip(t, 0.0, 1.0)
            dp = np.gradient(self.samples_p, self.samples_t)
            out = np.interp(tc, self.samples_t, dp)
            out = np.where((t < 0.0) | (t > 1.0), 0.0, out)
        return out if out.ndim else float(out)

    def sigma(self) -> float:
        """2 int_0^1 sqrt(P); equals sqrt(c)/3 for the quartic well."""
        cached = self.__dict__.get("_sigma")
        if cached is None:
            val, err = quad(lambda s: np.sqrt(max(float(self(s)), 0.0)), 0.0, 1.0,
                            epsabs=1e-10, limit=200)
            if err > 1e-8:
                raise PhaseFieldError(f"transition constant quadrature error {err:.2e}")
            cached = 2.0 * val
            object.__setattr__(self, "_sigma", cached)
        return cached


def default_eta(eps: float) -> float:
    """Residual bulk stiffness of the empty phase; o(eps) is required."""
    return eps * eps


# ---------------------------------------------------------------------------
# diffuse surface measure


def modica_density(well: DoubleWell, grid: StripGrid, w: np.ndarray, eps: float,
                   periodic_x: bool = True) -> np.ndarray:
    """eps |grad w|^2 + P(w)/eps, nodewise."""
    if eps <= 0:
        raise PhaseFieldError("eps must be positive")
    g = gradient(grid, w, periodic_x=periodic_x)
    return eps * (g[..., 0] ** 2 + g[..., 1] ** 2) + well(w) / eps


@dataclass(frozen=True)
class DiffuseMeasure:
    """(1/sigma) [eps |grad w|^2 + P(w)/eps] L^2 restricted to {y > 0}."""

    grid: StripGrid
    density: np.ndarray
    eps: float

    def _weights(self) -> np.ndarray:
        return node_weights(self.grid, "upper") * self.density

    @property
    def total_mass(self) -> float:
        return float(np.sum(self._weights()))

    def integrate(self, f: np.ndarray) -> float:
        """int f dmu for a nodewise field f."""
        return float(np.sum(self._weights() * f))

    def to_sample(self) -> "MeasureSample":
        wts = self._weights().ravel()
        keep = wts > 0.0
        pts = np.column_stack([self.grid.X.ravel()[keep], self.grid.Y.ravel()[keep]])
        return MeasureSample(pts, wts[keep])

    def weighted_sample(self, u: np.ndarray) -> "MeasureSample":
        """Sample of the adatom measure u mu."""
        wts = (self._weights() * u).ravel()
        keep = wts > 0.0
        pts = np.column_stack([self.grid.X.ravel()[keep], self.grid.Y.ravel()[keep]])
        return MeasureSample(pts, wts[keep])


def diffuse_measure(well: DoubleWell, grid: StripGrid, w: np.ndarray, eps: float,
                    periodic_x: bool = True) -> DiffuseMeasure:
    dens = modica_density(well, grid, w, eps, periodic_x) / well.sigma()
    return DiffuseMeasure(grid, dens, eps)


# ---------------------------------------------------------------------------
# energy


@dataclass(frozen=True)
class PhaseFieldEnergy:
    bulk: float
    surface: float

    @property
    def total(self) -> float:
        return self.bulk + self.surface


def surface_energy_eps(well: DoubleWell, psi: SurfaceDensity, grid: StripGrid,
                       w: np.ndarray, u: np.ndarray, eps: float,
                       periodic_x: bool = True) -> float:
    dens = modica_density(well, grid, w, eps, periodic_x)
    vals = dens * np.asarray(psi(u))
    return float(np.sum(node_weights(grid, "upper") * vals)) / well.sigma()


def energy_eps(model: ElasticModel, well: DoubleWell, psi: SurfaceDensity,
               grid: StripGrid, v: np.ndarray, w: np.ndarray, u: np.ndarray,
               eps: float, eta: float | None = None,
               bc: DisplacementBC = DisplacementBC()) -> PhaseFieldEnergy:
    """Full regularized energy at thickness eps."""
    if eta is None:
        eta = default_eta(eps)
    b = bulk_energy(model, grid, w, v, eta, bc)
    s = surface_energy_eps(well, psi, grid, w, u, eps, periodic_x=(bc.lateral == "periodic"))
    return PhaseFieldEnergy(b, s)


def film_volume(grid: StripGrid, w: np.ndarray) -> float:
    return integrate(grid, w, "upper")


def extract_profile(grid: StripGrid, w: np.ndarray, level: float = 0.5) -> BVProfile:
    """Column heights of the superlevel set {w >= level} in {y > 0}.

    Nodal values are interpolated linearly inside each cell, so the height is
    the exact column measure of {w_lin >= level} and varies smoothly with w.
    Counting whole cells instead would quantize heights to hy steps and a
    tilted interface would extract as a staircase whose polyline length
    overestimates the graph measure at first order in the slope.
    """
    w = np.asarray(w, dtype=float)
    w0, w1 = w[:, :-1], w[:, 1:]
    hi = np.maximum(w0, w1)
    span = np.abs(w1 - w0)
    frac = np.where(span > 0.0,
                    np.clip((hi - level) / np.where(span > 0.0, span, 1.0), 0.0, 1.0),
                    (w0 >= level).astype(float))
    ylo, yhi = grid.y[:-1], grid.y[1:]
    overlap = np.clip((yhi - np.maximum(ylo, 0.0)) / grid.hy, 0.0, 1.0)
    heights = grid.hy * np.sum(frac * overlap[None, :], axis=1)
    return BVProfile.from_breakpoints(grid.x, heights)


# ---------------------------------------------------------------------------
# weak-star comparison against a fixed cone dictionary


@dataclass(frozen=True)
class MeasureSample:
    """Finite atomic surrogate of a measure: points (n, 2) and weights (n,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        wts = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != wts.shape[0] or pts.shape[1] != 2:
            raise PhaseFieldError("points (n,2) and weights (n,) must match")
        if np.any(wts < 0):
            raise PhaseFieldError("sample weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def from_adatom_measure(cls, measure: AdatomMeasure, spacing: float = 1e-3) -> "MeasureSample":
        """Midpoint sampling of each segment at roughly the given spacing."""
        pts, wts = [], []
        for seg in measure.segments:
            ell = seg.length
            if ell == 0.0 or seg.u == 0.0:
                continue
            n = max(2, int(np.ceil(ell / spacing)))
            t = (np.arange(n) + 0.5) / n
            pts.append(np.column_stack([seg.x0 + t * (seg.x1 - seg.x0),
                                        seg.y0 + t * (seg.y1 - seg.y0)]))
            wts.append(np.full(n, seg.u * ell / n))
        for (x, y), m in measure.atoms:
            pts.append(np.array([[x, y]]))
            wts.append(np.array([m]))
        if not pts:
            return cls(np.zeros((0, 2)), np.zeros(0))
        return cls(np.vstack(pts), np.concatenate(wts))


def sample_rect_masses(sample: MeasureSample, cover: AdmissibleCover) -> np.ndarray:
    """Mass of the sample in each cover rectangle (first containing rect wins)."""
    masses = np.zeros(len(cover.rects))
    taken = np.zeros(sample.points.shape[0], dtype=bool)
    x, y = sample.points[:, 0], sample.points[:, 1]
    for j, r in enumerate(cover.rects):
        inside = (~taken) & (x >= r.x0) & (x <= r.x1) & (y >= r.y0) & (y <= r.y1)
        masses[j] = sample.weights[inside].sum()
        taken |= inside
    return masses


def _cone_lattice(box: tuple[float, float, float, float], s: float, factor: int) -> np.ndarray:
    x0, y0, x1, y1 = box
    step = s / factor
    xs = np.arange(x0, x1 + step / 2, step)
    ys = np.arange(y0, y1 + step / 2, step)
    cx, cy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([cx.ravel(), cy.ravel()])


def _cone_integrals(sample: MeasureSample, centers: np.ndarray, s: float) -> np.ndarray:
    """int max(0, s - |x - c|_inf) dmu for every center c, chunked."""
    out = np.empty(centers.shape[0])
    pts, wts = sample.points, sample.weights
    if pts.shape[0] == 0:
        out[:] = 0.0
        return out
    for lo in range(0, centers.shape[0], 128):
        c = centers[lo:lo + 128]
        dx = np.abs(pts[None, :, 0] - c[:, 0, None])
        dy = np.abs(pts[None, :, 1] - c[:, 1, None])
        f = np.maximum(0.0, s - np.maximum(dx, dy))
        out[lo:lo + c.shape[0]] = f @ wts
    return out


def weak_star_distance(a: MeasureSample, b: MeasureSample,
                       box: tuple[float, float, float, float] | None = None,
                       scales: tuple[float, ...] = (1.0, 0.5, 0.25),
                       lattice_factor: int = 8) -> float:
    """Largest disagreement over a fixed dictionary of Lipschitz cones.

    The dictionary holds the constant 1 and, for each scale s <= 1, the cones
    x -> max(0, s - |x - c|_inf) on a lattice of spacing s / lattice_factor.
    All entries are 1-Lipschitz with sup norm <= 1, so the result lower-bounds
    the bounded-Lipschitz distance and metrizes weak-star convergence up to
    the lattice resolution.
    """
    if any(s > 1.0 or s <= 0.0 for s in scales):
        raise PhaseFieldError("cone scales must lie in (0, 1]")
    if box is None:
        all_pts = np.vstack([p for p in (a.points, b.points) if p.shape[0]])
        if all_pts.shape[0] == 0:
            return 0.0
        pad = max(scales)
        box = (all_pts[:, 0].min() - pad, all_pts[:, 1].min() - pad,
               all_pts[:, 0].max() + pad, all_pts[:, 1].max() + pad)
    best = abs(a.total_mass - b.total_mass)
    for s in scales:
        centers = _cone_lattice(box, s, lattice_factor)
        gap = np.abs(_cone_integrals(a, centers, s) - _cone_integrals(b, centers, s))
        best = max(best, float(gap.max()))
    return best


# ---------------------------------------------------------------------------
# constrained alternating minimization


def project_volume(grid: StripGrid, w: np.ndarray, volume: float,
                   tol: float = 1e-12, iters: int = 60) -> np.ndarray:
    """Project onto {0 <= w <= 1, int_{y>0} w = volume} by iterated correction.

    The additive correction is weighted by min(w, 1 - w) so nodes pinned at
    the box bounds do not move; clipping after each correction keeps the box
    and the loop re-targets the volume until it holds to tol.
    """
    w = np.clip(np.asarray(w, dtype=float), 0.0, 1.0)
    wts = node_weights(grid, "upper")
    scale = max(1.0, abs(volume))
    for _ in range(iters):
        r = volume - float(np.sum(wts * w))
        if abs(r) <= tol * scale:
            return w
        g = np.minimum(w, 1.0 - w)
        g_int = float(np.sum(wts * g))
        if g_int <= 1e-14:
            g = (wts > 0).astype(float)
            g_int = float(np.sum(wts * g))
        w = np.clip(w + (r / g_int) * g, 0.0, 1.0)
    r = volume - float(np.sum(wts * w))
    if abs(r) > 1e-9 * scale:
        raise PhaseFieldError(f"volume projection stalled (defect {r:.3e})")
    return w


def project_mass(measure: DiffuseMeasure, u: np.ndarray, mass: float) -> np.ndarray:
    """Rescale u >= 0 so that int u dmu = mass exactly."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    cur = measure.integrate(u)
    if cur <= 0.0:
        raise PhaseFieldError("adatom measure carries no mass to rescale")
    return u * (mass / cur)


@dataclass
class MinimizeResult:
    v: np.ndarray
    w: np.ndarray
    u: np.ndarray
    energy: PhaseFieldEnergy
    energies: np.ndarray
    iterations: int
    converged: bool
    mass: float
    volume: float
    volume_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _initial_w(grid: StripGrid, volume: float, eps: float) -> np.ndarray:
    h0 = volume / (grid.b - grid.a)
    w = 1.0 / (1.0 + np.exp((grid.Y - h0) / max(eps, 1e-6)))
    w[grid.Y < 0.0] = 1.0
    return project_volume(grid, w, volume)


def minimize_eps(model: ElasticModel, well: DoubleWell, psi: SurfaceDensity,
                 grid: StripGrid, eps: float, mass: float, volume: float,
                 w0: np.ndarray | None = None, u0: np.ndarray | None = None,
                 eta: float | None = None, bc: DisplacementBC = DisplacementBC(),
                 outer: int = 30, rtol: float = 1e-7,
                 cg_tol: float = 1e-8) -> MinimizeResult:
    """Alternating descent on (v, w, u) under volume and adatom-mass constraints.

    v is minimized exactly (conjugate gradients); w and u take projected
    gradient steps with backtracking, so every accepted outer iteration
    decreases the energy. Feasibility (box, volume, mass) holds after every
    accepted step.
    """
    if eta is None:
        eta = default_eta(eps)
    if mass < 0 or volume <= 0:
        raise PhaseFieldError("need volume > 0 and mass >= 0")
    periodic = bc.lateral == "periodic"
    w = _initial_w(grid, volume, eps) if w0 is None else project_volume(grid, np.array(w0, float), volume)
    w[grid.Y < 0.0] = 1.0
    mu = diffuse_measure(well, grid, w, eps, periodic)
    u = np.ones(grid.shape) if u0 is None else np.array(u0, dtype=float)
    u = project_mass(mu, u, mass) if mass > 0 else np.zeros(grid.shape)

    wts_up = node_weights(grid, "upper")
    wts_full = node_weights(grid)
    dx, dy = diff_matrices(grid, periodic)
    sigma = well.sigma()
    upper_nodes = grid.Y >= 0.0

    sol = solve_displacement(model, grid, w, eta, bc, tol=cg_tol)
    v = sol.v

    def total(vf, wf, uf) -> PhaseFieldEnergy:
        return energy_eps(model, well, psi, grid, vf, wf, uf, eps, eta, bc)

    cur = total(v, w, u)
    energies = [cur.total]
    vol_trace = [abs(float(np.sum(wts_up * w)) - volume)]
    mass_trace = [abs(mu.integrate(u) - mass) if mass > 0 else 0.0]
    step_w, step_u = eps, 1.0
    converged = False
    it = 0
    for it in range(1, outer + 1):
        # exact v-step (warm start); keep the old field if CG gave no gain
        sol = solve_displacement(model, grid, w, eta, bc, tol=cg_tol, v0=v)
        trial = total(sol.v, w, u)
        if trial.total <= cur.total:
            v, cur = sol.v, trial

        # w-step: projected gradient with backtracking
        ev = sym_gradient(grid, v, periodic_x=periodic)
        dens_el = model.density(ev - model.eigenstrain_field(grid))
        gx = np.asarray(dx @ w.ravel()).reshape(grid.shape)
        gy = np.asarray(dy @ w.ravel()).reshape(grid.shape)
        psi_u = np.asarray(psi(u))
        q = wts_up * psi_u / sigma
        grad_w = wts_full * dens_el * upper_nodes
        grad_w = grad_w + 2.0 * eps * (
            np.asarray(dx.T @ (q * gx).ravel()).reshape(grid.shape)
            + np.asarray(dy.T @ (q * gy).ravel()).reshape(grid.shape)
        )
        grad_w = grad_w + q * well.derivative(w) / eps
        pre = np.where(wts_full > 0, wts_full, 1.0)
        direction = grad_w / pre
        direction[grid.Y < 0.0] = 0.0
        accepted = False
        tau = step_w
        for _ in range(30):
            w_try = np.clip(w - tau * direction, 0.0, 1.0)
            w_try[grid.Y < 0.0] = 1.0
            try:
                w_try = project_volume(grid, w_try, volume)
            except PhaseFieldError:
                tau *= 0.5
                continue
            mu_try = diffuse_measure(well, grid, w_try, eps, periodic)
            try:
                u_try = project_mass(mu_try, u, mass) if mass > 0 else u
            except PhaseFieldError:
                tau *= 0.5
                continue
            e = total(v, w_try, u_try)
            if e.total < cur.total - 1e-14 * max(1.0, abs(cur.total)):
                w, u, cur, mu = w_try, u_try, e, mu_try
                step_w = min(tau * 1.5, 10.0 * eps)
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            step_w = max(step_w * 0.25, 1e-8 * eps)

        # u-step: descent on int psi(u) dmu at fixed mass
        if mass > 0 and np.any(psi.derivative(u)):
            mu_w = wts_up * mu.density
            grad_u = mu_w * np.asarray(psi.derivative(u))
            pre_u = np.where(mu_w > 0, mu_w, 1.0)
            dir_u = grad_u / pre_u
            dir_u[mu_w <= 0] = 0.0
            tau = step_u
            for _ in range(30):
                try:
                    u_try = project_mass(mu, np.maximum(u - tau * dir_u, 0.0), mass)
                except PhaseFieldError:
                    tau *= 0.5
                    continue
                e = total(v, w, u_try)
                if e.total < cur.total - 1e-14 * max(1.0, abs(cur.total)):
                    u, cur = u_try, e
                    step_u = min(tau * 1.5, 100.0)
                    break
                tau *= 0.5
            else:
                step_u = max(step_u * 0.25, 1e-10)

        energies.append(cur.total)
        vol_trace.append(abs(float(np.sum(wts_up * w)) - volume))
        mass_trace.append(abs(mu.integrate(u) - mass) if mass > 0 else 0.0)
        if len(energies) >= 3:
            drop = energies[-2] - energies[-1]
            if 0 <= drop <= rtol * max(1.0, abs(energies[-1])):
                converged = True
                break

    mu = diffuse_measure(well, grid, w, eps, periodic)
    final_mass = mu.integrate(u) if mass > 0 else 0.0
    return MinimizeResult(v, w, u, cur, np.asarray(energies), it, converged,
                          final_mass, film_volume(grid, w),
                          np.asarray(vol_trace), np.asarray(mass_trace))
