"""Film profiles of bounded variation and the geometry of their graphs.

A profile h on (a, b) is stored as a piecewise-linear polyline with optional
vertical jumps (duplicated abscissae) and cut records (x, dip value, lower
limit h^-) marking zero-width fractures below the graph. The extended graph
Gamma decomposes into regular polyline segments, jump verticals and cut
verticals; adatom densities live on those segments plus optional atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .grids import StripGrid


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class BVProfile:
    """Nonnegative BV film profile: polyline + jumps + cuts.

    xs, ys: breakpoint arrays; xs non-decreasing, duplicated exactly at jump
    abscissae (the pair of values being the two one-sided limits).
    jumps: tuples (x, lo, hi) with lo < hi, canonical order.
    cuts: tuples (x, value, h_minus) with value < h_minus = lim inf of h at x;
    the pointwise value h(x) dips to `value` on a null set.
    """

    a: float
    b: float
    xs: np.ndarray
    ys: np.ndarray
    jumps: tuple = ()
    cuts: tuple = ()

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise GeometryError("profile needs matching breakpoint arrays")
        if xs[0] != self.a or xs[-1] != self.b or np.any(np.diff(xs) < 0):
            raise GeometryError("breakpoints must span [a, b], non-decreasing")
        if np.any(ys < 0):
            raise GeometryError("profile heights must be nonnegative")
        jump_xs = {float(j[0]) for j in self.jumps}
        dup = xs[:-1][np.diff(xs) == 0]
        if set(np.round(dup, 15)) != {round(x, 15) for x in jump_xs}:
            raise GeometryError("duplicated abscissae must match declared jumps")
        for x0, lo, hi in self.jumps:
            if not (self.a < x0 < self.b) or not lo < hi:
                raise GeometryError("jumps must be interior with lo < hi")
        for x0, val, hm in self.cuts:
            if not (self.a < x0 < self.b) or not val < hm:
                raise GeometryError("cuts must be interior with value < h^-")
            if val < 0:
                raise GeometryError("cut value must be nonnegative")
            if x0 in jump_xs:
                raise GeometryError("jump and cut abscissae must be distinct")
            if abs(hm - self._polyline_at(x0, xs, ys)) > 1e-9 * max(1.0, hm):
                raise GeometryError("cut h^- must equal the polyline value")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "jumps", tuple(tuple(map(float, j)) for j in self.jumps))
        object.__setattr__(self, "cuts", tuple(tuple(map(float, c)) for c in self.cuts))

    @staticmethod
    def _polyline_at(x, xs, ys):
        return float(np.interp(x, xs, ys))

    # -- constructors ------------------------------------------------------

    @classmethod
    def flat(cls, height: float, a: float = 0.0, b: float = 1.0) -> "BVProfile":
        return cls(a, b, np.array([a, b]), np.array([height, height]))

    @classmethod
    def from_breakpoints(cls, xs, ys, jumps=(), cuts=()) -> "BVProfile":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return cls(float(xs[0]), float(xs[-1]), xs, ys, tuple(jumps), tuple(cuts))

    @classmethod
    def from_callable(cls, f, a: float, b: float, n: int = 513) -> "BVProfile":
        xs = np.linspace(a, b, n)
        return cls(a, b, xs, np.asarray(f(xs), dtype=float))

    # -- evaluation --------------------------------------------------------

    def height(self, x) -> np.ndarray:
        """Polyline height (one-sided limits agree a.e.; clamped beyond [a,b])."""
        x = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        out = np.interp(x, self.xs, self.ys)
        return out if out.ndim else float(out)

    def height_pointwise(self, x, snap: float = 0.0):
        """Pointwise value including cut dips within `snap` of a cut abscissa."""
        out = np.atleast_1d(np.asarray(self.height(x), dtype=float)).copy()
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        for xc, val, _hm in self.cuts:
            hit = np.abs(xv - xc) <= snap
            out[hit] = np.minimum(out[hit], val)
        return out if np.ndim(x) else float(out[0])

    @property
    def max_height(self) -> float:
        return float(self.ys.max())

    @property
    def lipschitz(self) -> float:
        """Max slope of the continuous pieces (infinite if jumps present)."""
        if self.jumps:
            return np.inf
        dx = np.diff(self.xs)
        dy = np.diff(self.ys)
        keep = dx > 0
        return float(np.abs(dy[keep] / dx[keep]).max()) if keep.any() else 0.0

    @property
    def mass(self) -> float:
        """Integral of h over (a, b) (cuts and jumps are null sets)."""
        return float(np.trapezoid(self.ys, self.xs))

    @property
    def total_variation(self) -> float:
        """Pointwise variation: pieces + jump heights + twice the cut depths."""
        dx = np.diff(self.xs)
        dy = np.abs(np.diff(self.ys))
        pieces = float(dy[dx > 0].sum())
        jump_v = float(sum(hi - lo for _x, lo, hi in self.jumps))
        cut_v = float(sum(2.0 * (hm - val) for _x, val, hm in self.cuts))
        return pieces + jump_v + cut_v


# ---------------------------------------------------------------------------
# graph decomposition


class GraphSegment(NamedTuple):
    kind: str  # "regular" | "jump" | "cut"
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def length(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))


@dataclass(frozen=True)
class GraphDecomposition:
    """Extended graph split into regular, jump and cut segments."""

    segments: tuple

    def _len(self, kind: str) -> float:
        return sum(s.length for s in self.segments if s.kind == kind)

    @property
    def regular_length(self) -> float:
        return self._len("regular")

    @property
    def jump_length(self) -> float:
        return self._len("jump")

    @property
    def cut_length(self) -> float:
        return self._len("cut")

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)


def decompose(profile: BVProfile) -> GraphDecomposition:
    """Segments of the extended graph: polyline pieces, jumps, cuts."""
    segs: list[GraphSegment] = []
    xs, ys = profile.xs, profile.ys
    for i in range(xs.size - 1):
        if xs[i + 1] > xs[i]:
            segs.append(GraphSegment("regular", xs[i], ys[i], xs[i + 1], ys[i + 1]))
        else:
            lo, hi = sorted((ys[i], ys[i + 1]))
            segs.append(GraphSegment("jump", xs[i], lo, xs[i], hi))
    for xc, val, hm in profile.cuts:
        segs.append(GraphSegment("cut", xc, val, xc, hm))
    return GraphDecomposition(tuple(segs))


# ---------------------------------------------------------------------------
# adatom measures


class MeasureSegment(NamedTuple):
    kind: str
    x0: float
    y0: float
    x1: float
    y1: float
    u: float  # constant density per length

    @property
    def length(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    @property
    def mass(self) -> float:
        return self.u * self.length


@dataclass(frozen=True)
class AdatomMeasure:
    """Density per arclength on graph segments plus optional point atoms."""

    segments: tuple
    atoms: tuple = ()  # ((x, y), mass)

    def __post_init__(self):
        for seg in self.segments:
            if seg.u < 0:
                raise GeometryError("adatom density must be nonnegative")
        for _pt, mass in self.atoms:
            if mass <= 0:
                raise GeometryError("atom masses must be positive")

    @classmethod
    def from_decomposition(cls, decomp: GraphDecomposition, u, atoms=()) -> "AdatomMeasure":
        """Constant density u (scalar or per-segment sequence) on the graph."""
        if np.ndim(u) == 0:
            dens = [float(u)] * len(decomp.segments)
        else:
            dens = [float(v) for v in u]
            if len(dens) != len(decomp.segments):
                raise GeometryError("one density per segment required")
        segs = tuple(
            MeasureSegment(s.kind, s.x0, s.y0, s.x1, s.y1, d)
            for s, d in zip(decomp.segments, dens)
        )
        atoms = tuple(((float(p[0]), float(p[1])), float(m)) for p, m in atoms)
        return cls(segs, atoms)

    @property
    def segment_mass(self) -> float:
        return float(sum(s.mass for s in self.segments))

    @property
    def atom_mass(self) -> float:
        return float(sum(m for _p, m in self.atoms))

    @property
    def total_mass(self) -> float:
        return self.segment_mass + self.atom_mass

    def max_density(self) -> float:
        return max((s.u for s in self.segments), default=0.0)


# ---------------------------------------------------------------------------
# signed distance


def _boundary_points(profile: BVProfile, spacing: float, margin: float) -> np.ndarray:
    """Dense point sampling of the boundary of the subgraph.

    The profile is extended laterally by its endpoint values (the strip-local
    energies never see lateral boundary layers), realized as horizontal rays
    of length `margin`.
    """
    pts = []
    segs = list(decompose(profile).segments)
    segs.append(GraphSegment("regular", profile.a - margin, profile.ys[0], profile.a, profile.ys[0]))
    segs.append(GraphSegment("regular", profile.b, profile.ys[-1], profile.b + margin, profile.ys[-1]))
    for s in segs:
        n = max(2, int(np.ceil(s.length / spacing)) + 1)
        t = np.linspace(0.0, 1.0, n)
        pts.append(np.column_stack([s.x0 + t * (s.x1 - s.x0), s.y0 + t * (s.y1 - s.y0)]))
    return np.vstack(pts)


def signed_distance_points(profile: BVProfile, pts: np.ndarray, spacing: float | None = None) -> np.ndarray:
    """Signed distance to the subgraph Omega = {y < h(x)} at arbitrary points.

    Negative inside the film, positive outside; computed as distance to a
    dense boundary sampling (cKDTree), sign from y vs the polyline height.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if spacing is None:
        spacing = max(profile.b - profile.a, profile.max_height, 1e-3) / 4096.0
    margin = (profile.b - profile.a) + profile.max_height + 1.0
    bpts = _boundary_points(profile, spacing, margin)
    dist, _ = cKDTree(bpts).query(pts, workers=-1)
    inside = pts[:, 1] < profile.height(pts[:, 0])
    return np.where(inside, -dist, dist)


def signed_distance(profile: BVProfile, grid: StripGrid) -> np.ndarray:
    """Signed distance field on the grid nodes (negative inside the film)."""
    spacing = 0.25 * min(grid.hx, grid.hy)
    pts = np.column_stack([grid.X.ravel(), grid.Y.ravel()])
    return signed_distance_points(profile, pts, spacing).reshape(grid.shape)


# ---------------------------------------------------------------------------
# Hausdorff distance between complements


class HausdorffResult(NamedTuple):
    value: float
    resolution: float  # grid sampling error bound reported alongside


def _complement_mask(profile: BVProfile, grid: StripGrid) -> np.ndarray:
    h = profile.height_pointwise(grid.x, snap=0.5 * grid.hx)
    return grid.Y >= np.asarray(h)[:, None]


def hausdorff_complement(p1: BVProfile, p2: BVProfile, grid: StripGrid) -> HausdorffResult:
    """Hausdorff distance between grid samplings of the subgraph complements.

    Cut slits are sampled on the grid column nearest their abscissa. The
    returned resolution (cell diagonal) bounds the sampling error.
    """
    m1 = _complement_mask(p1, grid)
    m2 = _complement_mask(p2, grid)
    if not (m1.any() and m2.any()):
        raise GeometryError("window does not reach the complements")
    pts1 = np.column_stack([grid.X[m1], grid.Y[m1]])
    pts2 = np.column_stack([grid.X[m2], grid.Y[m2]])
    d12, _ = cKDTree(pts2).query(pts1, workers=-1)
    d21, _ = cKDTree(pts1).query(pts2, workers=-1)
    res = float(np.hypot(grid.hx, grid.hy))
    return HausdorffResult(float(max(d12.max(), d21.max())), res)


# ---------------------------------------------------------------------------
# covers


class Rect(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def sides(self) -> tuple[float, float]:
        return (self.x1 - self.x0, self.y1 - self.y0)

    def contains(self, x, y, closed: bool = True):
        if closed:
            return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)


@dataclass(frozen=True)
class AdmissibleCover:
    """Disjoint open rectangles with sides < delta whose closures cover Gamma."""

    rects: tuple
    delta: float


def _nudge_away(splits: np.ndarray, avoid: np.ndarray, min_gap: float) -> np.ndarray:
    """Shift interior split lines off the avoided coordinates."""
    out = splits.copy()
    for i in range(1, out.size - 1):
        while avoid.size and np.min(np.abs(out[i] - avoid)) < min_gap:
            out[i] += min_gap * 0.618
    return out


def _row_splits(ylo: float, yhi: float, eff: float) -> np.ndarray:
    nrow = max(1, int(np.ceil((yhi - ylo) / eff)))
    return np.linspace(ylo, yhi, nrow + 1)


def delta_cover(
    profile: BVProfile,
    delta: float,
    pad_y: float = 0.0,
    min_cell: float | None = None,
    protect: tuple | None = None,
) -> AdmissibleCover:
    """Column-stacked rectangle cover of Gamma with sides < delta.

    Column splits avoid jump/cut abscissae and row splits avoid flat graph
    levels so that no rectangle edge overlaps Gamma over positive length.
    pad_y enlarges the vertical extent (used to enclose transition tubes).

    protect = (lo_off, hi_off) reserves, per column, the band from
    min-height - lo_off to max-height + hi_off for a single rectangle row:
    no horizontal split may slice it. Transition layers hugging Gamma then
    stay in the same rectangle as the graph piece they belong to, which a
    generic row split would separate on flat stretches (the density mass
    would land in a rectangle carrying no sharp mass). The band must fit
    inside delta; callers enlarge delta accordingly.
    """
    if delta <= 0:
        raise GeometryError("delta must be positive")
    if min_cell is not None and delta < 4.0 * min_cell:
        raise GeometryError("delta smaller than 4 grid cells: cover unresolvable")
    a, b = profile.a, profile.b
    eff = 0.98 * delta
    ncol = max(1, int(np.ceil((b - a) / eff)))
    splits = np.linspace(a, b, ncol + 1)
    avoid_x = np.array([j[0] for j in profile.jumps] + [c[0] for c in profile.cuts])
    splits = _nudge_away(splits, avoid_x, min(0.05 * eff, 1e-3 * (b - a)))
    # flat polyline levels to keep horizontal edges off the graph
    dx = np.diff(profile.xs)
    dy = np.diff(profile.ys)
    level_scale = max(1.0, float(np.abs(profile.ys).max()))
    flat = (dx > 0) & (np.abs(dy) <= 1e-12 * level_scale)
    flat_levels = np.unique(np.round(profile.ys[:-1][flat], 9))
    gap = min(0.05 * eff, 1e-3)
    rects: list[Rect] = []
    for i in range(ncol):
        x0, x1 = splits[i], splits[i + 1]
        xf = np.linspace(x0, x1, 65)
        hv = profile.height(xf)
        glo, ghi = float(hv.min()), float(hv.max())
        for xj, lo, hi in profile.jumps:
            if x0 - 1e-12 <= xj <= x1 + 1e-12:
                glo, ghi = min(glo, lo), max(ghi, hi)
        for xc, val, hm in profile.cuts:
            if x0 - 1e-12 <= xc <= x1 + 1e-12:
                glo = min(glo, val)
        ylo = glo - (pad_y + 0.01 * eff)
        yhi = ghi + (pad_y + 0.01 * eff)
        if protect is None:
            ysplits = _nudge_away(_row_splits(ylo, yhi, eff), flat_levels, gap)
        else:
            lo_off, hi_off = protect
            band_lo, band_hi = glo - lo_off, ghi + hi_off
            if band_hi - band_lo >= eff:
                raise GeometryError(
                    "protected band exceeds delta: enlarge delta or reduce eps")
            while flat_levels.size and np.min(np.abs(band_lo - flat_levels)) < gap:
                band_lo -= gap * 0.618
            while flat_levels.size and np.min(np.abs(band_hi - flat_levels)) < gap:
                band_hi += gap * 0.618
            below = _row_splits(ylo, band_lo, eff) if band_lo - ylo > gap else [band_lo]
            above = _row_splits(band_hi, yhi, eff) if yhi - band_hi > gap else [band_hi]
            ysplits = np.concatenate([
                _nudge_away(np.asarray(below, dtype=float), flat_levels, gap)[:-1],
                [band_lo, band_hi],
                _nudge_away(np.asarray(above, dtype=float), flat_levels, gap)[1:],
            ])
        for j in range(ysplits.size - 1):
            rects.append(Rect(float(x0), float(ysplits[j]), float(x1), float(ysplits[j + 1])))
    cover = AdmissibleCover(tuple(rects), float(delta))
    check_cover(profile, cover)
    return cover


def check_cover(profile: BVProfile, cover: AdmissibleCover, n_probe: int = 2048) -> None:
    """Validate sides < delta, coverage of Gamma, and H^1(Gamma ∩ ∂R) = 0."""
    for r in cover.rects:
        if max(r.sides) >= cover.delta:
            raise GeometryError("cover rectangle side exceeds delta")
        if min(r.sides) <= 0:
            raise GeometryError("degenerate cover rectangle")
    for ra in cover.rects:
        for rb in cover.rects:
            if ra is rb:
                continue
            if (ra.x0 < rb.x1 and rb.x0 < ra.x1) and (ra.y0 < rb.y1 and rb.y0 < ra.y1):
                raise GeometryError("cover rectangles overlap")
    # dense sampling of Gamma must fall in the union of closures
    tol = 1e-9
    segments = decompose(profile).segments
    chunks = []
    for seg in segments:
        t = np.linspace(0.0, 1.0, max(8, int(n_probe * seg.length) + 2))
        chunks.append(
            np.column_stack([seg.x0 + t * (seg.x1 - seg.x0), seg.y0 + t * (seg.y1 - seg.y0)])
        )
    pts = np.vstack(chunks)
    px, py = pts[:, 0], pts[:, 1]
    covered = np.zeros(px.shape, dtype=bool)
    edge_tol = 1e-12
    for r in cover.rects:
        in_r = (px >= r.x0 - tol) & (px <= r.x1 + tol) & (py >= r.y0 - tol) & (py <= r.y1 + tol)
        covered |= in_r
        # H^1(Gamma ∩ ∂R) = 0: no segment may run along an edge line over
        # positive length (transversal crossings are zero-measure and fine)
        for seg in segments:
            if (abs(seg.y0 - r.y0) < edge_tol and abs(seg.y1 - r.y0) < edge_tol) or (
                    abs(seg.y0 - r.y1) < edge_tol and abs(seg.y1 - r.y1) < edge_tol):
                lo, hi = min(seg.x0, seg.x1), max(seg.x0, seg.x1)
                if min(hi, r.x1) - max(lo, r.x0) > tol:
                    raise GeometryError("rectangle edge overlaps Gamma")
            if (abs(seg.x0 - r.x0) < edge_tol and abs(seg.x1 - r.x0) < edge_tol) or (
                    abs(seg.x0 - r.x1) < edge_tol and abs(seg.x1 - r.x1) < edge_tol):
                lo, hi = min(seg.y0, seg.y1), max(seg.y0, seg.y1)
                if min(hi, r.y1) - max(lo, r.y0) > tol:
                    raise GeometryError("rectangle edge overlaps Gamma")
    if not covered.all():
        raise GeometryError("cover does not contain Gamma")


# ---------------------------------------------------------------------------
# segment clipping and grid-constant projection


def _clip_segment(seg, rect: Rect):
    """Intersection of a segment with a closed rectangle (Liang-Barsky)."""
    dx, dy = seg.x1 - seg.x0, seg.y1 - seg.y0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, seg.x0 - rect.x0),
        (dx, rect.x1 - seg.x0),
        (-dy, seg.y0 - rect.y0),
        (dy, rect.y1 - seg.y0),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    if t1 <= t0:
        return None
    return (
        seg.x0 + t0 * dx,
        seg.y0 + t0 * dy,
        seg.x0 + t1 * dx,
        seg.y0 + t1 * dy,
    )


def grid_constant_project(measure: AdatomMeasure, cover: AdmissibleCover) -> AdatomMeasure:
    """Project the measure to rectangle-wise constant densities on Gamma.

    Per rectangle: u^j = (segment mass + atom mass inside) / H^1(Gamma ∩ R^j).
    Atoms are absorbed; total mass is preserved exactly.
    """
    out_segs: list[MeasureSegment] = []
    used_atoms = [False] * len(measure.atoms)
    total_len = sum(s.length for s in measure.segments)
    len_clipped = 0.0
    for j, rect in enumerate(cover.rects):
        pieces = []
        mass_j = 0.0
        len_j = 0.0
        for seg in measure.segments:
            clip = _clip_segment(seg, rect)
            if clip is None:
                continue
            piece = MeasureSegment(seg.kind, *clip, seg.u)
            if piece.length <= 1e-14 * max(1.0, total_len):
                continue
            pieces.append(piece)
            mass_j += piece.mass
            len_j += piece.length
        for k, ((ax, ay), am) in enumerate(measure.atoms):
            if used_atoms[k]:
                continue
            if rect.contains(ax, ay):
                mass_j += am
                used_atoms[k] = True
        if len_j <= 0.0:
            if mass_j > 0.0:
                raise GeometryError(
                    f"rectangle {j} carries mass {mass_j:.3g} but no graph length"
                )
            continue
        u_j = mass_j / len_j
        out_segs.extend(
            MeasureSegment(p.kind, p.x0, p.y0, p.x1, p.y1, u_j) for p in pieces
        )
        len_clipped += len_j
    if not all(used_atoms):
        raise GeometryError("an atom lies outside the cover")
    if abs(len_clipped - total_len) > 1e-8 * max(1.0, total_len):
        raise GeometryError("cover misses part of Gamma (length mismatch)")
    return AdatomMeasure(tuple(out_segs), ())


def rect_masses(measure: AdatomMeasure, cover: AdmissibleCover) -> tuple[np.ndarray, np.ndarray]:
    """Per-rectangle (mass, graph length) of the measure under the cover."""
    masses = np.zeros(len(cover.rects))
    lengths = np.zeros(len(cover.rects))
    used = [False] * len(measure.atoms)
    for j, rect in enumerate(cover.rects):
        for seg in measure.segments:
            clip = _clip_segment(seg, rect)
            if clip is None:
                continue
            piece = MeasureSegment(seg.kind, *clip, seg.u)
            masses[j] += piece.mass
            lengths[j] += piece.length
        for k, ((ax, ay), am) in enumerate(measure.atoms):
            if not used[k] and rect.contains(ax, ay):
                masses[j] += am
                used[k] = True
    if not all(used):
        raise GeometryError("an atom lies outside the cover")
    return masses, lengths
