"""Surface energy densities and their relaxation envelopes.

A density psi: [0, inf) -> (0, inf) enters the relaxed surface energy through
three derived objects, all realized here as sampled tables on a uniform grid:

* psi_cvx   lower convex envelope (monotone-chain lower hull of the samples),
* psi_tilde largest convex sub-additive minorant: equals psi_cvx up to the
            smallest minimizer s0 of psi_cvx(s)/s and continues linearly with
            slope theta = psi_cvx(s0)/s0 beyond; if the ratio is minimized
            only at the right end of the table, s0 is reported as the
            infinite sentinel (None) and psi_tilde = psi_cvx,
* psi_cut   cut relaxation psi_cut(s) = min{psi_tilde(r) + psi_tilde(t):
            r + t = s} = 2 psi_tilde(s/2) for convex psi_tilde.

theta is the common recession slope of psi_tilde and psi_cut and weights the
singular (atomic) part of the adatom measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EnvelopeError(ValueError):
    pass


class UnresolvedRecessionError(EnvelopeError):
    """Table too short: terminal slopes have not settled."""


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class SurfaceDensity:
    """Borel density psi on [0, inf), bounded away from zero.

    kind: "constant" | "affine" | "quadratic" | "sampled".
    params: coefficients (c0,), (c0, c1) or (c0, c1, c2) for the symbolic
    kinds, meaning c0 + c1 s + c2 s^2. Sampled densities interpolate
    (samples_s, samples_v) piecewise-linearly and extend with tail_slope.
    """

    kind: str
    params: tuple = ()
    samples_s: np.ndarray | None = None
    samples_v: np.ndarray | None = None
    tail_slope: float = 0.0

    def __post_init__(self):
        if self.kind in ("constant", "affine", "quadratic"):
            c = dict(constant=1, affine=2, quadratic=3)[self.kind]
            if len(self.params) != c:
                raise EnvelopeError(f"{self.kind} density needs {c} coefficients")
            if self._inf_value() <= 0.0:
                raise EnvelopeError("density must be bounded away from zero on [0, inf)")
        elif self.kind == "sampled":
            s = np.asarray(self.samples_s, dtype=float)
            v = np.asarray(self.samples_v, dtype=float)
            if s.ndim != 1 or s.shape != v.shape or s.size < 2:
                raise EnvelopeError("sampled density needs matching 1-D sample arrays")
            if s[0] != 0.0 or np.any(np.diff(s) <= 0):
                raise EnvelopeError("sample abscissae must increase from 0")
            if v.min() <= 0.0 or self.tail_slope < 0.0:
                raise EnvelopeError("density must stay positive (tail slope >= 0)")
            object.__setattr__(self, "samples_s", s)
            object.__setattr__(self, "samples_v", v)
        else:
            raise EnvelopeError(f"unknown density kind {self.kind!r}")

    def _inf_value(self) -> float:
        c = self.params
        if self.kind == "constant":
            return c[0]
        if self.kind == "affine":
            return min(c[0], np.inf) if c[1] >= 0 else -np.inf
        # quadratic: minimum over [0, inf)
        c0, c1, c2 = c
        if c2 < 0:
            return -np.inf
        if c2 == 0:
            return c0 if c1 >= 0 else -np.inf
        smin = max(0.0, -c1 / (2.0 * c2))
        return c0 + c1 * smin + c2 * smin**2

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise EnvelopeError("density evaluated at negative coverage")
        if self.kind == "constant":
            out = np.full_like(s, self.params[0])
        elif self.kind == "affine":
            out = self.params[0] + self.params[1] * s
        elif self.kind == "quadratic":
            c0, c1, c2 = self.params
            out = c0 + c1 * s + c2 * s * s
        else:
            out = np.interp(s, self.samples_s, self.samples_v)
            over = s > self.samples_s[-1]
            if np.any(over):
                out = np.where(
                    over,
                    self.samples_v[-1] + self.tail_slope * (s - self.samples_s[-1]),
                    out,
                )
        return out if out.ndim else float(out)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            out = np.zeros_like(s)
        elif self.kind == "affine":
            out = np.full_like(s, self.params[1])
        elif self.kind == "quadratic":
            out = self.params[1] + 2.0 * self.params[2] * s
        else:
            ds = max(1e-6, 1e-6 * float(self.samples_s[-1]))
            out = (self(s + ds) - self(np.maximum(s - ds, 0.0))) / (
                ds + np.minimum(s, ds)
            )
        return out if out.ndim else float(out)

    @classmethod
    def constant(cls, c0: float) -> "SurfaceDensity":
        return cls("constant", (float(c0),))

    @classmethod
    def affine(cls, c0: float, c1: float) -> "SurfaceDensity":
        return cls("affine", (float(c0), float(c1)))

    @classmethod
    def quadratic(cls, c0: float, c1: float, c2: float) -> "SurfaceDensity":
        return cls("quadratic", (float(c0), float(c1), float(c2)))

    @classmethod
    def from_samples(cls, s, v, tail_slope: float | None = None) -> "SurfaceDensity":
        s = np.asarray(s, dtype=float)
        v = np.asarray(v, dtype=float)
        if tail_slope is None:
            tail_slope = max(0.0, (v[-1] - v[-2]) / (s[-1] - s[-2]))
        return cls("sampled", (), s, v, float(tail_slope))

    @classmethod
    def from_callable(cls, f, s_max: float, n: int = 2049) -> "SurfaceDensity":
        s = np.linspace(0.0, s_max, n)
        return cls.from_samples(s, np.asarray(f(s), dtype=float))


# ---------------------------------------------------------------------------
# envelope operations


def convexify(s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Lower convex envelope of the sampled points, evaluated on the grid.

    Monotone-chain lower hull; the result equals v at hull contact points and
    is the hull chord elsewhere.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(v, dtype=float)
    if s.ndim != 1 or s.shape != v.shape or s.size < 2:
        raise EnvelopeError("convexify needs matching 1-D arrays")
    if np.any(np.diff(s) <= 0):
        raise EnvelopeError("abscissae must be strictly increasing")
    hull_i: list[int] = []
    for i in range(s.size):
        while len(hull_i) >= 2:
            i0, i1 = hull_i[-2], hull_i[-1]
            # drop i1 if it lies on or above chord (i0, i)
            cross = (s[i1] - s[i0]) * (v[i] - v[i0]) - (v[i1] - v[i0]) * (s[i] - s[i0])
            if cross <= 0.0:
                hull_i.pop()
            else:
                break
        hull_i.append(i)
    idx = np.asarray(hull_i)
    return np.interp(s, s[idx], v[idx])


def _check_convex(s: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> None:
    sl = np.diff(v) / np.diff(s)
    if np.any(np.diff(sl) < -tol * max(1.0, np.abs(sl).max())):
        raise EnvelopeError("input table is not convex")


def subadditive_envelope(
    s: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, float | None, float]:
    """Largest convex sub-additive minorant of a convex positive table.

    Returns (psi_tilde values, s0, theta). s0 is the smallest minimizer of
    v(s)/s; when the ratio keeps decreasing to the end of the table, s0 is
    the infinite sentinel None and psi_tilde is the input.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_convex(s, v)
    if v.min() <= 0.0:
        raise EnvelopeError("envelope of a non-positive table")
    ratio = v[1:] / s[1:]
    k = int(np.argmin(ratio))  # argmin takes the first minimizer
    if k == ratio.size - 1:
        # tangent point beyond the table: psi_tilde = psi, theta = limit slope
        theta = (v[-1] - v[-2]) / (s[-1] - s[-2])
        return v.copy(), None, float(theta)
    s0 = float(s[k + 1])
    theta = float(ratio[k])
    out = np.where(s <= s0, v, theta * s)
    return out, s0, theta


def cut_envelope(s: np.ndarray, v_tilde: np.ndarray) -> np.ndarray:
    """psi_cut(s) = min over r + t = s of psi_tilde(r) + psi_tilde(t).

    For convex psi_tilde the symmetric split is optimal: 2 psi_tilde(s/2).
    """
    s = np.asarray(s, dtype=float)
    v_tilde = np.asarray(v_tilde, dtype=float)
    _check_convex(s, v_tilde)
    return 2.0 * np.interp(0.5 * s, s, v_tilde)


def recession(s: np.ndarray, v: np.ndarray, tol: float = 1e-8) -> float:
    """Terminal chord slope of a convex table; errors if it has not settled."""
    s = np.asarray(s, dtype=float)
    v = np.asarray(v, dtype=float)
    if s.size < 3:
        raise EnvelopeError("recession needs at least 3 samples")
    sl_last = (v[-1] - v[-2]) / (s[-1] - s[-2])
    sl_prev = (v[-2] - v[-3]) / (s[-2] - s[-3])
    if abs(sl_last - sl_prev) > tol * max(1.0, abs(sl_last)):
        raise UnresolvedRecessionError(
            f"unresolved recession: terminal slopes {sl_prev:.6g} vs {sl_last:.6g}; "
            "extend the table (larger s_max)"
        )
    return float(sl_last)


# ---------------------------------------------------------------------------
# table bundle


@dataclass(frozen=True)
class EnvelopeTable:
    """Sampled psi together with its three envelopes and (s0, theta)."""

    s: np.ndarray
    psi: np.ndarray
    psi_cvx: np.ndarray
    psi_tilde: np.ndarray
    psi_cut: np.ndarray
    s0: float | None
    theta: float

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    @property
    def s0_is_finite(self) -> bool:
        return self.s0 is not None

    def _interp(self, table: np.ndarray, q) -> np.ndarray | float:
        q = np.asarray(q, dtype=float)
        if np.any(q < 0):
            raise EnvelopeError("envelope evaluated at negative coverage")
        if np.any(q > self.s_max * (1 + 1e-12)):
            raise EnvelopeError(
                f"coverage {float(np.max(q)):.6g} beyond table range {self.s_max:.6g}"
            )
        out = np.interp(q, self.s, table)
        return out if out.ndim else float(out)

    def tilde_at(self, q):
        q = np.asarray(q, dtype=float)
        if self.s0_is_finite and np.any(q > self.s_max):
            # beyond the table the envelope is exactly theta * s once s >= s0
            out = np.where(q > self.s_max, self.theta * q, 0.0)
            inside = q <= self.s_max
            out = np.where(inside, self._interp(self.psi_tilde, np.minimum(q, self.s_max)), out)
            return out if out.ndim else float(out)
        return self._interp(self.psi_tilde, q)

    def cut_at(self, q):
        q = np.asarray(q, dtype=float)
        if np.any(q > self.s_max):
            out = 2.0 * np.asarray(self.tilde_at(0.5 * q))
            return out if out.ndim else float(out)
        return self._interp(self.psi_cut, q)

    def cvx_at(self, q):
        return self._interp(self.psi_cvx, q)


def _refine_tangency(psi, s: np.ndarray, v: np.ndarray, v_cvx: np.ndarray,
                     s0: float, theta: float) -> tuple[float, float]:
    """Sharpen (s0, theta) by minimizing psi(t)/t between the table nodes.

    Only valid where the convex envelope touches psi, so refinement is
    skipped when the discrete minimizer sits on a strict hull chord.
    """
    from scipy.optimize import minimize_scalar

    k = int(np.searchsorted(s, s0))
    if abs(v[k] - v_cvx[k]) > 1e-10 * max(1.0, abs(v[k])):
        return s0, theta
    lo = s[max(k - 1, 1)]
    hi = s[min(k + 1, s.size - 1)]
    res = minimize_scalar(lambda t: float(psi(t)) / t, bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-13})
    if res.fun < theta:
        return float(res.x), float(res.fun)
    return s0, theta


def build_envelope_table(
    psi: SurfaceDensity, s_max: float = 16.0, n: int = 65537
) -> EnvelopeTable:
    """Sample psi on [0, s_max] and assemble all envelope tables."""
    if s_max <= 0 or n < 16:
        raise EnvelopeError("need s_max > 0 and a reasonably fine grid")
    s = np.linspace(0.0, s_max, n)
    v = np.asarray(psi(s), dtype=float)
    v_cvx = convexify(s, v)
    v_tilde, s0, theta = subadditive_envelope(s, v_cvx)
    if s0 is not None:
        s0, theta = _refine_tangency(psi, s, v, v_cvx, s0, theta)
        v_tilde = np.where(s <= s0, v_cvx, theta * s)
        v_tilde = np.minimum(v_tilde, v_cvx)
    v_cut = cut_envelope(s, v_tilde)
    return EnvelopeTable(s, v, v_cvx, v_tilde, v_cut, s0, theta)
