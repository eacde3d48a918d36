"""Uniform strip grids, node-centered fields, difference operators, quadrature.

The strip Q = (a,b) x (y_min, y_max) is discretized with nx x ny cells and
node-centered fields of shape (nx+1, ny+1). Quadrature is the cell-corner
average rule (equivalent to the tensor trapezoid rule); region-restricted
integrals mask whole cells by their center, so the "upper" region y > 0 and
axis-aligned rectangles are unions of cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class StripGrid:
    """Uniform tensor grid on (a,b) x (y_min, y_max) with nx x ny cells."""

    a: float
    b: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.b > self.a and self.y_max > self.y_min):
            raise GridError("degenerate strip extents")
        if self.nx < 8 or self.ny < 8:
            raise GridError("grid must have at least 8 cells per direction")

    @property
    def hx(self) -> float:
        return (self.b - self.a) / self.nx

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.nx + 1)

    @cached_property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny + 1)

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape).copy()

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.y[None, :], self.shape).copy()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def sample(self, f) -> np.ndarray:
        """Sample a callable f(x, y) at the nodes."""
        return np.asarray(f(self.X, self.Y), dtype=float)


def _check_field(grid: StripGrid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[:2] != grid.shape:
        raise GridError(f"field shape {f.shape} does not match grid {grid.shape}")
    return f


# ---------------------------------------------------------------------------
# difference operators


def _diff_matrix_1d(n_nodes: int, h: float, periodic: bool) -> sp.csr_matrix:
    """Forward differences (value at node i samples the cell midpoint i+1/2).

    Forward differencing leaves only constants in the null space, which rules
    out the checkerboard modes central differences admit in energy
    minimization, and node sums of squared forward differences are midpoint
    quadrature, hence second-order for integrals. The last row is one-sided
    backward (free edge) or wraps to node 1 (periodic, nodes 0 and n-1 being
    the same physical point).
    """
    n = n_nodes
    d = sp.lil_matrix((n, n))
    for i in range(n - 1):
        d[i, i] = -1.0 / h
        d[i, i + 1] = 1.0 / h
    if periodic:
        d[n - 1, n - 1] = -1.0 / h
        d[n - 1, 1] = 1.0 / h
    else:
        d[n - 1, n - 2] = -1.0 / h
        d[n - 1, n - 1] = 1.0 / h
    return d.tocsr()


@lru_cache(maxsize=64)
def diff_matrices(grid: StripGrid, periodic_x: bool = False) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse d/dx and d/dy acting on C-order flattened node fields."""
    dx1 = _diff_matrix_1d(grid.nx + 1, grid.hx, periodic_x)
    dy1 = _diff_matrix_1d(grid.ny + 1, grid.hy, False)
    ix = sp.identity(grid.nx + 1, format="csr")
    iy = sp.identity(grid.ny + 1, format="csr")
    dx = sp.kron(dx1, iy, format="csr")
    dy = sp.kron(ix, dy1, format="csr")
    return dx, dy


def gradient(grid: StripGrid, f: np.ndarray, periodic_x: bool = False) -> np.ndarray:
    """Forward-difference gradient, shape (nx+1, ny+1, 2); exact for affine fields."""
    f = _check_field(grid, f)
    dx, dy = diff_matrices(grid, periodic_x)
    flat = f.ravel()
    out = np.empty(grid.shape + (2,))
    out[..., 0] = (dx @ flat).reshape(grid.shape)
    out[..., 1] = (dy @ flat).reshape(grid.shape)
    return out


def sym_gradient(grid: StripGrid, v: np.ndarray, periodic_x: bool = False) -> np.ndarray:
    """Symmetrized gradient E(v) of a displacement field v (..., 2)."""
    v = np.asarray(v, dtype=float)
    if v.shape != grid.shape + (2,):
        raise GridError(f"displacement shape {v.shape} != {grid.shape + (2,)}")
    gx = gradient(grid, v[..., 0], periodic_x)
    gy = gradient(grid, v[..., 1], periodic_x)
    e = np.empty(grid.shape + (2, 2))
    e[..., 0, 0] = gx[..., 0]
    e[..., 1, 1] = gy[..., 1]
    e[..., 0, 1] = 0.5 * (gx[..., 1] + gy[..., 0])
    e[..., 1, 0] = e[..., 0, 1]
    return e


# ---------------------------------------------------------------------------
# quadrature


def _axis_weights(coords: np.ndarray, h: float, cell_mask: np.ndarray) -> np.ndarray:
    """Node weights of the 1-D trapezoid rule restricted to masked cells."""
    n = coords.size
    w = np.zeros(n)
    m = cell_mask.astype(float)
    w[:-1] += 0.5 * h * m
    w[1:] += 0.5 * h * m
    return w


@lru_cache(maxsize=256)
def _node_weights(grid: StripGrid, region: tuple | None) -> np.ndarray:
    xc = 0.5 * (grid.x[:-1] + grid.x[1:])
    yc = 0.5 * (grid.y[:-1] + grid.y[1:])
    if region is None:
        mx = np.ones(grid.nx, dtype=bool)
        my = np.ones(grid.ny, dtype=bool)
    elif region == ("upper",):
        mx = np.ones(grid.nx, dtype=bool)
        my = yc > 0.0
    elif region == ("lower",):
        mx = np.ones(grid.nx, dtype=bool)
        my = yc < 0.0
    else:
        x0, y0, x1, y1 = region
        mx = (xc > x0) & (xc < x1)
        my = (yc > y0) & (yc < y1)
    wx = _axis_weights(grid.x, grid.hx, mx)
    wy = _axis_weights(grid.y, grid.hy, my)
    return np.outer(wx, wy)


def node_weights(grid: StripGrid, region=None) -> np.ndarray:
    """Quadrature weights per node for the masked cell-corner-average rule.

    region: None (whole strip), "upper" (cells with center y > 0), "lower",
    or an axis-aligned rectangle (x0, y0, x1, y1) masked by cell centers.
    """
    if region is None:
        key = None
    elif isinstance(region, str):
        key = (region,)
    else:
        key = tuple(float(v) for v in region)
    return _node_weights(grid, key)


def integrate(grid: StripGrid, f: np.ndarray, region=None) -> float:
    """Integral of a node field over the strip or a masked region.

    Exact for bilinear integrands on regions resolved by whole cells.
    """
    f = _check_field(grid, f)
    return float(np.sum(node_weights(grid, region) * f))


def integrate_upper(grid: StripGrid, f: np.ndarray) -> float:
    return integrate(grid, f, region="upper")
