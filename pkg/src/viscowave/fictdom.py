"""Free-surface condition v.n = 0 on a polyline via a Lagrange multiplier.

The multiplier lives in the continuous piecewise-linear space on a surface
mesh independent of the grid; the coupling b(mu, w) = int_Gamma mu (w.n) ds
is assembled exactly (piecewise-quadratic integrands, 3-point Gauss per
sub-segment split at cell crossings).  The constraint is enforced by
projecting the end-of-step velocity: one small dense Schur solve per step.

Inf-sup compatibility requires the surface mesh to be coarser than the
grid (segment length >= 1.1 h); incompatible meshes are flagged with a
warning, not rejected, so convergence studies can probe the limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .grid import Grid

COMPAT_RATIO = 1.1
GAUSS3_X = (-math.sqrt(3.0 / 5.0), 0.0, math.sqrt(3.0 / 5.0))
GAUSS3_W = (5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0)


class IncompatibleSurfaceWarning(UserWarning):
    """Surface mesh finer than the inf-sup compatibility ratio allows."""


@dataclass(frozen=True)
class SurfaceMesh:
    """Ordered polyline carrying the multiplier space.

    Normals point 90 degrees clockwise from the walking direction, so a
    counterclockwise closed curve has outward normals.
    """

    points: tuple[tuple[float, float], ...]
    closed: bool = False

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("polyline needs at least 2 points")
        if self.closed and len(self.points) < 3:
            raise ValueError("closed polyline needs at least 3 points")
        for (x1, y1), (x2, y2) in self.segments():
            if math.hypot(x2 - x1, y2 - y1) == 0.0:
                raise ValueError("zero-length segment")
        if self._self_intersects():
            raise ValueError("polyline is not simple (self-intersection)")

    def segments(self):
        pts = self.points
        segs = list(zip(pts, pts[1:]))
        if self.closed:
            segs.append((pts[-1], pts[0]))
        return segs

    @property
    def n_multipliers(self) -> int:
        return len(self.points)

    @property
    def min_segment_length(self) -> float:
        return min(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in self.segments())

    def is_compatible(self, h: float, ratio: float = COMPAT_RATIO) -> bool:
        return self.min_segment_length >= ratio * h

    def normal(self, seg_index: int):
        a, b = self.segments()[seg_index]
        tx, ty = b[0] - a[0], b[1] - a[1]
        n = math.hypot(tx, ty)
        return (ty / n, -tx / n)

    def _self_intersects(self) -> bool:
        segs = self.segments()
        n = len(segs)
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (self.closed and i == 0 and j == n - 1)
                if adjacent:
                    continue
                if _segments_cross(segs[i], segs[j]):
                    return True
        return False

    @classmethod
    def from_file(cls, path, closed: bool = False) -> "SurfaceMesh":
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (x, y)")
        return cls(tuple((float(x), float(y)) for x, y in data), closed)


def _segments_cross(s1, s2) -> bool:
    (p1, p2), (p3, p4) = s1, s2

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def line_surface(p0, p1, h_s: float) -> SurfaceMesh:
    """Straight polyline from p0 to p1 with segments of length about h_s."""
    length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    n = max(1, round(length / h_s))
    t = np.linspace(0.0, 1.0, n + 1)
    pts = tuple((p0[0] + ti * (p1[0] - p0[0]), p0[1] + ti * (p1[1] - p0[1])) for ti in t)
    return SurfaceMesh(pts)


def circle_surface(center, radius: float, h_s: float) -> SurfaceMesh:
    """Closed counterclockwise polygon approximating a circle."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = max(3, round(2.0 * math.pi * radius / h_s))
    th = 2.0 * math.pi * np.arange(n) / n
    pts = tuple((center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)) for a in th)
    return SurfaceMesh(pts, closed=True)


@dataclass
class CouplingOperator:
    """Sparse velocity-to-multiplier map and its factored Schur complement."""

    surface: SurfaceMesh
    b_vx: sparse.csr_matrix  # (n_mult, n_nodes_flat)
    b_vy: sparse.csr_matrix
    schur_factor: tuple
    compatible: bool

    def apply(self, vx, vy):
        return self.b_vx @ vx.ravel() + self.b_vy @ vy.ravel()

    def project(self, state, ops):
        """Correct the freshly updated velocity so that B V = 0.

        Returns the multiplier (the pressure jump across the surface,
        scaled by 1/dt as the momentum-consistent value).
        """
        r = self.apply(state.vx, state.vy)
        lam = cho_solve(self.schur_factor, r)
        shape = state.vx.shape
        inv_m = 1.0 / ops.mv
        state.vx = state.vx - (self.b_vx.T @ lam).reshape(shape) * inv_m
        state.vy = state.vy - (self.b_vy.T @ lam).reshape(shape) * inv_m
        return lam / state.dt

    def make_hook(self, ops):
        def hook(state):
            self.project(state, ops)
        return hook

    def constraint_residual(self, state) -> float:
        """||B V|| / (||B|| ||V||), the relative constraint violation."""
        r = self.apply(state.vx, state.vy)
        bnorm = math.sqrt(sparse.linalg.norm(self.b_vx) ** 2 + sparse.linalg.norm(self.b_vy) ** 2)
        vnorm = math.sqrt(float(np.sum(state.vx**2) + np.sum(state.vy**2)))
        if bnorm == 0.0 or vnorm == 0.0:
            return 0.0
        return float(np.linalg.norm(r)) / (bnorm * vnorm)


def _crossing_params(a, b, grid: Grid):
    """Sorted parameter values in (0,1) where segment ab crosses grid lines."""
    ts = []
    for axis, o in ((0, grid.origin[0]), (1, grid.origin[1])):
        d = b[axis] - a[axis]
        if d == 0.0:
            continue
        lo, hi = sorted((a[axis], b[axis]))
        i0 = math.ceil((lo - o) / grid.h)
        i1 = math.floor((hi - o) / grid.h)
        for i in range(i0, i1 + 1):
            t = (o + i * grid.h - a[axis]) / d
            if 1e-12 < t < 1.0 - 1e-12:
                ts.append(t)
    return sorted(set(ts))


def assemble_coupling(surface: SurfaceMesh, layout, grid: Grid, pml_layout=None) -> CouplingOperator:
    """Exact coupling integrals and the factored Schur complement.

    The integrand (linear multiplier) x (bilinear velocity trace) is
    quadratic along the segment within one cell, so 3-point Gauss on each
    cell-crossing sub-segment is exact.  Segments through damped cells are
    rejected: the constraint must live in the physical region.
    """
    if grid.dim != 2:
        raise ValueError("surface coupling requires a 2D grid")
    x0, y0 = grid.origin
    x1, y1 = x0 + grid.n_x * grid.h, y0 + grid.n_y * grid.h
    for x, y in surface.points:
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            raise ValueError(f"surface point ({x}, {y}) outside the grid")
    compatible = surface.is_compatible(grid.h)
    if not compatible:
        warnings.warn(
            f"surface segments ({surface.min_segment_length:.3g}) finer than "
            f"{COMPAT_RATIO} h = {COMPAT_RATIO * grid.h:.3g}: inf-sup compatibility at risk",
            IncompatibleSurfaceWarning,
        )

    n_nodes_x = grid.n_x + 1
    rows, cols_x, vals_x, cols_y, vals_y = [], [], [], [], []
    segs = surface.segments()
    n_pts = len(surface.points)
    for si, (a, b) in enumerate(segs):
        seg_len = math.hypot(b[0] - a[0], b[1] - a[1])
        nx, ny = surface.normal(si)
        i_a = si
        i_b = (si + 1) % n_pts
        breaks = [0.0] + _crossing_params(a, b, grid) + [1.0]
        for t0, t1 in zip(breaks, breaks[1:]):
            jac = 0.5 * (t1 - t0) * seg_len
            for xg, wg in zip(GAUSS3_X, GAUSS3_W):
                t = 0.5 * ((t1 - t0) * xg + t1 + t0)
                px = a[0] + t * (b[0] - a[0])
                py = a[1] + t * (b[1] - a[1])
                ix, iy, xi, zeta = grid.locate(px, py)
                if pml_layout is not None and (
                    pml_layout.dx_cell[iy, ix] > 0 or pml_layout.dy_cell[iy, ix] > 0
                ):
                    raise ValueError("surface segment crosses an absorbing-layer cell")
                wx, wy = (xi + 1.0) / 2.0, (zeta + 1.0) / 2.0
                shp = (
                    ((1 - wx) * (1 - wy), iy * n_nodes_x + ix),
                    (wx * (1 - wy), iy * n_nodes_x + ix + 1),
                    ((1 - wx) * wy, (iy + 1) * n_nodes_x + ix),
                    (wx * wy, (iy + 1) * n_nodes_x + ix + 1),
                )
                for phi, row in (((1.0 - t), i_a), (t, i_b)):
                    w = wg * jac * phi
                    for sv, node in shp:
                        rows.append(row)
                        cols_x.append(node)
                        vals_x.append(w * sv * nx)
                        cols_y.append(node)
                        vals_y.append(w * sv * ny)

    n_flat = (grid.n_x + 1) * (grid.n_y + 1)
    b_vx = sparse.csr_matrix((vals_x, (rows, cols_x)), shape=(n_pts, n_flat))
    b_vy = sparse.csr_matrix((vals_y, (rows, cols_y)), shape=(n_pts, n_flat))
    return CouplingOperator(surface, b_vx, b_vy, None, compatible)


def factor_schur(coupling: CouplingOperator, ops) -> CouplingOperator:
    """Build and factor S = B diag(M_v)^-1 B^T (geometry is static)."""
    inv_m = sparse.diags(1.0 / ops.mv.ravel())
    s = (coupling.b_vx @ inv_m @ coupling.b_vx.T + coupling.b_vy @ inv_m @ coupling.b_vy.T).toarray()
    try:
        coupling.schur_factor = cho_factor(s)
    except LinAlgError as exc:
        raise ValueError("degenerate surface: singular Schur complement") from exc
    return coupling
