"""Regular-mesh geometry, DOF layout for the mixed spaces, material fields.

Velocity lives in the vector bilinear space (Q1)^d with DOFs at the grid
nodes; pressure in the discontinuous per-cell space M_h (means) or M_h1
(means plus slopes, with an L2-orthogonal {1, xi, zeta} basis per cell);
memory variables always in M_h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .material import Rheology

MAX_DOF_COUNT = 2**31 - 1


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of segments (1D) or squares (2D) of size h."""

    dim: int
    n_x: int
    n_y: int = 1
    h: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    periodic: bool = False  # 1D only, used by dispersion measurements

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("cell counts must be >= 1")
        if self.dim == 1 and self.n_y != 1:
            raise ValueError("1D grids have n_y = 1")
        if self.periodic and self.dim != 1:
            raise ValueError("periodic topology is only supported in 1D")

    @property
    def n_cells(self) -> int:
        return self.n_x * self.n_y

    @property
    def n_nodes(self) -> int:
        if self.dim == 1:
            return self.n_x if self.periodic else self.n_x + 1
        return (self.n_x + 1) * (self.n_y + 1)

    @property
    def extent(self) -> tuple[float, float]:
        return (self.n_x * self.h, self.n_y * self.h if self.dim == 2 else 0.0)

    def node_coords(self):
        """Node coordinates as (x,) in 1D or (X, Y) meshgrids in 2D."""
        x = self.origin[0] + self.h * np.arange(self.n_x + (0 if self.periodic else 1))
        if self.dim == 1:
            return (x,)
        y = self.origin[1] + self.h * np.arange(self.n_y + 1)
        return np.meshgrid(x, y, indexing="xy")

    def cell_centers(self):
        """Cell-center coordinates, shaped (n_y, n_x) in 2D, (1, n_x) in 1D."""
        x = self.origin[0] + self.h * (np.arange(self.n_x) + 0.5)
        y = self.origin[1] + self.h * ((np.arange(self.n_y) + 0.5) if self.dim == 2 else np.array([0.0]))
        return np.meshgrid(x, y, indexing="xy")

    def locate(self, x: float, y: float = 0.0):
        """Cell indices (ix, iy) and local coordinates (xi, zeta) in [-1, 1]."""
        ix = int(min(max(math.floor((x - self.origin[0]) / self.h), 0), self.n_x - 1))
        iy = 0
        if self.dim == 2:
            iy = int(min(max(math.floor((y - self.origin[1]) / self.h), 0), self.n_y - 1))
        xc = self.origin[0] + (ix + 0.5) * self.h
        yc = self.origin[1] + (iy + 0.5) * self.h
        xi = 2.0 * (x - xc) / self.h
        zeta = 2.0 * (y - yc) / self.h if self.dim == 2 else 0.0
        return ix, iy, xi, zeta


@dataclass(frozen=True)
class DofLayout:
    """Deterministic row-major DOF numbering for the mixed spaces."""

    grid: Grid
    pressure_space: str  # "M_h" | "M_h1"
    n_mechanisms: int = 0

    def __post_init__(self):
        if self.pressure_space not in ("M_h", "M_h1"):
            raise ValueError(f"unknown pressure space {self.pressure_space!r}")
        if max(self.n_velocity, self.n_pressure) > MAX_DOF_COUNT:
            raise ValueError("DOF index space overflow")

    @property
    def pressure_components(self) -> int:
        if self.pressure_space == "M_h":
            return 1
        return 2 if self.grid.dim == 1 else 3

    @property
    def n_velocity(self) -> int:
        return self.grid.dim * self.grid.n_nodes

    @property
    def n_pressure(self) -> int:
        return self.grid.n_cells * self.pressure_components

    @property
    def n_memory(self) -> int:
        """Memory DOFs per mechanism (always on M_h)."""
        return self.grid.n_cells

    # -- index maps (row-major, x fastest) --------------------------------
    def node_index(self, ix: int, iy: int = 0) -> int:
        nx = self.grid.n_x + (0 if self.grid.periodic else 1)
        return iy * nx + ix

    def cell_index(self, ix: int, iy: int = 0) -> int:
        return iy * self.grid.n_x + ix

    def velocity_dof(self, node: int, component: int) -> int:
        return node * self.grid.dim + component

    def velocity_dof_inverse(self, dof: int) -> tuple[int, int]:
        return divmod(dof, self.grid.dim)

    def pressure_dof(self, cell: int, component: int = 0) -> int:
        return cell * self.pressure_components + component

    def pressure_dof_inverse(self, dof: int) -> tuple[int, int]:
        return divmod(dof, self.pressure_components)


def build_layout(grid: Grid, pressure_space: str = "M_h1", n_mechanisms: int = 0) -> DofLayout:
    return DofLayout(grid, pressure_space, n_mechanisms)


# -- material regions ------------------------------------------------------


@dataclass(frozen=True)
class Background:
    rheology: Rheology

    def contains(self, x, y):
        return np.ones(np.broadcast(x, y).shape, dtype=bool)


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float
    rheology: Rheology

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def contains(self, x, y):
        return (np.asarray(x) - self.cx) ** 2 + (np.asarray(y) - self.cy) ** 2 <= self.radius**2


@dataclass(frozen=True)
class HalfPlane:
    """Region a*x + b*y <= c."""

    a: float
    b: float
    c: float
    rheology: Rheology

    def contains(self, x, y):
        return self.a * np.asarray(x) + self.b * np.asarray(y) <= self.c


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]
    rheology: Rheology

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        verts = self.vertices
        n = len(verts)
        for i in range(n):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % n]
            crosses = (y1 <= y) != (y2 <= y)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < x_int)
        return inside


@dataclass(frozen=True)
class MaterialField:
    """Per-cell rheology, padded to a common mechanism count.

    Mechanisms missing in a cell are padded with zero weight (and skipped by
    the solver); cell values are sampled at cell centers, later regions win.
    """

    grid: Grid
    rheologies: tuple[Rheology, ...]
    cell_region: np.ndarray  # (n_y, n_x) int
    rho: np.ndarray  # (n_y, n_x)
    mu_R: np.ndarray  # (n_y, n_x)
    y: np.ndarray  # (L_max, n_y, n_x)
    omega: np.ndarray  # (L_max, n_y, n_x)

    @property
    def L(self) -> int:
        return self.y.shape[0]

    @property
    def c_R(self) -> np.ndarray:
        return np.sqrt(self.mu_R / self.rho)

    @property
    def sum_y(self) -> np.ndarray:
        return np.sum(self.y, axis=0) if self.L else np.zeros_like(self.mu_R)

    def rheology_at(self, ix: int, iy: int = 0) -> Rheology:
        return self.rheologies[int(self.cell_region[iy, ix])]


def rasterize_materials(grid: Grid, regions) -> MaterialField:
    """Assign one rheology per cell by cell-center membership.

    Regions are tested in declaration order and later declarations win at
    overlaps.  Every cell must be covered (include a Background).
    """
    regions = tuple(regions)
    if not regions:
        raise ValueError("at least one region (a Background) is required")
    cx, cy = grid.cell_centers()
    region_id = np.full((grid.n_y, grid.n_x), -1, dtype=int)
    for k, region in enumerate(regions):
        region_id[region.contains(cx, cy)] = k
    if np.any(region_id < 0):
        raise ValueError("cells without material: no region covers them (missing Background?)")

    rheos = tuple(r.rheology for r in regions)
    l_max = max((r.L for r in rheos), default=0)
    rho = np.empty((grid.n_y, grid.n_x))
    mu_r = np.empty_like(rho)
    y = np.zeros((l_max, grid.n_y, grid.n_x))
    omega = np.ones((l_max, grid.n_y, grid.n_x))
    for k, r in enumerate(rheos):
        mask = region_id == k
        rho[mask] = r.rho
        mu_r[mask] = r.mu_R
        for l, (y_l, w_l) in enumerate(r.mechanisms):
            y[l][mask] = y_l
            omega[l][mask] = w_l
    return MaterialField(grid, rheos, region_id, rho, mu_r, y, omega)
