"""Leapfrog evolution of the velocity-pressure-memory system.

Space: (Q1)^d velocity with node-lumped (diagonal) mass, discontinuous
per-cell pressure with an L2-orthogonal {1, xi, zeta} basis, per-cell
constant memory variables.  Time: second-order centered staggering with
velocity at half steps and pressure/memory at integer steps.

One step executes, in order,

1. V update from the divergence-transpose of the pressure plus sources,
2. each memory variable by its closed-form trapezoidal recurrence,
3. P update: mean component receives the memory increments, slopes do not.

The ordering is forced by the use of the memory increments inside the
pressure update.  Cells with y_l = 0 carry mechanism l trivially (the
memory value stays exactly zero), so elastic subdomains cost nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import DofLayout, Grid, MaterialField


class NumericalAbort(RuntimeError):
    """Non-finite field values detected during time stepping."""

    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


@dataclass
class DiscreteOperators:
    """Assembled diagonal masses, material arrays and divergence actions."""

    grid: Grid
    layout: DofLayout
    materials: MaterialField
    mv: np.ndarray  # lumped velocity mass (node-shaped, includes rho)

    @property
    def h(self) -> float:
        return self.grid.h

    # -- divergence projections (the action of M_p^{-1} B^T) --------------
    def div_coeffs(self, vx, vy=None):
        """Per-cell coefficients (d0, d1, d2) of div(v_h) on {1, xi, zeta}.

        div(v_h) is affine on each cell for (Q1)^d fields, so the projection
        is exact.  In 1D only d0 is nonzero.
        """
        h = self.h
        if self.grid.dim == 1:
            if self.grid.periodic:
                d0 = (np.roll(vx, -1) - vx) / h
            else:
                d0 = (vx[1:] - vx[:-1]) / h
            return d0, None, None
        d0 = (
            vx[:-1, 1:] + vx[1:, 1:] - vx[:-1, :-1] - vx[1:, :-1]
            + vy[1:, :-1] + vy[1:, 1:] - vy[:-1, :-1] - vy[:-1, 1:]
        ) / (2.0 * h)
        d1 = (vy[:-1, :-1] - vy[:-1, 1:] - vy[1:, :-1] + vy[1:, 1:]) / (2.0 * h)
        d2 = (vx[:-1, :-1] - vx[:-1, 1:] - vx[1:, :-1] + vx[1:, 1:]) / (2.0 * h)
        return d0, d1, d2

    def div_coeffs_split(self, vx, vy):
        """x- and y-parts of the divergence projections (PML splitting).

        Returns (dx0, dx_zeta, dy0, dy_xi): the x-part carries the zeta
        slope (from v_x), the y-part the xi slope (from v_y); their sums
        reproduce ``div_coeffs``.
        """
        h = self.h
        dx0 = (vx[:-1, 1:] + vx[1:, 1:] - vx[:-1, :-1] - vx[1:, :-1]) / (2.0 * h)
        dy0 = (vy[1:, :-1] + vy[1:, 1:] - vy[:-1, :-1] - vy[:-1, 1:]) / (2.0 * h)
        dx_zeta = (vx[:-1, :-1] - vx[:-1, 1:] - vx[1:, :-1] + vx[1:, 1:]) / (2.0 * h)
        dy_xi = (vy[:-1, :-1] - vy[:-1, 1:] - vy[1:, :-1] + vy[1:, 1:]) / (2.0 * h)
        return dx0, dx_zeta, dy0, dy_xi

    # -- pressure gradient action (B P) -----------------------------------
    def apply_bp(self, p0, p1=None, p2=None):
        """Node vectors of B P, the exact element integrals of q * div(w)."""
        h = self.h
        if self.grid.dim == 1:
            if self.grid.periodic:
                return np.roll(p0, 1) - p0, None
            bp = np.zeros(self.grid.n_x + 1)
            bp[1:] += p0
            bp[:-1] -= p0
            return bp, None
        half = 0.5 * h
        if p1 is None:
            p1 = 0.0
        if p2 is None:
            p2 = 0.0
        pm = p0 - p2 / 3.0  # bottom corners (zeta = -1)
        pp = p0 + p2 / 3.0  # top corners
        bpx = np.zeros((self.grid.n_y + 1, self.grid.n_x + 1))
        bpx[:-1, :-1] -= half * pm
        bpx[:-1, 1:] += half * pm
        bpx[1:, :-1] -= half * pp
        bpx[1:, 1:] += half * pp
        qm = p0 - p1 / 3.0  # left corners (xi = -1)
        qp = p0 + p1 / 3.0  # right corners
        bpy = np.zeros_like(bpx)
        bpy[:-1, :-1] -= half * qm
        bpy[:-1, 1:] -= half * qp
        bpy[1:, :-1] += half * qm
        bpy[1:, 1:] += half * qp
        return bpx, bpy


def assemble(grid: Grid, materials: MaterialField, layout: DofLayout) -> DiscreteOperators:
    """Build the lumped velocity mass and wrap the divergence actions.

    The velocity mass uses node-based (Gauss-Lobatto) quadrature, giving a
    diagonal matrix with entry sum over adjacent cells of rho*h^d/2^d.
    """
    if materials.grid != grid:
        raise ValueError("materials were rasterized on a different grid")
    if np.any(materials.rho <= 0) or np.any(materials.mu_R <= 0):
        raise ValueError("zero or negative density/modulus cells")
    h = grid.h
    rho = materials.rho
    if grid.dim == 1:
        r = rho[0]
        if grid.periodic:
            mv = 0.5 * h * (r + np.roll(r, 1))
        else:
            mv = np.zeros(grid.n_x + 1)
            mv[:-1] += 0.5 * h * r
            mv[1:] += 0.5 * h * r
    else:
        mv = np.zeros((grid.n_y + 1, grid.n_x + 1))
        q = 0.25 * h * h * rho
        mv[:-1, :-1] += q
        mv[:-1, 1:] += q
        mv[1:, :-1] += q
        mv[1:, 1:] += q
    return DiscreteOperators(grid, layout, materials, mv)


@dataclass
class SimState:
    """Leapfrog-staggered field state.

    Velocity lives at (n - 1/2)*dt after ``n`` completed steps' V updates;
    pressure and memory at n*dt.  ``vx_prev`` holds the previous velocity
    level, needed by the discrete energy.
    """

    dt: float
    n: int
    vx: np.ndarray
    vy: np.ndarray | None
    vx_prev: np.ndarray
    vy_prev: np.ndarray | None
    p0: np.ndarray
    p1: np.ndarray | None
    p2: np.ndarray | None
    H: np.ndarray  # (L, ...) cell arrays

    @property
    def t(self) -> float:
        return self.n * self.dt


def init_state(ops: DiscreteOperators, dt: float) -> SimState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = ops.grid
    L = ops.materials.L
    if g.dim == 1:
        nn = g.n_nodes
        z = lambda: np.zeros(nn)
        cz = lambda: np.zeros(g.n_x)
        p1 = cz() if ops.layout.pressure_space == "M_h1" else None
        return SimState(dt, 0, z(), None, z(), None, cz(), p1, None, np.zeros((L, g.n_x)))
    shape_n = (g.n_y + 1, g.n_x + 1)
    shape_c = (g.n_y, g.n_x)
    m_h1 = ops.layout.pressure_space == "M_h1"
    return SimState(
        dt,
        0,
        np.zeros(shape_n),
        np.zeros(shape_n),
        np.zeros(shape_n),
        np.zeros(shape_n),
        np.zeros(shape_c),
        np.zeros(shape_c) if m_h1 else None,
        np.zeros(shape_c) if m_h1 else None,
        np.zeros((L,) + shape_c),
    )


def step(state: SimState, ops: DiscreteOperators, fx=None, fy=None, fp=None,
         velocity_hook=None, injection=None) -> SimState:
    """Advance one time level (V at n+1/2, then H and P at n+1).

    fx, fy are force DOF vectors (f, w_i) evaluated at (n+1/2)*dt; fp is an
    optional per-cell rate added to the pressure mean.  ``velocity_hook``
    runs right after the velocity update (used for boundary constraints);
    ``injection`` carries total-field/scattered-field corrections.
    """
    g = ops.grid
    dt = state.dt
    mats = ops.materials
    mu = mats.mu_R[0] if g.dim == 1 else mats.mu_R

    # (1) velocity
    bpx, bpy = ops.apply_bp(state.p0, state.p1, state.p2)
    if injection is not None:
        injection.correct_bp(state.n, bpx, bpy)
    state.vx_prev = state.vx.copy()
    state.vx = state.vx + dt * (((fx if fx is not None else 0.0) - bpx) / ops.mv)
    if g.dim == 2:
        state.vy_prev = state.vy.copy()
        state.vy = state.vy + dt * (((fy if fy is not None else 0.0) - bpy) / ops.mv)
    if velocity_hook is not None:
        velocity_hook(state)
    if injection is not None:
        injection.advance(state.n)

    # (2) divergence of the new velocity
    d0, d1, d2 = ops.div_coeffs(state.vx, state.vy)
    if injection is not None:
        injection.correct_div(state.n, d0, d1, d2)

    # (3) memory variables, trapezoidal in closed form
    if mats.L:
        y = mats.y[:, 0, :] if g.dim == 1 else mats.y
        om = mats.omega[:, 0, :] if g.dim == 1 else mats.omega
        a = 0.5 * dt * om
        h_new = ((1.0 - a) * state.H + dt * mu * y * d0) / (1.0 + a)
        dh_sum = np.sum(h_new - state.H, axis=0)
        state.H = h_new
    else:
        dh_sum = 0.0

    # (4) pressure
    state.p0 = state.p0 + dh_sum + dt * mu * d0
    if fp is not None:
        state.p0 = state.p0 + dt * fp
    if state.p1 is not None and d1 is not None:
        state.p1 = state.p1 + dt * mu * d1
    if state.p2 is not None and d2 is not None:
        state.p2 = state.p2 + dt * mu * d2

    state.n += 1
    if not np.isfinite(state.p0).all():
        raise NumericalAbort(state.n, "pressure")
    return state


def cfl_max_dt(materials, h: float | None = None, dim: int | None = None) -> float:
    """Stability bound dt = 2 / (c_R * ||B|| * sqrt(1 + sum y_l)).

    ||B||^2 = 4/h^2 in 1D and 8/h^2 in 2D; heterogeneous media take the
    minimum over cells.  Accepts a MaterialField or a single Rheology with
    explicit h and dim.
    """
    if isinstance(materials, MaterialField):
        g = materials.grid
        bnorm = 2.0 / g.h if g.dim == 1 else math.sqrt(8.0) / g.h
        per_cell = 2.0 / (materials.c_R * bnorm * np.sqrt(1.0 + materials.sum_y))
        return float(np.min(per_cell))
    rheo = materials
    if h is None or dim is None:
        raise ValueError("h and dim are required with a bare Rheology")
    bnorm = 2.0 / h if dim == 1 else math.sqrt(8.0) / h
    return 2.0 / (rheo.c_R * bnorm * math.sqrt(1.0 + float(np.sum(rheo.y))))


def discrete_energy(state: SimState, ops: DiscreteOperators) -> float:
    """2*eps = (rho V+, V-) + |P1|^2/mu + |P0 - sum H|^2/mu + sum |H_l|^2/(mu y_l).

    The energy at pressure level n pairs the velocities at n - 1/2 and
    n + 1/2.  After a step the state holds V at n - 1/2 and P at n, so the
    n + 1/2 level is reconstructed by a source-free velocity update (the
    decay statement this energy supports concerns free evolution).
    Mechanisms with y_l = 0 are skipped (their memory is identically zero).
    """
    g = ops.grid
    mats = ops.materials
    cell_vol = g.h**g.dim
    dt = state.dt
    bpx, bpy = ops.apply_bp(state.p0, state.p1, state.p2)
    vx_next = state.vx - dt * bpx / ops.mv
    if g.dim == 1:
        mu = mats.mu_R[0]
        y = mats.y[:, 0, :]
        om_kin = float(np.sum(ops.mv * state.vx * vx_next))
    else:
        mu = mats.mu_R
        y = mats.y
        vy_next = state.vy - dt * bpy / ops.mv
        om_kin = float(np.sum(ops.mv * (state.vx * vx_next + state.vy * vy_next)))
    h_sum = np.sum(state.H, axis=0) if mats.L else 0.0
    e = om_kin
    e += cell_vol * float(np.sum((state.p0 - h_sum) ** 2 / mu))
    if state.p1 is not None:
        slopes = state.p1**2
        if state.p2 is not None:
            slopes = slopes + state.p2**2
        e += (cell_vol / 3.0) * float(np.sum(slopes / mu))
    for l in range(mats.L):
        mask = y[l] > 0
        if np.any(mask):
            e += cell_vol * float(np.sum(state.H[l][mask] ** 2 / (mu * y[l])[mask]))
    return 0.5 * e


def dissipation_rate(h_old: np.ndarray, h_new: np.ndarray, ops: DiscreteOperators) -> float:
    """sum_l omega_l/(mu_R y_l) * ||(H^{n+1} + H^n)/2||^2, the energy sink."""
    g = ops.grid
    mats = ops.materials
    cell_vol = g.h**g.dim
    y = mats.y[:, 0, :] if g.dim == 1 else mats.y
    om = mats.omega[:, 0, :] if g.dim == 1 else mats.omega
    mu = mats.mu_R[0] if g.dim == 1 else mats.mu_R
    total = 0.0
    for l in range(mats.L):
        mask = y[l] > 0
        if np.any(mask):
            mid = 0.5 * (h_old[l][mask] + h_new[l][mask])
            total += cell_vol * float(np.sum((om[l] / (mu * y[l]))[mask] * mid**2))
    return total


def evaluate_pressure(state: SimState, grid: Grid, x: float, y: float = 0.0) -> float:
    """Point value of the discontinuous pressure p0 + p1*xi + p2*zeta."""
    ix, iy, xi, zeta = grid.locate(x, y)
    if grid.dim == 1:
        v = state.p0[ix]
        if state.p1 is not None:
            v = v + state.p1[ix] * xi
        return float(v)
    v = state.p0[iy, ix]
    if state.p1 is not None:
        v = v + state.p1[iy, ix] * xi + state.p2[iy, ix] * zeta
    return float(v)


def evaluate_velocity(state: SimState, grid: Grid, x: float, y: float = 0.0):
    """Bilinear interpolation of the velocity at a point."""
    ix, iy, xi, zeta = grid.locate(x, y)
    wx = (xi + 1.0) / 2.0
    if grid.dim == 1:
        i2 = (ix + 1) % grid.n_nodes if grid.periodic else ix + 1
        return (float((1 - wx) * state.vx[ix] + wx * state.vx[i2]),)
    wy = (zeta + 1.0) / 2.0
    out = []
    for comp in (state.vx, state.vy):
        v = (
            (1 - wx) * (1 - wy) * comp[iy, ix]
            + wx * (1 - wy) * comp[iy, ix + 1]
            + (1 - wx) * wy * comp[iy + 1, ix]
            + wx * wy * comp[iy + 1, ix + 1]
        )
        out.append(float(v))
    return tuple(out)
