"""Run orchestration: scenario -> grid, materials, sources, time loop, files.

Plane-wave excitation uses a total-field/scattered-field (TF/SF) split on
a grid-aligned rectangle: cells inside are total, outside scattered, nodes
on the rectangle belong to the total side.  Consistency corrections are
applied at every (scattered cell, total corner node) adjacency.  For
axis-aligned incidence the incident field is taken from an auxiliary 1D
discrete simulation with the same h and dt, which makes the injection
exact to round-off (the 2D scheme restricted to axis propagation is the
1D scheme); oblique angles fall back to the closed-form incident wave.

Sign convention: the momentum equation is rho dv/dt - grad p = f, so a
plane wave running in direction d has v = -(d/(rho c)) p.
"""

from __future__ import annotations

import json
import math
import os
import time as _time
from dataclasses import dataclass

import numpy as np

from . import pml as pml_mod
from . import qfit, solver
from .grid import Background, Circle, Grid, HalfPlane, Polygon, build_layout, rasterize_materials
from .material import Rheology, calibrate_to_speed
from .oracle import TraceSet, save_trace_csv
from .scenario import Scenario, ScenarioError, write_snapshot
from .source import Wavelet, dominant_omega, omega_max


def resolve_wavelet(sc: Scenario) -> Wavelet:
    s = sc.source
    if s.wavelet == "ricker":
        return Wavelet("ricker", f0=s.f0)
    if s.T is None:
        raise ScenarioError(None, "two_sine wavelet needs T")
    return Wavelet("two_sine", T=s.T)


def resolve_rheology(region, wavelet: Wavelet):
    """Region (rho, c, Q) plus fit method -> calibrated Rheology.

    Elastic regions (Q = inf or fit = none) are exact.  Otherwise the fit
    runs over the two-decade band under the source's spectral maximum and
    mu_R is rescaled so the phase speed at the calibration frequency
    (default: dominant source frequency) equals c.
    """
    if math.isinf(region.Q) or region.fit == "none":
        return Rheology(region.rho, region.rho * region.c**2), None
    band = qfit.hybrid_band(omega_max(wavelet))
    w_ref = region.omega_ref if region.omega_ref is not None else dominant_omega(wavelet)
    if region.fit == "gmb":
        rheo, report = qfit.fit_gmb(lambda w: 1.0 / region.Q, band, region.L, rho=region.rho)
    elif region.fit == "pade":
        rheo, report = qfit.fit_pade(region.Q, band, region.L, rho=region.rho)
    else:
        rheo, report = qfit.fit_tau(region.Q, qfit.log_equidistant(band, region.L),
                                    band, rho=region.rho)
    return calibrate_to_speed(rheo, region.c, w_ref), report


def _region_object(spec, rheo):
    if spec.shape == "background":
        return Background(rheo)
    if spec.shape == "circle":
        return Circle(spec.params[0], spec.params[1], spec.params[2], rheo)
    if spec.shape == "halfplane":
        return HalfPlane(spec.params[0], spec.params[1], spec.params[2], rheo)
    verts = tuple(zip(spec.params[0::2], spec.params[1::2]))
    return Polygon(verts, rheo)


# -- incident-field providers ---------------------------------------------


class AnalyticIncident:
    """Closed-form plane wave in a homogeneous elastic exterior.

    p(x, t) = A0 s(t - (x.d - phase)/c); the pressure slopes use the
    wavelet derivative so the per-cell linear projection is second order.
    """

    def __init__(self, wavelet, A0, rho, c, direction, phase, h, cell_xy, node_xy):
        self.w = wavelet
        self.A0 = A0
        self.rho = rho
        self.c = c
        self.d = direction
        self.h = h
        self.cell_proj = cell_xy[0] * direction[0] + cell_xy[1] * direction[1] - phase
        self.node_proj = node_xy[0] * direction[0] + node_xy[1] * direction[1] - phase

    def p_cells(self, t):
        tau = t - self.cell_proj / self.c
        p0 = self.A0 * self.w(tau)
        dp = -(self.h / (2.0 * self.c)) * self.A0 * self.w.derivative(tau)
        return p0, dp * self.d[0], dp * self.d[1]

    def v_nodes(self, t):
        p = self.A0 * self.w(t - self.node_proj / self.c)
        scale = -1.0 / (self.rho * self.c)
        return scale * self.d[0] * p, scale * self.d[1] * p

    def advance(self):
        pass


class DiscreteIncident:
    """Auxiliary 1D elastic simulation supplying the incident field.

    Runs along the propagation axis with the 2D h and dt; driven by its own
    analytic TF/SF correction at one interface node.  Queried positions map
    to aux indices exactly (the aux grid is aligned with the 2D grid).
    """

    def __init__(self, wavelet, A0, rho, c, axis, sign, dt, h, t_end, cell_xy, node_xy):
        self.w = wavelet
        self.A0 = A0
        self.rho = rho
        self.c = c
        self.sign = sign
        self.dt = dt
        self.h = h
        ax = 0 if axis == "x" else 1
        xi_cells = sign * cell_xy[ax]
        xi_nodes = sign * node_xy[ax]
        xi_min = float(min(xi_cells.min(), xi_nodes.min()))
        xi_max = float(max(xi_cells.max(), xi_nodes.max()))
        # interface node at the grid line at or below the first query point
        self.xi_if = math.floor(xi_min / h + 1e-9) * h
        self.origin = self.xi_if - 4.0 * h
        length = (xi_max - self.origin) + c * t_end + 8.0 * h
        self.n_cells = int(math.ceil(length / h))
        self.i_if = 4
        self.v = np.zeros(self.n_cells + 1)
        self.p = np.zeros(self.n_cells)
        self.n = 0
        self.mu = rho * c * c
        self.cell_idx = np.rint((xi_cells - self.origin) / h - 0.5).astype(int)
        self.node_idx = np.rint((xi_nodes - self.origin) / h).astype(int)
        if np.any(self.cell_idx < 0) or np.any(self.cell_idx >= self.n_cells):
            raise ValueError("aux cell mapping out of range")
        if np.any(self.node_idx < 0) or np.any(self.node_idx > self.n_cells):
            raise ValueError("aux node mapping out of range")
        # phase reference: incident equals A0*s(t) at xi = xi_if
        self.phase = self.xi_if

    def _drive_p(self, xi, t):
        return self.A0 * self.w(t - (xi - self.xi_if) / self.c)

    def p_cells(self, t):
        p0 = self.p[self.cell_idx]
        z = np.zeros_like(p0)
        return p0, z, z

    def v_nodes(self, t):
        vax = self.sign * self.v[self.node_idx]
        return (vax, np.zeros_like(vax))

    def advance(self):
        dt, h = self.dt, self.h
        t_n = self.n * dt
        bp = np.zeros(self.n_cells + 1)
        bp[1:] += self.p
        bp[:-1] -= self.p
        xc_sf = self.origin + (self.i_if - 0.5) * h
        bp[self.i_if] += self._drive_p(xc_sf, t_n)
        self.v[1:-1] += dt * (-bp[1:-1]) / (self.rho * h)
        d0 = (self.v[1:] - self.v[:-1]) / h
        v_inc = -self._drive_p(self.origin + self.i_if * h, t_n + 0.5 * dt) / (self.rho * self.c)
        d0[self.i_if - 1] -= v_inc / h
        self.p += dt * self.mu * d0
        self.n += 1


class PlaneWaveInjection:
    """TF/SF correction pairs plus the incident-field provider."""

    def __init__(self, grid, provider, pairs, dt):
        self.grid = grid
        self.provider = provider
        self.c_iy, self.c_ix, self.xi, self.zeta, self.n_iy, self.n_ix = pairs
        self.dt = dt
        h = grid.h
        cx, cy = grid.cell_centers()
        nx, ny = grid.node_coords()
        self.cell_xy = (cx[self.c_iy, self.c_ix], cy[self.c_iy, self.c_ix])
        self.node_xy = (nx[self.n_iy, self.n_ix], ny[self.n_iy, self.n_ix])

    def correct_bp(self, n, bpx, bpy):
        h = self.grid.h
        p0, p1, p2 = self.provider.p_cells(n * self.dt)
        np.add.at(bpx, (self.n_iy, self.n_ix), 0.5 * h * self.xi * (p0 + self.zeta * p2 / 3.0))
        np.add.at(bpy, (self.n_iy, self.n_ix), 0.5 * h * self.zeta * (p0 + self.xi * p1 / 3.0))

    def advance(self, n):
        self.provider.advance()

    def correct_div(self, n, d0, d1, d2):
        h = self.grid.h
        vx, vy = self.provider.v_nodes((n + 0.5) * self.dt)
        np.add.at(d0, (self.c_iy, self.c_ix), -(vx * self.xi + vy * self.zeta) / (2.0 * h))
        np.add.at(d1, (self.c_iy, self.c_ix), -vy * self.zeta * self.xi / (2.0 * h))
        np.add.at(d2, (self.c_iy, self.c_ix), -vx * self.xi * self.zeta / (2.0 * h))

    def correct_div_split(self, n, dx0, dx_zeta, dy0, dy_xi):
        h = self.grid.h
        vx, vy = self.provider.v_nodes((n + 0.5) * self.dt)
        np.add.at(dx0, (self.c_iy, self.c_ix), -vx * self.xi / (2.0 * h))
        np.add.at(dx_zeta, (self.c_iy, self.c_ix), -vx * self.xi * self.zeta / (2.0 * h))
        np.add.at(dy0, (self.c_iy, self.c_ix), -vy * self.zeta / (2.0 * h))
        np.add.at(dy_xi, (self.c_iy, self.c_ix), -vy * self.zeta * self.xi / (2.0 * h))

    @property
    def phase_point(self):
        """Point where the incident trace equals A0 * wavelet(t)."""
        return getattr(self.provider, "_phase_point", (0.0, 0.0))


def make_plane_wave_injection(grid: Grid, box, angle, wavelet, A0, rho, c, dt, t_end,
                              mode: str = "auto") -> PlaneWaveInjection:
    """Build the correction pairs for a grid-aligned TF/SF rectangle.

    mode 'discrete' (default for axis-aligned angles) drives a 1D auxiliary
    simulation; 'analytic' uses the closed-form incident wave and is the
    only choice for oblique angles.
    """
    if grid.dim != 2:
        raise ValueError("plane-wave injection requires a 2D grid")
    x0, y0 = grid.origin
    h = grid.h
    i0 = round((box[0] - x0) / h)
    j0 = round((box[1] - y0) / h)
    i1 = round((box[2] - x0) / h)
    j1 = round((box[3] - y0) / h)
    if not (1 <= i0 < i1 <= grid.n_x - 1 and 1 <= j0 < j1 <= grid.n_y - 1):
        raise ValueError("injection box must be strictly inside the grid")
    for snapped, given in ((x0 + i0 * h, box[0]), (y0 + j0 * h, box[1]),
                           (x0 + i1 * h, box[2]), (y0 + j1 * h, box[3])):
        if abs(snapped - given) > 1e-9 * max(1.0, abs(given)):
            raise ValueError(f"injection box edge {given} is not on a grid line")

    c_iy, c_ix, xis, zetas, n_iy, n_ix = [], [], [], [], [], []
    for iy in range(j0 - 1, j1 + 1):
        for ix in range(i0 - 1, i1 + 1):
            cell_tf = i0 <= ix < i1 and j0 <= iy < j1
            if cell_tf:
                continue
            for zeta in (-1, 1):
                for xi in (-1, 1):
                    nx = ix + (xi + 1) // 2
                    ny = iy + (zeta + 1) // 2
                    if i0 <= nx <= i1 and j0 <= ny <= j1:
                        c_iy.append(iy)
                        c_ix.append(ix)
                        xis.append(float(xi))
                        zetas.append(float(zeta))
                        n_iy.append(ny)
                        n_ix.append(nx)
    pairs = tuple(np.asarray(a) for a in (c_iy, c_ix, xis, zetas, n_iy, n_ix))

    cx, cy = grid.cell_centers()
    nxc, nyc = grid.node_coords()
    cell_xy = (cx[pairs[0], pairs[1]], cy[pairs[0], pairs[1]])
    node_xy = (nxc[pairs[4], pairs[5]], nyc[pairs[4], pairs[5]])

    two_over_pi = angle / (math.pi / 2.0)
    axis_aligned = abs(two_over_pi - round(two_over_pi)) < 1e-12
    if mode == "auto":
        mode = "discrete" if axis_aligned else "analytic"
    if mode == "discrete":
        if not axis_aligned:
            raise ValueError("discrete injection requires an axis-aligned angle")
        quadrant = round(two_over_pi) % 4
        axis = "x" if quadrant in (0, 2) else "y"
        sign = 1 if quadrant in (0, 1) else -1
        provider = DiscreteIncident(wavelet, A0, rho, c, axis, sign, dt, h, t_end,
                                    cell_xy, node_xy)
        if axis == "x":
            provider._phase_point = (sign * provider.phase, 0.0)
        else:
            provider._phase_point = (0.0, sign * provider.phase)
    elif mode == "analytic":
        direction = (math.cos(angle), math.sin(angle))
        # phase reference: most upstream grid line touched by the corrections
        proj = np.concatenate([cell_xy[0] * direction[0] + cell_xy[1] * direction[1],
                               node_xy[0] * direction[0] + node_xy[1] * direction[1]])
        phase = float(np.min(proj))
        provider = AnalyticIncident(wavelet, A0, rho, c, direction, phase, h, cell_xy, node_xy)
        provider._phase_point = (phase * direction[0], phase * direction[1])
    else:
        raise ValueError(f"unknown injection mode {mode!r}")
    return PlaneWaveInjection(grid, provider, pairs, dt)


# -- the run loop ----------------------------------------------------------


@dataclass
class RunSetup:
    scenario: Scenario
    grid: Grid
    materials: object
    ops: solver.DiscreteOperators
    dt: float
    n_steps: int
    wavelet: Wavelet
    fit_reports: tuple
    pml_layout: object | None
    injection: PlaneWaveInjection | None
    coupling: object | None
    receivers: tuple
    point_source: tuple | None  # (kind, index data, amplitude)


@dataclass
class RunResult:
    setup: RunSetup
    traces: TraceSet
    manifest: dict


def build(sc: Scenario) -> RunSetup:
    wavelet = resolve_wavelet(sc)
    n_x = round((sc.x_max - sc.x_min) / sc.h)
    if abs(sc.x_min + n_x * sc.h - sc.x_max) > 1e-9 * max(1.0, abs(sc.x_max)):
        raise ScenarioError(None, "domain width is not a whole number of cells")
    if sc.dim == 2:
        n_y = round((sc.y_max - sc.y_min) / sc.h)
        if abs(sc.y_min + n_y * sc.h - sc.y_max) > 1e-9 * max(1.0, abs(sc.y_max)):
            raise ScenarioError(None, "domain height is not a whole number of cells")
        grid = Grid(2, n_x, n_y, sc.h, (sc.x_min, sc.y_min))
    else:
        grid = Grid(1, n_x, 1, sc.h, (sc.x_min, 0.0))

    resolved = [resolve_rheology(r, wavelet) for r in sc.regions]
    regions = [_region_object(spec, rheo) for spec, (rheo, _) in zip(sc.regions, resolved)]
    materials = rasterize_materials(grid, regions)
    layout = build_layout(grid, "M_h1", materials.L)
    ops = solver.assemble(grid, materials, layout)

    dt_bound = solver.cfl_max_dt(materials)
    dt = sc.dt if sc.dt is not None else sc.cfl_fraction * dt_bound
    if dt > dt_bound * (1 + 1e-12):
        raise ScenarioError(None, f"dt = {dt} exceeds the stability bound {dt_bound}")
    n_steps = int(math.ceil(sc.t_end / dt))

    pml_layout = None
    if sc.pml is not None:
        if sc.dim != 2:
            raise ScenarioError(None, "absorbing layers are 2D only")
        spec = pml_mod.PmlSpec(sc.pml.delta, sc.pml.R, sc.pml.exponent, sc.pml.sides)
        pml_layout = pml_mod.layout_pml(grid, spec, materials)

    def in_physical(x, y):
        ix, iy, _, _ = grid.locate(x, y)
        if pml_layout is None:
            return True
        return pml_layout.dx_cell[iy, ix] == 0 and pml_layout.dy_cell[iy, ix] == 0

    for name, x, y in sc.receivers:
        if not (sc.x_min <= x <= sc.x_max):
            raise ScenarioError(None, f"receiver {name} outside the domain")
        if sc.dim == 2 and not (sc.y_min <= y <= sc.y_max):
            raise ScenarioError(None, f"receiver {name} outside the domain")
        if not in_physical(x, y if sc.dim == 2 else 0.0):
            raise ScenarioError(None, f"receiver {name} lies in the absorbing layer")

    injection = None
    point_source = None
    src = sc.source
    if src.kind == "plane_wave":
        bg = sc.regions[0]
        if not math.isinf(bg.Q):
            raise ScenarioError(None, "plane-wave exterior must be elastic (Q = inf)")
        inj_box = src.box
        # exterior homogeneity around the rectangle
        bg_rheo = resolved[0][0]
        injection = make_plane_wave_injection(grid, inj_box, src.angle, wavelet,
                                              src.amplitude, bg.rho, bg.c, dt, sc.t_end)
        for iy, ix in zip(injection.c_iy, injection.c_ix):
            if materials.cell_region[iy, ix] != 0:
                raise ScenarioError(None, "injection box touches a heterogeneity of the exterior")
            if pml_layout is not None and (
                pml_layout.dx_cell[iy, ix] > 0 or pml_layout.dy_cell[iy, ix] > 0
            ):
                raise ScenarioError(None, "injection box reaches into the absorbing layer")
    else:
        if not in_physical(src.x, src.y if sc.dim == 2 else 0.0):
            raise ScenarioError(None, "point source lies in the absorbing layer")
        ix, iy, xi, zeta = grid.locate(src.x, src.y if sc.dim == 2 else 0.0)
        if src.mode == "pressure":
            point_source = ("pressure", (ix, iy), src.amplitude / sc.h**sc.dim)
        else:
            wx, wy = (xi + 1.0) / 2.0, (zeta + 1.0) / 2.0
            if src.spread == "nearest":
                jx = ix + (1 if wx >= 0.5 else 0)
                jy = iy + (1 if wy >= 0.5 else 0)
                nodes = (((jy, jx), 1.0),)
            else:
                nodes = (((iy, ix), (1 - wx) * (1 - wy)), ((iy, ix + 1), wx * (1 - wy)),
                         ((iy + 1, ix), (1 - wx) * wy), ((iy + 1, ix + 1), wx * wy))
                if sc.dim == 1:
                    nodes = (((0, ix), 1 - wx), ((0, ix + 1), wx))
            point_source = ("force", nodes, (src.fx * src.amplitude, src.fy * src.amplitude))

    coupling = None
    if sc.surface is not None:
        from . import fictdom

        u = sc.surface
        h_s = u.h_s if u.h_s is not None else 1.3 * sc.h
        if u.kind == "line":
            mesh = fictdom.line_surface(u.params[0:2], u.params[2:4], h_s)
        elif u.kind == "circle":
            mesh = fictdom.circle_surface(u.params[0:2], u.params[2], h_s)
        else:
            mesh = fictdom.SurfaceMesh.from_file(u.path)
        coupling = fictdom.assemble_coupling(mesh, layout, grid, pml_layout)
        fictdom.factor_schur(coupling, ops)

    return RunSetup(sc, grid, materials, ops, dt, n_steps, wavelet,
                    tuple(rep for _, rep in resolved), pml_layout, injection, coupling,
                    tuple(sc.receivers), point_source)


def run(sc: Scenario, output_dir=None) -> RunResult:
    setup = build(sc)
    grid, ops, dt = setup.grid, setup.ops, setup.dt
    state = solver.init_state(ops, dt)
    pml_state = pml_mod.init_pml_state(ops) if setup.pml_layout is not None else None
    hook = setup.coupling.make_hook(ops) if setup.coupling is not None else None

    rec_cells = []
    for name, x, y in setup.receivers:
        rec_cells.append(grid.locate(x, y if sc.dim == 2 else 0.0))
    n_rec = len(setup.receivers)
    data = np.zeros((n_rec, setup.n_steps + 1))

    out_dir = output_dir if output_dir is not None else sc.output_dir
    os.makedirs(out_dir, exist_ok=True)
    t0 = _time.perf_counter()

    fx = fy = None
    if setup.point_source is not None and setup.point_source[0] == "force":
        fx = np.zeros_like(state.vx)
        fy = np.zeros_like(state.vy) if sc.dim == 2 else None
    fp = None
    if setup.point_source is not None and setup.point_source[0] == "pressure":
        fp = np.zeros_like(state.p0)

    def record(n):
        for ri, (ix, iy, xi, zeta) in enumerate(rec_cells):
            if sc.dim == 1:
                v = state.p0[ix] + (state.p1[ix] * xi if state.p1 is not None else 0.0)
            else:
                v = state.p0[iy, ix] + state.p1[iy, ix] * xi + state.p2[iy, ix] * zeta
            data[ri, n] = v

    record(0)
    snap_paths = []
    for n in range(setup.n_steps):
        if setup.point_source is not None:
            kind, where, amp = setup.point_source
            s_val = setup.wavelet((n + 0.5) * dt)
            if kind == "pressure":
                fp.flat[...] = 0.0
                ix, iy = where
                if sc.dim == 1:
                    fp[ix] = amp * s_val
                else:
                    fp[iy, ix] = amp * s_val
            else:
                fx.flat[...] = 0.0
                if fy is not None:
                    fy.flat[...] = 0.0
                for (jy, jx), wgt in where:
                    if sc.dim == 1:
                        fx[jx] += amp[0] * wgt * s_val
                    else:
                        fx[jy, jx] += amp[0] * wgt * s_val
                        fy[jy, jx] += amp[1] * wgt * s_val
        if pml_state is not None:
            pml_mod.pml_step(state, pml_state, ops, setup.pml_layout, fx, fy, fp,
                             velocity_hook=hook, injection=setup.injection)
        else:
            solver.step(state, ops, fx, fy, fp, velocity_hook=hook, injection=setup.injection)
        record(state.n)
        if sc.snapshot_every and state.n % sc.snapshot_every == 0:
            path = os.path.join(out_dir, f"{sc.prefix}_{state.n:06d}.snap")
            write_snapshot(path, sc.dim, sc.h, state.t, state.p0)
            snap_paths.append(path)

    wall = _time.perf_counter() - t0
    traces = TraceSet(tuple((x, y) for _, x, y in setup.receivers), dt, data, "simulated")
    trace_paths = []
    for ri, (name, _, _) in enumerate(setup.receivers):
        path = os.path.join(out_dir, f"{sc.prefix}_{name}.csv")
        save_trace_csv(traces, ri, path)
        trace_paths.append(path)

    manifest = {
        "dt": dt,
        "n_steps": setup.n_steps,
        "cfl_bound": solver.cfl_max_dt(setup.materials),
        "wall_time_s": wall,
        "traces": trace_paths,
        "snapshots": snap_paths,
        "fits": [
            None if rep is None else {
                "method": rep.method, "L": rep.L,
                "band": [rep.band.omega1, rep.band.omega2],
                "max_rel_error": rep.max_rel_error,
                "rms_rel_error": rep.rms_rel_error,
                "negative_weights": rep.negative_weights,
            }
            for rep in setup.fit_reports
        ],
    }
    with open(os.path.join(out_dir, f"{sc.prefix}_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return RunResult(setup, traces, manifest)
