"""Tests for operator assembly, the leapfrog step, CFL bound and the
discrete energy."""

import math
from fractions import Fraction

import numpy as np
import pytest

from viscowave.grid import Background, Grid, build_layout, rasterize_materials
from viscowave.material import Rheology
from viscowave.solver import (
    NumericalAbort,
    assemble,
    cfl_max_dt,
    discrete_energy,
    dissipation_rate,
    evaluate_pressure,
    init_state,
    step,
)

ELASTIC = Rheology(1.0, 1.0)


def make_ops(dim, n, rheo=ELASTIC, h=1.0, periodic=False):
    g = Grid(dim, n, n if dim == 2 else 1, h=h, periodic=periodic)
    mats = rasterize_materials(g, [Background(rheo)])
    return g, mats, assemble(g, mats, build_layout(g, n_mechanisms=rheo.L))


class TestAssemble:
    def test_single_cell_divergence_entry(self):
        # constant pressure against the x-bilinear basis at node (0,0):
        # the element integral of q div(w) is -h/2
        h = 0.7
        g, _, ops = make_ops(2, 1, h=h)
        bpx, bpy = ops.apply_bp(np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
        assert bpx[0, 0] == pytest.approx(-h / 2.0, rel=1e-14)
        assert bpy[0, 0] == pytest.approx(-h / 2.0, rel=1e-14)
        assert bpx[0, 1] == pytest.approx(h / 2.0, rel=1e-14)

    def test_mass_conservation(self):
        rho = 3.0
        h = 0.5
        g, _, ops = make_ops(2, 8, Rheology(rho, 1.0), h=h)
        # the lumped diagonal sums to the total mass integral of rho
        assert float(np.sum(ops.mv)) == pytest.approx(rho * (8 * h) ** 2, rel=1e-12)
        # interior nodes carry rho h^2 (four cell contributions)
        assert ops.mv[4, 4] == pytest.approx(rho * h * h, rel=1e-14)

    def test_mean_restriction_matches_m_h(self):
        # the full-basis gradient action with zero slopes equals the
        # mean-only action
        g, _, ops = make_ops(2, 5)
        rng = np.random.default_rng(3)
        p0 = rng.standard_normal((5, 5))
        ax, ay = ops.apply_bp(p0, np.zeros((5, 5)), np.zeros((5, 5)))
        bx, by = ops.apply_bp(p0, None, None)
        assert np.allclose(ax, bx, atol=1e-15)
        assert np.allclose(ay, by, atol=1e-15)

    def test_zero_density_rejected(self):
        g = Grid(2, 4, 4)
        mats = rasterize_materials(g, [Background(ELASTIC)])
        mats.rho[2, 2] = 0.0
        with pytest.raises(ValueError):
            assemble(g, mats, build_layout(g))

    def test_discrete_adjointness(self):
        # <B p, v> = sum_cells h^2 (p0 d0 + p1 d1 / 3 + p2 d2 / 3) with
        # (d0, d1, d2) the orthogonal projection coefficients of div(v)
        h = 0.3
        g, _, ops = make_ops(2, 6, h=h)
        rng = np.random.default_rng(11)
        vx = rng.standard_normal((7, 7))
        vy = rng.standard_normal((7, 7))
        p0 = rng.standard_normal((6, 6))
        p1 = rng.standard_normal((6, 6))
        p2 = rng.standard_normal((6, 6))
        bx, by = ops.apply_bp(p0, p1, p2)
        lhs = float(np.sum(vx * bx + vy * by))
        d0, d1, d2 = ops.div_coeffs(vx, vy)
        rhs = h * h * float(np.sum(p0 * d0 + p1 * d1 / 3.0 + p2 * d2 / 3.0))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestStep:
    def test_zero_state_is_fixed_point(self):
        g, _, ops = make_ops(2, 4)
        st = init_state(ops, 0.1)
        step(st, ops)
        assert np.all(st.p0 == 0.0)
        assert np.all(st.vx == 0.0)
        assert np.all(st.vy == 0.0)

    def test_elastic_matches_hand_rolled_leapfrog(self):
        # independent small-grid implementation with explicit loops
        h = 1.0
        g, _, ops = make_ops(2, 3, h=h)
        dt = 0.3
        rng = np.random.default_rng(5)
        vx = rng.standard_normal((4, 4))
        vy = rng.standard_normal((4, 4))
        p0 = rng.standard_normal((3, 3))
        p1 = rng.standard_normal((3, 3))
        p2 = rng.standard_normal((3, 3))

        st = init_state(ops, dt)
        st.vx, st.vy = vx.copy(), vy.copy()
        st.p0, st.p1, st.p2 = p0.copy(), p1.copy(), p2.copy()
        step(st, ops)

        # velocity: m_v dv/dt = -(B p); assemble B p node by node from the
        # four corner values of p restricted to each adjacent cell
        bx = np.zeros((4, 4))
        by = np.zeros((4, 4))
        for cy in range(3):
            for cx in range(3):
                pb = p0[cy, cx] - p2[cy, cx] / 3.0
                pt = p0[cy, cx] + p2[cy, cx] / 3.0
                ql = p0[cy, cx] - p1[cy, cx] / 3.0
                qr = p0[cy, cx] + p1[cy, cx] / 3.0
                bx[cy, cx] -= 0.5 * h * pb
                bx[cy, cx + 1] += 0.5 * h * pb
                bx[cy + 1, cx] -= 0.5 * h * pt
                bx[cy + 1, cx + 1] += 0.5 * h * pt
                by[cy, cx] -= 0.5 * h * ql
                by[cy, cx + 1] -= 0.5 * h * qr
                by[cy + 1, cx] += 0.5 * h * ql
                by[cy + 1, cx + 1] += 0.5 * h * qr
        mv = np.zeros((4, 4))
        for cy in range(3):
            for cx in range(3):
                for dy in (0, 1):
                    for dx in (0, 1):
                        mv[cy + dy, cx + dx] += 0.25 * h * h
        vx2 = vx - dt * bx / mv
        vy2 = vy - dt * by / mv
        assert np.allclose(st.vx, vx2, atol=1e-13)
        assert np.allclose(st.vy, vy2, atol=1e-13)

        # pressure: orthogonal projection of div(v) cell by cell
        for cy in range(3):
            for cx in range(3):
                d0 = (
                    vx2[cy, cx + 1] + vx2[cy + 1, cx + 1] - vx2[cy, cx] - vx2[cy + 1, cx]
                    + vy2[cy + 1, cx] + vy2[cy + 1, cx + 1] - vy2[cy, cx] - vy2[cy, cx + 1]
                ) / (2.0 * h)
                assert st.p0[cy, cx] == pytest.approx(p0[cy, cx] + dt * d0, rel=1e-12, abs=1e-13)

    def test_single_cell_1d_rational_recurrence(self):
        # one cell, one mechanism: replay the four-equation recurrence in
        # exact rational arithmetic and compare after several steps
        rho, mu, y1, om1 = Fraction(2), Fraction(1), Fraction(1, 10), Fraction(3, 2)
        h, dt = Fraction(1), Fraction(1, 4)
        rheo = Rheology(float(rho), float(mu), ((float(y1), float(om1)),))
        g = Grid(1, 1, h=float(h))
        mats = rasterize_materials(g, [Background(rheo)])
        ops = assemble(g, mats, build_layout(g, n_mechanisms=1))
        st = init_state(ops, float(dt))
        st.vx = np.array([0.5, -0.25])
        st.p0 = np.array([1.0])
        st.H = np.array([[0.125]])

        v = [Fraction(1, 2), Fraction(-1, 4)]
        p = Fraction(1)
        H = Fraction(1, 8)
        mv = rho * h / 2
        for _ in range(5):
            bp = [-p, p]
            v = [v[i] - dt * bp[i] / mv for i in range(2)]
            d0 = (v[1] - v[0]) / h
            a = dt * om1 / 2
            H_new = ((1 - a) * H + dt * mu * y1 * d0) / (1 + a)
            p = p + (H_new - H) + dt * mu * d0
            H = H_new
            step(st, ops)
        assert st.vx[0] == pytest.approx(float(v[0]), rel=1e-13)
        assert st.vx[1] == pytest.approx(float(v[1]), rel=1e-13)
        assert st.p0[0] == pytest.approx(float(p), rel=1e-13)
        assert st.H[0, 0] == pytest.approx(float(H), rel=1e-13)

    def test_nan_detection_aborts_with_step(self):
        g, _, ops = make_ops(1, 50)
        st = init_state(ops, 5.0)  # far beyond the stability bound
        rng = np.random.default_rng(0)
        st.p0 = rng.standard_normal(50)
        with pytest.raises(NumericalAbort):
            with np.errstate(all="ignore"):
                for _ in range(10000):
                    step(st, ops)


class TestCfl:
    def test_1d_elastic(self):
        assert cfl_max_dt(Rheology(1.0, 4.0), h=0.5, dim=1) == pytest.approx(0.25)

    def test_2d_elastic(self):
        assert cfl_max_dt(ELASTIC, h=1.0, dim=2) == pytest.approx(1.0 / math.sqrt(2.0))

    def test_unit_weight_sum_shrinks_by_sqrt2(self):
        r = Rheology(1.0, 1.0, ((0.5, 1.0), (0.5, 2.0)))
        assert cfl_max_dt(r, h=1.0, dim=2) == pytest.approx(0.5)

    def test_heterogeneous_minimum(self):
        from viscowave.grid import Circle

        g = Grid(2, 10, 10, h=1.0)
        fast = Rheology(1.0, 9.0)
        mats = rasterize_materials(g, [Background(ELASTIC), Circle(5.0, 5.0, 2.0, fast)])
        assert cfl_max_dt(mats) == pytest.approx(cfl_max_dt(fast, h=1.0, dim=2))


class TestEnergy:
    def test_zero_state(self):
        g, _, ops = make_ops(2, 4)
        assert discrete_energy(init_state(ops, 0.1), ops) == 0.0

    def test_elastic_free_evolution_conserves(self):
        g, _, ops = make_ops(2, 20)
        dt = 0.9 * cfl_max_dt(ELASTIC, h=1.0, dim=2)
        st = init_state(ops, dt)
        rng = np.random.default_rng(17)
        st.p0 = rng.standard_normal((20, 20))
        st.vx = rng.standard_normal((21, 21))
        st.vy = rng.standard_normal((21, 21))
        step(st, ops)
        e0 = discrete_energy(st, ops)
        for _ in range(200):
            step(st, ops)
        assert discrete_energy(st, ops) == pytest.approx(e0, rel=1e-12)

    def test_viscous_free_evolution_decays(self):
        rheo = Rheology(1.0, 1.0, ((0.2, 0.5), (0.2, 5.0)))
        g, _, ops = make_ops(2, 20, rheo)
        dt = 0.9 * cfl_max_dt(rheo, h=1.0, dim=2)
        st = init_state(ops, dt)
        rng = np.random.default_rng(18)
        st.p0 = rng.standard_normal((20, 20))
        st.vx = rng.standard_normal((21, 21))
        st.vy = rng.standard_normal((21, 21))
        e = discrete_energy(st, ops)
        for _ in range(300):
            step(st, ops)
            e_new = discrete_energy(st, ops)
            assert e_new <= e * (1.0 + 1e-12)
            e = e_new

    def test_per_step_energy_identity(self):
        # (e(n+1) - e(n)) / dt + dissipation = 0 to 1e-10 relative
        rheo = Rheology(1.0, 1.0, ((0.15, 0.8), (0.1, 8.0)))
        g, _, ops = make_ops(2, 16, rheo)
        dt = 0.95 * cfl_max_dt(rheo, h=1.0, dim=2)
        st = init_state(ops, dt)
        rng = np.random.default_rng(19)
        st.p0 = rng.standard_normal((16, 16))
        st.p1 = rng.standard_normal((16, 16))
        st.p2 = rng.standard_normal((16, 16))
        st.vx = rng.standard_normal((17, 17))
        st.vy = rng.standard_normal((17, 17))
        st.H = 0.1 * rng.standard_normal((2, 16, 16))
        e = discrete_energy(st, ops)
        scale = e / dt
        for _ in range(100):
            h_old = st.H.copy()
            step(st, ops)
            e_new = discrete_energy(st, ops)
            resid = (e_new - e) / dt + dissipation_rate(h_old, st.H, ops)
            assert abs(resid) <= 1e-10 * scale
            e = e_new


class TestAccuracy:
    def test_spatial_convergence_order(self):
        # periodic 1D standing wave, dt proportional to h: observed order 2
        k = 1.0
        T = 3.0
        errs = []
        hs = []
        for n in (32, 64, 128):
            h = 2.0 * math.pi / n
            g, _, ops = make_ops(1, n, h=h, periodic=True)
            dt = 0.3 * h
            n_steps = round(T / dt)
            dt = T / n_steps
            st = init_state(ops, dt)
            xc = g.cell_centers()[0].ravel()
            xn = g.node_coords()[0]
            st.p0 = np.cos(k * xc)
            # exact standing-wave velocity v = -sin(kx) sin(ckt) sampled
            # at the staggered time level -dt/2
            st.vx = np.sin(k * xn) * math.sin(k * dt / 2.0)
            for _ in range(n_steps):
                step(st, ops)
            exact = np.cos(k * xc) * math.cos(k * T)
            errs.append(float(np.linalg.norm(st.p0 - exact) / np.linalg.norm(exact)))
            hs.append(h)
        order = math.log(errs[0] / errs[-1]) / math.log(hs[0] / hs[-1])
        assert order >= 1.8

    def test_first_arrival_speed_near_unrelaxed(self):
        # two receivers, threshold crossing: differential speed within 2%
        # of c_U = sqrt(mu_U / rho); relaxation frequencies sit well below
        # the source band so the pulse travels at the unrelaxed speed
        rheo = Rheology(1.0, 1.0, ((0.2, 0.1), (0.2, 1.0)))
        from viscowave.source import Wavelet

        w = Wavelet("ricker", f0=1.0)
        h = 0.02
        g, _, ops = make_ops(1, 2000, rheo, h=h)
        dt = 0.5 * cfl_max_dt(rheo, h=h, dim=1)
        st = init_state(ops, dt)
        fp = np.zeros_like(st.p0)
        i_src = 200
        r1, r2 = 1000, 1800
        n_steps = int(35.0 / dt)
        rec = np.zeros((2, n_steps))
        for n in range(n_steps):
            fp[i_src] = w((n + 0.5) * dt) / h
            step(st, ops, fp=fp)
            rec[0, n] = st.p0[r1]
            rec[1, n] = st.p0[r2]
        thresh = 0.01 * np.max(np.abs(rec), axis=1)
        t1 = np.argmax(np.abs(rec[0]) > thresh[0]) * dt
        t2 = np.argmax(np.abs(rec[1]) > thresh[1]) * dt
        speed = (r2 - r1) * h / (t2 - t1)
        assert speed == pytest.approx(rheo.c_U, rel=0.02)


class TestEvaluate:
    def test_pressure_point_value(self):
        g, _, ops = make_ops(2, 4)
        st = init_state(ops, 0.1)
        st.p0[1, 2] = 2.0
        st.p1[1, 2] = 0.5
        st.p2[1, 2] = -0.25
        # point at xi = 0.5, zeta = -0.5 inside cell (2, 1)
        v = evaluate_pressure(st, g, 2.875, 1.375)
        assert v == pytest.approx(2.0 + 0.5 * 0.75 - 0.25 * (-0.25), rel=1e-12)
