"""Tests for the absorbing-layer damping profiles, layout and split step."""

import math

import numpy as np
import pytest

from viscowave.grid import Background, Grid, build_layout, rasterize_materials
from viscowave.material import Rheology
from viscowave.pml import (
    ALL_SIDES,
    PmlSpec,
    damping_profile,
    init_pml_state,
    layout_pml,
    pml_step,
)
from viscowave.solver import assemble, cfl_max_dt, init_state, step

ELASTIC = Rheology(1.0, 1.0)


def make_ops(n, rheo=ELASTIC, h=1.0):
    g = Grid(2, n, n, h=h)
    mats = rasterize_materials(g, [Background(rheo)])
    return g, mats, assemble(g, mats, build_layout(g, n_mechanisms=rheo.L))


class TestDampingProfile:
    def test_zero_at_interface(self):
        spec = PmlSpec()
        assert damping_profile(0.0, spec, 1.0, 30.0) == 0.0
        assert damping_profile(-5.0, spec, 1.0, 30.0) == 0.0

    def test_endpoint_value(self):
        # d(delta) = log(1/R) * (n+1) * c / (2 delta)
        spec = PmlSpec(delta=30, R=5e-7, exponent=4)
        c, delta = 3.0, 30.0
        expected = math.log(1.0 / 5e-7) * 5 * c / (2.0 * delta)
        assert damping_profile(delta, spec, c, delta) == pytest.approx(expected, rel=1e-13)

    def test_polynomial_growth(self):
        spec = PmlSpec(exponent=4)
        d1 = damping_profile(10.0, spec, 1.0, 30.0)
        d2 = damping_profile(20.0, spec, 1.0, 30.0)
        assert d2 == pytest.approx(16.0 * d1, rel=1e-12)

    def test_depth_beyond_layer_rejected(self):
        with pytest.raises(ValueError):
            damping_profile(31.0, PmlSpec(), 1.0, 30.0)


class TestLayout:
    def test_no_sides_gives_no_damping(self):
        g, mats, _ = make_ops(100)
        lay = layout_pml(g, PmlSpec(delta=30, sides=()), mats)
        counts = lay.counts()
        assert counts["interior"] == 100 * 100
        assert counts["x_layer"] == counts["y_layer"] == counts["corner"] == 0

    def test_all_sides_counts(self):
        g, mats, _ = make_ops(200)
        lay = layout_pml(g, PmlSpec(delta=30), mats)
        counts = lay.counts()
        assert counts["interior"] == 140 * 140
        assert counts["corner"] == 4 * 30 * 30
        assert counts["x_layer"] == 2 * 30 * 140
        assert counts["y_layer"] == 2 * 30 * 140

    def test_layer_too_wide_rejected(self):
        g, mats, _ = make_ops(80)
        with pytest.raises(ValueError):
            layout_pml(g, PmlSpec(delta=30), mats)

    def test_corner_symmetry(self):
        # the x and y damping arrays swap under the diagonal reflection
        g, mats, _ = make_ops(120)
        lay = layout_pml(g, PmlSpec(delta=20), mats)
        assert np.allclose(lay.dx_cell, lay.dy_cell.T)
        assert np.allclose(lay.dx_node, lay.dy_node.T)

    def test_profile_scales_with_material_speed(self):
        g = Grid(2, 120, 120, h=1.0)
        fast = Rheology(1.0, 9.0)  # c_R = 3
        mats = rasterize_materials(g, [Background(fast)])
        lay_fast = layout_pml(g, PmlSpec(delta=20), mats)
        _, mats1, _ = make_ops(120)
        lay_unit = layout_pml(g, PmlSpec(delta=20), mats1)
        assert np.allclose(lay_fast.dx_cell, 3.0 * lay_unit.dx_cell, rtol=1e-12)


class TestSplitStep:
    def test_zero_state_fixed_point(self):
        g, mats, ops = make_ops(90)
        lay = layout_pml(g, PmlSpec(delta=30), mats)
        st = init_state(ops, 0.3)
        ps = init_pml_state(ops)
        pml_step(st, ps, ops, lay)
        assert np.all(st.p0 == 0.0)
        assert np.all(ps.px0 == 0.0)

    def test_zero_damping_matches_plain_step(self):
        # with every side switched off the split update must reproduce the
        # unsplit scheme once the split state is seeded from the totals
        rheo = Rheology(1.0, 1.0, ((0.15, 0.8), (0.1, 8.0)))
        g, mats, ops = make_ops(60, rheo)
        dt = 0.9 * cfl_max_dt(mats)
        lay = layout_pml(g, PmlSpec(delta=10, sides=()), mats)
        rng = np.random.default_rng(7)
        p0 = rng.standard_normal((60, 60))
        p1 = rng.standard_normal((60, 60))
        p2 = rng.standard_normal((60, 60))
        vx = rng.standard_normal((61, 61))
        vy = rng.standard_normal((61, 61))
        H = 0.1 * rng.standard_normal((2, 60, 60))

        ref = init_state(ops, dt)
        ref.p0, ref.p1, ref.p2 = p0.copy(), p1.copy(), p2.copy()
        ref.vx, ref.vy, ref.H = vx.copy(), vy.copy(), H.copy()

        st = init_state(ops, dt)
        st.p0, st.p1, st.p2 = p0.copy(), p1.copy(), p2.copy()
        st.vx, st.vy, st.H = vx.copy(), vy.copy(), H.copy()
        ps = init_pml_state(ops)
        ps.px0[:] = p0
        ps.p_xi[:] = p1
        ps.p_zeta[:] = p2
        ps.hx[:] = H

        for _ in range(50):
            step(ref, ops)
            pml_step(st, ps, ops, lay)
        assert np.max(np.abs(st.p0 - ref.p0)) <= 1e-12
        assert np.max(np.abs(st.vx - ref.vx)) <= 1e-12
        assert np.max(np.abs(st.H - ref.H)) <= 1e-12

    def test_split_parts_sum_to_total(self):
        g, mats, ops = make_ops(90)
        lay = layout_pml(g, PmlSpec(delta=20), mats)
        dt = 0.4 * cfl_max_dt(mats)
        st = init_state(ops, dt)
        ps = init_pml_state(ops)
        fp = np.zeros((90, 90))
        from viscowave.source import Wavelet

        w = Wavelet("ricker", f0=0.05)
        for n in range(60):
            fp[45, 45] = w((n + 0.5) * dt)
            pml_step(st, ps, ops, lay, fp=fp)
        assert np.allclose(st.p0, ps.px0 + ps.py0, atol=1e-12)

    def test_energy_decays_inside_layer(self):
        # a pulse launched toward the boundary loses nearly all energy
        g, mats, ops = make_ops(120)
        lay = layout_pml(g, PmlSpec(delta=30), mats)
        dt = 0.45 * cfl_max_dt(mats)
        st = init_state(ops, dt)
        ps = init_pml_state(ops)
        fp = np.zeros((120, 120))
        from viscowave.source import Wavelet

        w = Wavelet("ricker", f0=0.05)
        peak = 0.0
        for n in range(int(260.0 / dt)):
            fp[60, 60] = w((n + 0.5) * dt)
            pml_step(st, ps, ops, lay, fp=fp)
            peak = max(peak, float(np.max(np.abs(st.p0[30:90, 30:90]))))
        late = float(np.max(np.abs(st.p0[30:90, 30:90])))
        assert late <= 1e-3 * peak
