"""Tests for the continuous and discrete dispersion relations."""

import cmath
import math

import numpy as np
import pytest

from viscowave.dispersion import (
    DispersionPoint,
    continuous_omega,
    discrete_omega,
    sweep_curves,
)
from viscowave.material import Rheology
from viscowave.qfit import FitBand, fit_gmb

ELASTIC = Rheology(1.0, 1.0)
BAND3 = FitBand(2.0 * math.pi * 10**-1.5, 2.0 * math.pi * 10**1.5)


def gmb_rheology():
    rheo, _ = fit_gmb(lambda w: 1.0 / 20.0, BAND3, 3)
    return rheo


class TestContinuousOmega:
    def test_elastic_is_linear(self):
        r = Rheology(2.0, 8.0)  # c = 2
        for k in (0.3, 1.0, 5.7):
            w = continuous_omega(k, r)
            assert w == pytest.approx(2.0 * k + 0.0j, rel=1e-14)

    def test_root_satisfies_relation(self):
        # substitute the root back into rho*w^2 = mu(w)*k^2 with the
        # rational modulus evaluated here from scratch
        rheo = gmb_rheology()
        for k in (0.2, 1.0, 4.0):
            w = continuous_omega(k, rheo)
            s = 1j * w
            mu = rheo.mu_R * (1.0 + sum(y * s / (s + om) for y, om in zip(rheo.y, rheo.omega)))
            resid = rheo.rho * w * w - mu * k * k
            assert abs(resid) <= 1e-10 * abs(rheo.rho * w * w)

    def test_decay_sign(self):
        rheo = gmb_rheology()
        for k in (0.1, 1.0, 10.0):
            assert continuous_omega(k, rheo).imag > 0.0

    def test_weak_dissipation_quality_factor(self):
        # Re(w)/(2 Im(w)) tracks the target Q over the fit band, within
        # the ripple of the three-mechanism approximation
        rheo = gmb_rheology()
        for k in (2.0, 10.0):
            w = continuous_omega(k, rheo)
            assert w.real / (2.0 * w.imag) == pytest.approx(20.0, rel=0.2)

    def test_speed_between_relaxed_and_unrelaxed(self):
        rheo = gmb_rheology()
        for k in (0.05, 1.0, 20.0):
            c_phase = continuous_omega(k, rheo).real / k
            assert rheo.c_R < c_phase < rheo.c_U

    def test_nonpositive_wavenumber_rejected(self):
        with pytest.raises(ValueError):
            continuous_omega(0.0, ELASTIC)


class TestDiscreteOmega:
    def test_magic_time_step_is_exact_1d(self):
        # dt = dx/c transports exactly on a 1D grid: no dispersion at all
        dx = 0.1
        for k in (0.7, 1.3):
            w = discrete_omega(k, 0.0, ELASTIC, dx / 1.0, dx, dim=1)
            assert w == pytest.approx(1.0 * k + 0.0j, abs=1e-13)

    def test_matches_continuous_at_fine_resolution(self):
        rheo = gmb_rheology()
        w_ex = continuous_omega(1.0, rheo)
        w_d = discrete_omega(1.0, 0.0, rheo, 1e-4, 1e-3, dim=1)
        assert abs(w_d - w_ex) <= 1e-5 * abs(w_ex)

    def test_second_order_convergence(self):
        rheo = gmb_rheology()
        w_ex = continuous_omega(1.0, rheo)
        errs = []
        for dx in (0.2, 0.1, 0.05):
            dt = 0.5 * dx / rheo.c_U
            errs.append(abs(discrete_omega(1.0, 0.0, rheo, dt, dx, dim=1) - w_ex))
        order = math.log(errs[0] / errs[2]) / math.log(4.0)
        assert 1.8 <= order <= 2.2

    def test_axis_aligned_2d_matches_1d(self):
        rheo = gmb_rheology()
        dx, dt = 0.1, 0.02
        w1 = discrete_omega(1.0, 0.0, rheo, dt, dx, dim=1)
        w2 = discrete_omega(1.0, 0.0, rheo, dt, dx, dim=2)
        assert w2 == pytest.approx(w1, rel=1e-12)

    def test_grid_anisotropy(self):
        # the diagonal direction disperses less than the axis on a square
        # grid, so the two angles must give distinct frequencies
        dx, dt = 0.5, 0.2
        w0 = discrete_omega(1.0, 0.0, ELASTIC, dt, dx, dim=2)
        w45 = discrete_omega(1.0, math.pi / 4.0, ELASTIC, dt, dx, dim=2)
        assert abs(w45 - w0) > 1e-4
        assert abs(w45 - 1.0) < abs(w0 - 1.0)

    def test_nyquist_violation_rejected(self):
        with pytest.raises(ValueError):
            discrete_omega(1.0, 0.0, ELASTIC, 0.1, 2.0 * math.pi, dim=1)


class TestSweepCurves:
    def test_ratios_approach_one_with_resolution(self):
        rheo = gmb_rheology()
        pts = sweep_curves(rheo, (10, 20, 40, 80), angles=(0.0,))
        qs = [p.q for p in pts]
        ats = [p.attenuation_ratio for p in pts]
        assert abs(qs[-1] - 1.0) < 2e-3
        assert abs(ats[-1] - 1.0) < 2e-2
        # monotone improvement as the sampling is refined
        assert np.all(np.diff([abs(q - 1.0) for q in qs]) < 0.0)

    def test_point_consistency(self):
        rheo = gmb_rheology()
        pts = sweep_curves(rheo, (15,), angles=(0.0, math.pi / 4.0))
        for p in pts:
            assert p.q == pytest.approx(p.omega_discrete.real / p.omega_exact.real, rel=1e-12)
        assert pts[0].angle == 0.0
        assert pts[1].angle == pytest.approx(math.pi / 4.0)

    def test_nyquist_guard(self):
        with pytest.raises(ValueError):
            DispersionPoint(2.0, 0.0, 1 + 0j, 1 + 0j, 1.0, 1.0)
