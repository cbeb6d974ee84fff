"""Tests for the source wavelets and their discrete spectra."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from viscowave.source import (
    Wavelet,
    dominant_omega,
    omega_max,
    ricker,
    spectrum,
    two_sine,
)


class TestRicker:
    def test_peak_value(self):
        for f0 in (1.0, 2.5, 7.0):
            assert ricker(1.0 / f0, f0) == pytest.approx(-2.0 * math.pi**2 * f0**2, rel=1e-14)

    def test_compact_support(self):
        f0 = 2.5
        assert ricker(0.0, f0) == 0.0
        assert ricker(2.0 / f0 + 1e-9, f0) == 0.0
        assert ricker(-0.3, f0) == 0.0

    def test_peak_location_for_f0_2_5(self):
        f0 = 2.5
        t = np.linspace(1e-4, 2.0 / f0, 4001)
        v = ricker(t, f0)
        assert t[np.argmax(np.abs(v))] == pytest.approx(0.4, abs=1e-3)
        assert np.max(np.abs(v)) == pytest.approx(2.0 * math.pi**2 * 6.25, rel=1e-6)

    def test_symmetric_about_center(self):
        f0 = 1.5
        tc = 1.0 / f0
        dt = np.linspace(0.01, 0.5, 20)
        assert np.allclose(ricker(tc + dt, f0), ricker(tc - dt, f0), rtol=1e-12)

    def test_paper_literal_variant_is_asymmetric(self):
        f0 = 2.5
        tc = 1.0 / f0
        a = ricker(tc + 0.1, f0, paper_literal=True)
        b = ricker(tc - 0.1, f0, paper_literal=True)
        assert a != pytest.approx(b, rel=1e-6)

    def test_quadrature_matches_antiderivative(self):
        # int of -2a^2(1 - 2a^2 u^2) exp(-a^2 u^2) du = -2a^2 u exp(-a^2 u^2)
        f0 = 2.0
        a = math.pi * f0
        val, _ = quad(lambda t: ricker(t, f0), 0.0, 2.0 / f0, limit=200)
        u = 1.0 / f0  # half-width of the support around the center
        expected = (-2.0 * a**2 * u * math.exp(-(a * u) ** 2)) - (2.0 * a**2 * u * math.exp(-(a * u) ** 2))
        assert val == pytest.approx(expected, abs=1e-8)


class TestTwoSine:
    def test_zero_at_half_period(self):
        assert two_sine(0.15, 0.3) == pytest.approx(0.0, abs=1e-14)

    def test_value_at_quarter_period(self):
        assert two_sine(0.075, 0.3) == pytest.approx(1.0, rel=1e-14)

    def test_compact_support(self):
        assert two_sine(0.0, 0.3) == 0.0
        assert two_sine(0.3, 0.3) == 0.0
        assert two_sine(0.31, 0.3) == 0.0

    def test_spectrum_peak_near_one_over_T(self):
        T = 0.3
        dt = 1e-3
        n = 1 << 14
        t = np.arange(n) * dt
        s = np.fft.rfft(two_sine(t, T))
        freqs = np.fft.rfftfreq(n, dt)
        f_peak = freqs[np.argmax(np.abs(s))]
        assert f_peak == pytest.approx(1.0 / T, rel=0.15)


class TestSpectrum:
    def test_all_zero_wavelet_window(self):
        w = Wavelet("ricker", f0=100.0)  # support 0.02 s
        s = spectrum(w, 1e-3, 64)
        t = np.arange(64) * 1e-3
        assert np.allclose(s, np.fft.fft(w(t)))

    def test_parseval(self):
        w = Wavelet("ricker", f0=2.5)
        dt = 1e-3
        n = 1 << 12
        s = spectrum(w, dt, n)
        t = np.arange(n) * dt
        lhs = float(np.sum(np.abs(w(t)) ** 2)) * dt
        rhs = float(np.sum(np.abs(s) ** 2)) / (n / dt)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_frequency_axis_scaling(self):
        # the f0 = 2.5 spectrum is the f0 = 1 spectrum stretched by 2.5
        dt = 2e-4
        n = 1 << 15
        s1 = np.abs(spectrum(Wavelet("ricker", f0=1.0), dt, n))
        s2 = np.abs(spectrum(Wavelet("ricker", f0=2.5), dt, n))
        freqs = np.fft.fftfreq(n, dt)
        half = n // 2
        # r(t; f0) = f0^2 g(f0 t) for the unit shape g, so the amplitude
        # spectrum obeys |S(f; f0)| = f0 |G(f / f0)|
        resampled = np.interp(freqs[:half], freqs[:half] * 2.5, s1[:half] * 2.5)
        mask = freqs[:half] < 12.0
        err = np.linalg.norm(s2[:half][mask] - resampled[mask]) / np.linalg.norm(s2[:half][mask])
        assert err < 0.01

    def test_support_exceeding_window_rejected(self):
        w = Wavelet("two_sine", T=0.3)
        with pytest.raises(ValueError):
            spectrum(w, 1e-3, 256)

    def test_non_power_of_two_rejected(self):
        w = Wavelet("ricker", f0=2.5)
        with pytest.raises(ValueError):
            spectrum(w, 1e-3, 1000)


class TestOmegaMax:
    def test_threshold_one_is_spectral_peak(self):
        w = Wavelet("ricker", f0=2.5)
        w_dom = dominant_omega(w)
        # the Ricker amplitude spectrum peaks at f0
        assert w_dom == pytest.approx(2.0 * math.pi * 2.5, rel=0.05)

    def test_scales_linearly_with_f0(self):
        a = omega_max(Wavelet("ricker", f0=1.0))
        b = omega_max(Wavelet("ricker", f0=4.0))
        assert b == pytest.approx(4.0 * a, rel=0.02)

    def test_above_dominant_frequency(self):
        w = Wavelet("two_sine", T=0.3)
        assert omega_max(w) > dominant_omega(w)

    def test_bad_threshold_rejected(self):
        w = Wavelet("ricker", f0=2.5)
        with pytest.raises(ValueError):
            omega_max(w, threshold=0.0)
        with pytest.raises(ValueError):
            omega_max(w, threshold=1.5)


class TestWavelet:
    def test_support_lengths(self):
        assert Wavelet("ricker", f0=2.5).support == pytest.approx(0.8)
        assert Wavelet("two_sine", T=0.3).support == pytest.approx(0.3)

    def test_callable_matches_functions(self):
        t = np.linspace(0.0, 1.0, 101)
        assert np.allclose(Wavelet("ricker", f0=2.5)(t), ricker(t, 2.5))
        assert np.allclose(Wavelet("two_sine", T=0.3)(t), two_sine(t, 0.3))

    def test_from_file_round_trip(self, tmp_path):
        t = np.linspace(0.0, 0.5, 200)
        vals = np.sin(2.0 * math.pi * 4.0 * t) * (t < 0.25)
        path = tmp_path / "wavelet.txt"
        np.savetxt(path, np.column_stack([t, vals]))
        w = Wavelet.from_file(path)
        assert np.allclose(w(t), vals, atol=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            Wavelet("ricker", f0=-1.0)
        with pytest.raises(ValueError):
            Wavelet("two_sine", T=0.0)
        with pytest.raises(ValueError):
            Wavelet("sawtooth")
