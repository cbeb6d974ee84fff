"""Source wavelets and their discrete spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def ricker(t, f0: float, paper_literal: bool = False):
    """Ricker wavelet with dominant frequency f0, supported on (0, 2/f0].

    -2*a^2*(1 - 2*a^2*(t - 1/f0)^2) * exp(-a^2*(t - 1/f0)^2), a = pi*f0.
    ``paper_literal=True`` drops the square on the time offset inside the
    exponential (a known-asymmetric variant kept for reproducibility).
    """
    if f0 <= 0:
        raise ValueError("f0 must be positive")
    t = np.asarray(t, dtype=float)
    a2 = (math.pi * f0) ** 2
    s = t - 1.0 / f0
    if paper_literal:
        env = np.exp(-a2 * s)
    else:
        env = np.exp(-a2 * s**2)
    out = -2.0 * a2 * (1.0 - 2.0 * a2 * s**2) * env
    out = np.where((t > 0.0) & (t <= 2.0 / f0), out, 0.0)
    return out if out.ndim else float(out)


def ricker_derivative(t, f0: float):
    """Time derivative of the (symmetric) Ricker wavelet."""
    if f0 <= 0:
        raise ValueError("f0 must be positive")
    t = np.asarray(t, dtype=float)
    a2 = (math.pi * f0) ** 2
    s = t - 1.0 / f0
    out = (-2.0 * a2) * (-4.0 * a2 * s - 2.0 * a2 * s * (1.0 - 2.0 * a2 * s**2)) * np.exp(-a2 * s**2)
    out = np.where((t > 0.0) & (t <= 2.0 / f0), out, 0.0)
    return out if out.ndim else float(out)


def two_sine(t, T: float):
    """sin(2*pi*t/T) - 0.5*sin(4*pi*t/T) on (0, T), zero elsewhere."""
    if T <= 0:
        raise ValueError("T must be positive")
    t = np.asarray(t, dtype=float)
    out = np.sin(2.0 * math.pi * t / T) - 0.5 * np.sin(4.0 * math.pi * t / T)
    out = np.where((t > 0.0) & (t < T), out, 0.0)
    return out if out.ndim else float(out)


def two_sine_derivative(t, T: float):
    t = np.asarray(t, dtype=float)
    w = 2.0 * math.pi / T
    out = w * np.cos(w * t) - w * np.cos(2.0 * w * t)
    out = np.where((t > 0.0) & (t < T), out, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Wavelet:
    """A source time function: analytic ricker/two_sine or sampled data."""

    kind: str  # "ricker" | "two_sine" | "sampled"
    f0: float | None = None
    T: float | None = None
    samples: tuple | None = None  # (times, amplitudes) for kind == "sampled"
    paper_literal: bool = False

    def __post_init__(self):
        if self.kind == "ricker":
            if self.f0 is None or self.f0 <= 0:
                raise ValueError("ricker wavelet needs f0 > 0")
        elif self.kind == "two_sine":
            if self.T is None or self.T <= 0:
                raise ValueError("two_sine wavelet needs T > 0")
        elif self.kind == "sampled":
            if self.samples is None:
                raise ValueError("sampled wavelet needs (times, amplitudes)")
            t, a = self.samples
            if len(t) != len(a) or len(t) < 2:
                raise ValueError("sampled wavelet needs matching time/amplitude arrays")
        else:
            raise ValueError(f"unknown wavelet kind {self.kind!r}")

    @property
    def support(self) -> float:
        """End of the compact support (support starts at t = 0)."""
        if self.kind == "ricker":
            return 2.0 / self.f0
        if self.kind == "two_sine":
            return self.T
        return float(self.samples[0][-1])

    def __call__(self, t):
        if self.kind == "ricker":
            return ricker(t, self.f0, self.paper_literal)
        if self.kind == "two_sine":
            return two_sine(t, self.T)
        t_s, a_s = self.samples
        return np.interp(np.asarray(t, dtype=float), t_s, a_s, left=0.0, right=0.0)

    def derivative(self, t):
        if self.kind == "ricker":
            return ricker_derivative(t, self.f0)
        if self.kind == "two_sine":
            return two_sine_derivative(t, self.T)
        t_s, a_s = self.samples
        g = np.gradient(np.asarray(a_s, dtype=float), np.asarray(t_s, dtype=float))
        return np.interp(np.asarray(t, dtype=float), t_s, g, left=0.0, right=0.0)

    @classmethod
    def from_file(cls, path) -> "Wavelet":
        """Load a sampled wavelet from a two-column (t, amplitude) text file."""
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (t, amplitude)")
        return cls(kind="sampled", samples=(tuple(data[:, 0]), tuple(data[:, 1])))


def spectrum(w: Wavelet, dt: float, n_samples: int) -> np.ndarray:
    """Forward DFT of the sampled wavelet, zero-padded to n_samples.

    n_samples must be a power of two and the window n_samples*dt must cover
    the wavelet support.  Frequency resolution is 1/(n_samples*dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_samples < 1 or (n_samples & (n_samples - 1)) != 0:
        raise ValueError("n_samples must be a power of two")
    if w.support > n_samples * dt:
        raise ValueError("wavelet support exceeds the transform window")
    t = np.arange(n_samples) * dt
    return np.fft.fft(w(t))


def omega_max(w: Wavelet, threshold: float = 0.05, dt: float | None = None, n_samples: int | None = None) -> float:
    """Largest angular frequency where |spectrum| >= threshold * max|spectrum|.

    Used to size fitting bands; by default the wavelet is sampled at 256
    points per support length over an 8x padded window.
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError("threshold must lie in (0, 1]")
    if dt is None:
        dt = w.support / 256.0
    if n_samples is None:
        n_samples = 1 << max(1, math.ceil(math.log2(8.0 * w.support / dt)))
    s = spectrum(w, dt, n_samples)
    mag = np.abs(s[: n_samples // 2 + 1])
    peak = float(np.max(mag))
    if peak == 0.0:
        raise ValueError("degenerate (all-zero) wavelet")
    idx = np.nonzero(mag >= threshold * peak)[0]
    freqs = np.fft.rfftfreq(n_samples, dt)
    return 2.0 * math.pi * float(freqs[idx[-1]])


def dominant_omega(w: Wavelet) -> float:
    """Angular frequency of the spectral peak (threshold-1 limit of omega_max)."""
    return omega_max(w, threshold=1.0)
