"""Continuous and discrete dispersion/attenuation relations.

Convention: the wavenumber k is real and the angular frequency omega is
complex.  With the exp(i*omega*t) time dependence a physically decaying
mode has Im(omega) > 0.  The continuous relation is

    omega^2 = k^2 c^2 (1 + sum_l y_l*i*omega/(i*omega + omega_l)),

whose physical root is picked by continuous deformation from the elastic
root omega = c*k as the weights grow from zero.  The discrete relation is

    sin^2(w*dt/2) = (c*dt/dx)^2 (sin^2(kx*dx/2) + sin^2(ky*dx/2))
                    * (1 + sum_l 2i*y_l*tan(w*dt/2)/(dt*omega_l + 2i*tan(w*dt/2)))

(the same factor in 1D with the single sin^2 term), solved by a complex
Newton iteration seeded from the continuous root.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .material import Rheology


class RootTrackingError(RuntimeError):
    """Ambiguous or failed selection of the physical dispersion root."""


@dataclass(frozen=True)
class DispersionPoint:
    """One sample of the numerical-dispersion sweep."""

    N: float  # points per wavelength
    angle: float
    omega_discrete: complex
    omega_exact: complex
    q: float  # Re(omega_disc)/Re(omega_exact), phase-velocity ratio
    attenuation_ratio: float  # Im(omega_disc)/Im(omega_exact)

    def __post_init__(self):
        if self.N <= 2:
            raise ValueError("need more than 2 points per wavelength (Nyquist)")
        if not (math.isfinite(self.q) and math.isfinite(self.attenuation_ratio)):
            raise ValueError("non-finite dispersion ratios")


def _relation_residual(s: complex, k: float, c2: float, y, om) -> complex:
    """-s^2 - k^2 c^2 (1 + sum y*s/(s + omega_l)) with s = i*omega."""
    acc = 1.0 + 0.0j
    for y_l, w_l in zip(y, om):
        acc += y_l * s / (s + w_l)
    return -s * s - k * k * c2 * acc


def _polynomial_roots(k: float, c2: float, y, om):
    """Roots of the denominator-cleared relation in s = i*omega.

    P(s) = s^2 prod(s + omega_l) + k^2 c^2 (prod + sum_l y_l s prod_{m != l}).
    """
    prod = np.array([1.0])
    for w_l in om:
        prod = np.polymul(prod, [1.0, w_l])
    p = np.polymul([1.0, 0.0, 0.0], prod)
    corr = prod.astype(complex)
    for l, (y_l, _) in enumerate(zip(y, om)):
        partial = np.array([1.0])
        for m, w_m in enumerate(om):
            if m != l:
                partial = np.polymul(partial, [1.0, w_m])
        corr = np.polyadd(corr, y_l * np.polymul([1.0, 0.0], partial))
    p = np.polyadd(p.astype(complex), k * k * c2 * corr)
    return np.roots(p)


def continuous_omega(k: float, rheology: Rheology) -> complex:
    """Physical complex omega(k): Im(omega) >= 0, elastic limit c_R*k.

    All roots come from the companion matrix of the cleared polynomial; the
    physical one is tracked by scaling all weights from 0 to 1 in 16 steps
    and following the nearest root.  The returned root is substituted back
    into the uncleared relation as a guard against spurious roots.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    c2 = rheology.mu_R / rheology.rho
    om = rheology.omega
    y_full = rheology.y
    if rheology.L == 0 or not np.any(y_full):
        return complex(math.sqrt(c2) * k)
    s = 1j * math.sqrt(c2) * k  # elastic root
    for theta in np.linspace(1.0 / 16.0, 1.0, 16):
        roots = _polynomial_roots(k, c2, theta * y_full, om)
        dist = np.abs(roots - s)
        order = np.argsort(dist)
        if len(roots) > 1 and dist[order[1]] - dist[order[0]] < 1e-8 * abs(s):
            raise RootTrackingError(
                f"two roots within 1e-8 of the tracked one at homotopy level {theta:.3f}"
            )
        s = complex(roots[order[0]])
    w = s / 1j
    scale = abs(s * s) + k * k * c2
    res = abs(_relation_residual(s, k, c2, y_full, om)) / scale
    if res > 1e-10:
        raise RootTrackingError(f"cleared-polynomial root fails the relation (residual {res:.2e})")
    if w.real < 0:
        w = -w.conjugate()
    return w


def _discrete_residual(w: complex, k: float, angle: float, rheology: Rheology, dt: float, dx: float, dim: int) -> complex:
    th = w * dt / 2.0
    s2 = cmath.sin(k * math.cos(angle) * dx / 2.0) ** 2
    if dim == 2:
        s2 = s2 + cmath.sin(k * math.sin(angle) * dx / 2.0) ** 2
    tn = cmath.tan(th)
    acc = 1.0 + 0.0j
    for y_l, w_l in rheology.mechanisms:
        acc += 2j * y_l * tn / (dt * w_l + 2j * tn)
    c2 = rheology.mu_R / rheology.rho
    return cmath.sin(th) ** 2 - (dt * dt * c2 / (dx * dx)) * s2 * acc


def discrete_omega(k: float, angle: float, rheology: Rheology, dt: float, dx: float, dim: int = 2) -> complex:
    """Complex omega of the discrete scheme at real wavenumber k.

    Newton iteration with a numerical derivative, seeded from the
    continuous root; the solution satisfies the relation to 1e-12.
    """
    if k <= 0 or dt <= 0 or dx <= 0:
        raise ValueError("k, dt, dx must be positive")
    if k * dx > math.pi:
        raise ValueError("wavenumber beyond the grid Nyquist limit")
    w = continuous_omega(k, rheology)
    scale = abs(cmath.sin(w * dt / 2.0) ** 2) + abs(w * dt) ** 2 / 4.0 + 1e-30
    for it in range(100):
        f = _discrete_residual(w, k, angle, rheology, dt, dx, dim)
        if abs(f) <= 1e-13 * max(scale, 1e-12):
            return w
        eps = 1e-7 * max(abs(w), 1.0)
        df = (_discrete_residual(w + eps, k, angle, rheology, dt, dx, dim) - f) / eps
        if df == 0:
            break
        w = w - f / df
    f = _discrete_residual(w, k, angle, rheology, dt, dx, dim)
    if abs(f) > 1e-12 * max(scale, 1e-12):
        raise RootTrackingError(f"Newton did not converge (residual {abs(f):.2e})")
    return w


def sweep_curves(rheology: Rheology, n_values, angles=(0.0, math.pi / 4.0), cfl_fraction: float = 0.95,
                 k: float = 1.0, dim: int = 2):
    """Dispersion/attenuation ratio table over points-per-wavelength values.

    For each N the grid step is dx = 2*pi/(k*N) and dt = cfl_fraction times
    the stability bound for that dx.  Rows hold q = Re(w_disc)/Re(w_exact)
    and the analogous Im ratio (set to 1 when both imaginary parts vanish).
    """
    from .solver import cfl_max_dt

    out = []
    for angle in angles:
        for n_ppw in n_values:
            if n_ppw <= 2:
                raise ValueError("points per wavelength must exceed 2")
            dx = 2.0 * math.pi / (k * n_ppw)
            dt = cfl_fraction * cfl_max_dt(rheology, dx, dim)
            w_ex = continuous_omega(k, rheology)
            w_d = discrete_omega(k, angle, rheology, dt, dx, dim)
            att = w_d.imag / w_ex.imag if w_ex.imag != 0 else (1.0 if w_d.imag == 0 else math.inf)
            out.append(DispersionPoint(float(n_ppw), float(angle), w_d, w_ex,
                                       w_d.real / w_ex.real, att))
    return out
