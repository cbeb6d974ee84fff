"""Closed-form reference solutions and trace comparison metrics.

1D: the frequency-domain dissipation operator

    D(omega) = exp(i*omega*t_star*Q(w_r)*(1 - c(w_r)/nu(omega))),

with c(w_r)/nu(omega) = sqrt(|mu(w_r)|/mu(omega)) (velocity ratio; the
branch is the principal square root, continuous from omega = w_r where the
ratio is near 1).  Convolving the source with D gives the exact response
with the elastic travel distance already divided out; t_star is the
dissipation time x/(c(w_r)*Q(w_r)).

2D: plane wave striking a penetrable circular cylinder, solved per
frequency and azimuthal order by the partial-wave expansion.  The 2x2
interface system (pressure and normal-velocity continuity at r = a) is
solved numerically and validated by residual substitution on every call,
which is robust against sign conventions in printed coefficient formulas.

Time synthesis is an inverse DFT with conjugate symmetry (real output)
and a mandatory wraparound detector.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hankel2, jv

from .material import KjartanssonModel, complex_wavenumber, kjartansson_modulus
from .source import Wavelet


class SynthesisError(RuntimeError):
    """Wraparound or series non-convergence during trace synthesis."""


@dataclass(frozen=True)
class TraceSet:
    """Time series per receiver at a common sampling interval."""

    positions: tuple
    dt: float
    data: np.ndarray  # (n_receivers, n_samples)
    provenance: str = "analytic"  # "analytic" | "simulated"
    fields: tuple[str, ...] = ("p",)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.data.ndim != 2 or self.data.shape[0] != len(self.positions) * len(self.fields):
            raise ValueError("data must be (n_receivers * n_fields, n_samples)")
        if self.provenance not in ("analytic", "simulated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def trace(self, receiver: int, field: str = "p") -> np.ndarray:
        return self.data[receiver * len(self.fields) + self.fields.index(field)]


def save_trace_csv(ts: TraceSet, receiver: int, path) -> None:
    """One receiver per file: '# t, p[, vx, vy]' header, 17 digits."""
    cols = [ts.times] + [ts.trace(receiver, f) for f in ts.fields]
    with open(path, "w") as fh:
        fh.write("# t, " + ", ".join(ts.fields) + "\n")
        for row in zip(*cols):
            fh.write(", ".join(f"{v:.17g}" for v in row) + "\n")


def load_trace_csv(path):
    """Times and value columns of a trace CSV; returns (t, fields, columns)."""
    with open(path) as fh:
        header = fh.readline()
    if not header.startswith("# t"):
        raise ValueError(f"{path}: missing trace header")
    fields = tuple(f.strip() for f in header.lstrip("#").split(",")[1:])
    data = np.loadtxt(path, delimiter=",", comments="#")
    data = np.atleast_2d(data)
    return data[:, 0], fields, data[:, 1:].T


def dissipation_operator(omega, t_star: float, Q_ref: float, omega_ref: float, modulus_law):
    """Complex transfer factor D(omega) of 1D constant-Q propagation.

    modulus_law maps omega > 0 to the complex modulus (exact constant-Q or
    a fitted rational law); omega = 0 maps to 1 (no DC attenuation).
    """
    if t_star < 0:
        raise ValueError("t_star must be nonnegative")
    om = np.asarray(omega, dtype=float)
    scalar = om.ndim == 0
    om = np.atleast_1d(om)
    out = np.ones(om.shape, dtype=complex)
    pos = om > 0
    if np.any(pos):
        if math.isinf(Q_ref):
            out[pos] = 1.0
        else:
            mu_ref = complex(modulus_law(omega_ref))
            mu = np.asarray(modulus_law(om[pos]), dtype=complex)
            ratio = np.sqrt(abs(mu_ref) / mu)
            out[pos] = np.exp(1j * om[pos] * t_star * Q_ref * (1.0 - ratio))
    return complex(out[0]) if scalar else out


def _synthesize(spec_values: np.ndarray, n: int) -> np.ndarray:
    """Real time series from positive-frequency bins by conjugate symmetry."""
    full = np.zeros(n, dtype=complex)
    full[: n // 2 + 1] = spec_values
    full[n // 2 + 1:] = np.conj(spec_values[1: n // 2][::-1])
    if n % 2 == 0:
        full[n // 2] = full[n // 2].real
    out = np.fft.ifft(full)
    if np.max(np.abs(out.imag)) > 1e-10 * max(np.max(np.abs(out.real)), 1e-300):
        raise SynthesisError("synthesis produced a non-real series")
    return out.real


def _check_wraparound(series: np.ndarray) -> None:
    peak = float(np.max(np.abs(series)))
    if peak == 0.0:
        return
    tail = max(2, series.size // 50)
    # 1e-5 tolerates the aliasing floor of hard-truncated wavelets while
    # still catching genuine pulse energy crossing the window edge
    if float(np.max(np.abs(series[-tail:]))) > 1e-5 * peak:
        raise SynthesisError("pulse energy at the window edge: enlarge the window")


def analytic_trace_1d(wavelet: Wavelet, t_star: float, Q_ref: float, omega_ref: float,
                      modulus_law, dt: float, n: int, t_shift: float = 0.0) -> TraceSet:
    """Exact dispersed pulse: source spectrum times D, back to time.

    The pulse has a small precursor (frequencies above omega_ref run ahead
    of the reference speed), so sample k of the trace is the value at time
    k*dt - t_shift; choose t_shift larger than the precursor extent to keep
    the series inside the window.
    """
    from .source import spectrum

    s = spectrum(wavelet, dt, n)
    om = 2.0 * math.pi * np.fft.rfftfreq(n, dt)
    d = dissipation_operator(om, t_star, Q_ref, omega_ref, modulus_law)
    if t_shift != 0.0:
        d = d * np.exp(-1j * om * t_shift)
    series = _synthesize(s[: n // 2 + 1] * d, n)
    _check_wraparound(series)
    return TraceSet(((0.0, 0.0),), dt, series[None, :], "analytic")


# -- cylinder scattering ---------------------------------------------------


@dataclass(frozen=True)
class CylinderScene:
    """Penetrable cylinder of radius a in a homogeneous exterior."""

    a: float
    rho1: float
    c1: float
    Q1: float
    rho2: float
    c2: float
    Q2: float
    theta_i: float = 0.0
    A0: float = 1.0
    omega_ref: float = 2.0 * math.pi * 2.5

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("radius must be positive")
        for v, name in ((self.rho1, "rho1"), (self.c1, "c1"), (self.rho2, "rho2"), (self.c2, "c2")):
            if v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.Q1 <= 0 or self.Q2 <= 0:
            raise ValueError("quality factors must be positive")

    def wavenumbers(self, omega: float):
        m1 = KjartanssonModel(self.rho1 * self.c1**2, self.omega_ref, self.Q1)
        m2 = KjartanssonModel(self.rho2 * self.c2**2, self.omega_ref, self.Q2)
        return (complex(complex_wavenumber(m1, self.c1, omega)),
                complex(complex_wavenumber(m2, self.c2, omega)))


def wronskian_residual(n: int, chi: complex) -> float:
    """|J_n*H_n' - J_n'*H_n + 2i/(pi*chi)| / |2i/(pi*chi)| (self-test)."""
    j, h = jv(n, chi), hankel2(n, chi)
    jp = 0.5 * (jv(n - 1, chi) - jv(n + 1, chi))
    hp = 0.5 * (hankel2(n - 1, chi) - hankel2(n + 1, chi))
    w = -2j / (math.pi * chi)
    return abs(j * hp - jp * h - w) / abs(w)


def cylinder_coefficients(scene: CylinderScene, omega: float, n: int):
    """Scattered (a_n) and interior (b_n) partial-wave coefficients.

    Solves the interface system at r = a for azimuthal order n:
        c_n J_n(x1) + a_n H_n(x1)              = b_n J_n(x2)
        g1 (c_n J_n'(x1) + a_n H_n'(x1))       = g2 b_n J_n'(x2)
    with c_n the incident coefficient, x_j = k_j a, g_j = k_j/rho_j.
    The solution is substituted back; relative residual above 1e-9 raises.
    Evanescent high orders where the Bessel factors over/underflow return
    exactly (0, 0) (their contribution is below round-off).
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    k1, k2 = scene.wavenumbers(omega)
    x1, x2 = k1 * scene.a, k2 * scene.a
    g1, g2 = k1 / scene.rho1, k2 / scene.rho2
    c_n = scene.A0 * cmath.exp(-1j * n * (scene.theta_i + math.pi / 2.0))

    j1, h1 = jv(n, x1), hankel2(n, x1)
    j2 = jv(n, x2)
    j1p = 0.5 * (jv(n - 1, x1) - jv(n + 1, x1))
    h1p = 0.5 * (hankel2(n - 1, x1) - hankel2(n + 1, x1))
    j2p = 0.5 * (jv(n - 1, x2) - jv(n + 1, x2))
    vals = np.array([j1, h1, j2, j1p, h1p, j2p])
    if not np.all(np.isfinite(vals)) or abs(h1) > 1e100 or abs(j1) < 1e-280:
        return 0.0 + 0.0j, 0.0 + 0.0j

    mat = np.array([[h1, -j2], [g1 * h1p, -g2 * j2p]], dtype=complex)
    rhs = np.array([-c_n * j1, -g1 * c_n * j1p], dtype=complex)
    a_n, b_n = np.linalg.solve(mat, rhs)

    scale = abs(c_n * j1) + abs(a_n * h1) + abs(b_n * j2) + 1e-300
    r1 = abs(c_n * j1 + a_n * h1 - b_n * j2) / scale
    scale2 = abs(g1 * c_n * j1p) + abs(g1 * a_n * h1p) + abs(g2 * b_n * j2p) + 1e-300
    r2 = abs(g1 * (c_n * j1p + a_n * h1p) - g2 * b_n * j2p) / scale2
    if max(r1, r2) > 1e-9:
        raise SynthesisError(f"interface residual {max(r1, r2):.2e} at n={n}, omega={omega:.4g}")
    return complex(a_n), complex(b_n)


def _coeff_arrays(scene: CylinderScene, omega: float, n_max: int):
    """Coefficients (a_n/c_n, b_n/c_n) for orders 0..n_max, residual-checked.

    Dividing out the incident coefficient c_n makes the arrays valid for
    both +-n (the ratio is order-symmetric); orders whose Bessel factors
    over/underflow are zeroed (evanescent beyond round-off).
    """
    k1, k2 = scene.wavenumbers(omega)
    x1, x2 = k1 * scene.a, k2 * scene.a
    g1, g2 = k1 / scene.rho1, k2 / scene.rho2
    ns = np.arange(n_max + 2)
    with np.errstate(over="ignore", invalid="ignore"):
        j1_all = jv(ns, x1)
        h1_all = hankel2(ns, x1)
        j2_all = jv(ns, x2)
    j1, h1, j2 = j1_all[:-1], h1_all[:-1], j2_all[:-1]
    # Z'_n = Z_{n-1} - (n/x) Z_n avoids a separate n-1 evaluation
    n_arr = ns[:-1]
    j1p = np.empty(n_max + 1, dtype=complex)
    h1p = np.empty(n_max + 1, dtype=complex)
    j2p = np.empty(n_max + 1, dtype=complex)
    j1p[0], h1p[0], j2p[0] = -j1_all[1], -h1_all[1], -j2_all[1]
    j1p[1:] = j1_all[:n_max] - (n_arr[1:] / x1) * j1[1:]
    h1p[1:] = h1_all[:n_max] - (n_arr[1:] / x1) * h1[1:]
    j2p[1:] = j2_all[:n_max] - (n_arr[1:] / x2) * j2[1:]

    bad = ~(np.isfinite(j1) & np.isfinite(h1) & np.isfinite(j2)
            & np.isfinite(j1p) & np.isfinite(h1p) & np.isfinite(j2p))
    bad |= (np.abs(h1) > 1e100) | (np.abs(j1) < 1e-280)
    det = -g2 * h1 * j2p + g1 * j2 * h1p
    rhs1, rhs2 = -j1, -g1 * j1p
    with np.errstate(invalid="ignore", divide="ignore"):
        a = (rhs1 * (-g2 * j2p) + j2 * rhs2) / det
        b = (h1 * rhs2 - g1 * h1p * rhs1) / det
    a[bad], b[bad] = 0.0, 0.0

    ok = ~bad
    scale = np.abs(j1) + np.abs(a * h1) + np.abs(b * j2) + 1e-300
    r1 = np.abs(j1 + a * h1 - b * j2) / scale
    scale2 = np.abs(g1 * j1p) + np.abs(g1 * a * h1p) + np.abs(g2 * b * j2p) + 1e-300
    r2 = np.abs(g1 * (j1p + a * h1p) - g2 * b * j2p) / scale2
    worst = float(np.max(np.maximum(r1, r2)[ok])) if np.any(ok) else 0.0
    if worst > 1e-9:
        raise SynthesisError(f"interface residual {worst:.2e} at omega={omega:.4g}")
    return a, b


def _cylinder_fields(scene: CylinderScene, omega: float, receivers, phase: complex):
    """Single-frequency pressure at all receivers via the +-n pair sum.

    With psi = theta_i + pi/2 the +-n pair collapses to
    R_n(r) * (exp(i*n*theta) + exp(i*n*(2*theta_i - theta))).
    """
    k1, k2 = scene.wavenumbers(omega)
    r_max = max(math.hypot(x, y) for x, y in receivers)
    n_max = math.ceil(abs(k1) * max(scene.a, r_max)) + 12
    for attempt in range(6):
        a, b = _coeff_arrays(scene, omega, n_max)
        ns = np.arange(n_max + 1)
        c_n = scene.A0 * np.exp(-1j * ns * (scene.theta_i + math.pi / 2.0))
        out = []
        converged = True
        for x, y in receivers:
            r = math.hypot(x, y)
            theta = math.atan2(y, x)
            with np.errstate(over="ignore", invalid="ignore"):
                if r < scene.a:
                    rad = b * jv(ns, k2 * r)
                else:
                    rad = jv(ns, k1 * r) + a * hankel2(ns, k1 * r)
            rad = np.where(np.isfinite(rad), rad, 0.0) * c_n
            ang = np.exp(1j * ns * theta) + np.exp(1j * ns * (2.0 * scene.theta_i - theta))
            terms = rad * ang
            terms[0] *= 0.5  # n = 0 has no mirror partner
            total = complex(np.sum(terms))
            if abs(terms[-1]) > 1e-12 * max(abs(total), 1e-300):
                converged = False
                break
            out.append(total * phase)
        if converged:
            return out
        n_max += 24
    raise SynthesisError(f"partial-wave series not converged at omega={omega:.4g}")


def cylinder_trace(scene: CylinderScene, wavelet: Wavelet, receivers, dt: float,
                   n_samples: int, phase_origin=(0.0, 0.0)) -> TraceSet:
    """Time-domain pressure traces of the scattering problem.

    The incident wave carries the source waveform: at ``phase_origin`` the
    incident trace equals A0 * wavelet(t).  Frequency bins are synthesized
    independently and assembled by conjugate symmetry.
    """
    from .source import spectrum

    receivers = tuple(tuple(p) for p in receivers)
    for x, y in receivers:
        if abs(math.hypot(x, y) - scene.a) < 1e-9 * scene.a:
            raise ValueError("receiver on the interface is not supported")
    s = spectrum(wavelet, dt, n_samples)
    om = 2.0 * math.pi * np.fft.rfftfreq(n_samples, dt)
    dvec = (math.cos(scene.theta_i), math.sin(scene.theta_i))
    vals = np.zeros((len(receivers), om.size), dtype=complex)
    for m in range(1, om.size):
        if s[m] == 0.0:
            continue
        k1, _ = scene.wavenumbers(om[m])
        phase = cmath.exp(1j * k1 * (phase_origin[0] * dvec[0] + phase_origin[1] * dvec[1]))
        fields = _cylinder_fields(scene, om[m], receivers, phase)
        for ri, f in enumerate(fields):
            vals[ri, m] = s[m] * f
    data = np.empty((len(receivers), n_samples))
    for ri in range(len(receivers)):
        series = _synthesize(vals[ri], n_samples)
        _check_wraparound(series)
        data[ri] = series
    return TraceSet(receivers, dt, data, "analytic")


def incident_plane_trace(scene: CylinderScene, wavelet: Wavelet, receiver, dt: float,
                         n_samples: int, phase_origin=(0.0, 0.0)) -> np.ndarray:
    """Incident-only trace A0 * s(t - (x - x0).d / c1) through the same DFT."""
    from .source import spectrum

    s = spectrum(wavelet, dt, n_samples)
    om = 2.0 * math.pi * np.fft.rfftfreq(n_samples, dt)
    dvec = (math.cos(scene.theta_i), math.sin(scene.theta_i))
    proj = (receiver[0] - phase_origin[0]) * dvec[0] + (receiver[1] - phase_origin[1]) * dvec[1]
    vals = np.zeros(om.size, dtype=complex)
    for m in range(1, om.size):
        k1, _ = scene.wavenumbers(om[m])
        vals[m] = scene.A0 * s[m] * cmath.exp(-1j * k1 * proj)
    return _synthesize(vals, n_samples)


# -- metrics ---------------------------------------------------------------


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-lag Pearson correlation (lag search would hide dispersion error)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("series lengths differ")
    da, db = a - a.mean(), b - b.mean()
    na, nb = np.linalg.norm(da), np.linalg.norm(db)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-variance series")
    return float(np.dot(da, db) / (na * nb))


def l2_misfit(a: np.ndarray, b: np.ndarray) -> float:
    """Relative L2 error ||a - b|| / ||b|| against the reference b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("series lengths differ")
    nb = np.linalg.norm(b)
    if nb == 0.0:
        raise ValueError("zero reference series")
    return float(np.linalg.norm(a - b) / nb)
