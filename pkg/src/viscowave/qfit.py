"""Fitting of relaxation mechanisms (y_l, omega_l) to a target Q law.

Four strategies are provided:

* ``fit_pade``   -- Pade / Legendre-node closed form, linear node spacing
* ``fit_gmb``    -- generalized Maxwell body, log-equidistant omega_l and a
                    least-squares solve for the weights
* ``fit_tau``    -- single dimensionless parameter tau shared by all
                    mechanisms, closed-form least-squares minimizer
* ``hybrid_band``-- the two-decade band [omega_max/100, omega_max] tied to
                    the source spectrum, to be combined with ``fit_gmb``

All fits return a (Rheology, FitReport) pair with mu_R = 1 and rho = 1 by
default; use ``material.calibrate_to_speed`` to pin the physical scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .material import Rheology, modulus_of_fit, quality_factor

MAX_LEGENDRE_ORDER = 12


class FitError(RuntimeError):
    """Raised when a fit cannot be computed (rank deficiency, bad inputs)."""


@dataclass(frozen=True)
class FitBand:
    """Angular-frequency interval [omega1, omega2] over which a fit is judged."""

    omega1: float
    omega2: float

    def __post_init__(self):
        if not (0.0 < self.omega1 < self.omega2):
            raise ValueError(f"need 0 < omega1 < omega2, got ({self.omega1}, {self.omega2})")

    @property
    def decades(self) -> float:
        return math.log10(self.omega2 / self.omega1)


@dataclass(frozen=True)
class FitReport:
    method: str
    L: int
    band: FitBand
    collocation: tuple[float, ...]
    max_rel_error: float
    rms_rel_error: float
    negative_weights: bool

    def __post_init__(self):
        if self.max_rel_error < 0 or self.rms_rel_error < 0:
            raise ValueError("errors must be nonnegative")
        for w in self.collocation:
            if not (self.band.omega1 * (1 - 1e-12) <= w <= self.band.omega2 * (1 + 1e-12)):
                raise ValueError(f"collocation frequency {w} outside band")


def legendre_nodes(L: int):
    """Zeros and weights of the order-L Legendre polynomial on (-1, 1).

    Newton iteration from Chebyshev initial guesses; weights are
    2 / ((1 - x^2) * P_L'(x)^2).  Limited to L <= 12 where the iteration is
    unconditionally reliable.
    """
    if not (1 <= L <= MAX_LEGENDRE_ORDER):
        raise ValueError(f"need 1 <= L <= {MAX_LEGENDRE_ORDER}, got {L}")
    k = np.arange(1, L + 1)
    x = np.cos(math.pi * (k - 0.25) / (L + 0.5))
    for it in range(100):
        p, dp = _legendre_and_derivative(L, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise FitError("Legendre Newton iteration did not converge")
    _, dp = _legendre_and_derivative(L, x)
    w = 2.0 / ((1.0 - x**2) * dp**2)
    order = np.argsort(x)
    return x[order], w[order]


def _legendre_and_derivative(L, x):
    """P_L(x) and P_L'(x) by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    for n in range(2, L + 1):
        p0, p1 = p1, ((2 * n - 1) * x * p1 - (n - 1) * p0) / n
    dp = L * (x * p1 - p0) / (x**2 - 1.0)
    return p1, dp


def log_equidistant(band: FitBand, L: int) -> np.ndarray:
    """L frequencies logarithmically equidistant over the band.

    Endpoints inclusive for L >= 2; the geometric band center for L = 1.
    """
    if L == 1:
        return np.array([math.sqrt(band.omega1 * band.omega2)])
    return np.exp(np.linspace(math.log(band.omega1), math.log(band.omega2), L))


def gmb_method2_frequencies(omega_dom: float, L: int) -> np.ndarray:
    """Relaxation frequencies 2*omega_dom/10**l, l = 1..L (decreasing).

    One decade of spacing, below the 1.144-decade half-width of the Debye
    function.
    """
    if omega_dom <= 0:
        raise ValueError("omega_dom must be positive")
    return 2.0 * omega_dom / 10.0 ** np.arange(1, L + 1)


def hybrid_band(omega_max: float) -> FitBand:
    """Two-decade band [omega_max/100, omega_max] below the source maximum."""
    if omega_max <= 0:
        raise ValueError("omega_max must be positive")
    return FitBand(omega_max / 100.0, omega_max)


def _report(method, band, omegas_colloc, rheo, q_target):
    """Dense-grid errors of fitted 1/Q against the target over the band."""
    grid = np.exp(np.linspace(math.log(band.omega1), math.log(band.omega2), 512))
    q_fit_inv = 1.0 / quality_factor(modulus_of_fit(rheo, grid))
    q_tgt_inv = np.asarray([q_target(w) for w in grid])
    rel = np.abs(q_fit_inv - q_tgt_inv) / np.abs(q_tgt_inv)
    return FitReport(
        method=method,
        L=rheo.L,
        band=band,
        collocation=tuple(float(w) for w in omegas_colloc),
        max_rel_error=float(np.max(rel)),
        rms_rel_error=float(np.sqrt(np.mean(rel**2))),
        negative_weights=rheo.has_negative_weights,
    )


def fit_pade(Q0: float, band: FitBand, L: int, rho: float = 1.0, mu_R: float = 1.0):
    """Pade fit of a constant Q0: closed-form nodes and weights.

    Relaxation frequencies are the Legendre zeros mapped linearly onto the
    band (equidistant on a linear scale); the weights follow from the
    Legendre quadrature weights with prefactor (omega2-omega1)/(pi*Q0),
    converted from the unrelaxed-modulus expansion to the (mu_R, y_l)
    convention.
    """
    if Q0 <= 0:
        raise ValueError("Q0 must be positive")
    if L > MAX_LEGENDRE_ORDER:
        raise ValueError(f"L > {MAX_LEGENDRE_ORDER} exceeds the node accuracy limit")
    x, nu = legendre_nodes(L)
    w1, w2 = band.omega1, band.omega2
    omegas = 0.5 * (x * (w2 - w1) + w2 + w1)
    c = (w2 - w1) / (math.pi * Q0)
    # mu = mu_U * (1 - c*sum nu_l/(i*w + w_l))
    #    = mu_U*(1 - c*sum nu_l/w_l) * (1 + sum y_l*i*w/(i*w + w_l))
    denom = 1.0 - c * float(np.sum(nu / omegas))
    if denom <= 0:
        raise FitError("Pade fit degenerate: relaxed modulus would be nonpositive")
    y = (c * nu / omegas) / denom
    rheo = Rheology(rho, mu_R, tuple(zip(y, omegas)))
    return rheo, _report("pade", band, omegas, rheo, lambda w: 1.0 / Q0)


def fit_gmb(
    q_target,
    band: FitBand,
    L: int,
    rho: float = 1.0,
    mu_R: float = 1.0,
    omegas=None,
    collocation: str = "geometric",
    clamp_negative: bool = False,
):
    """Generalized-Maxwell fit: omega_l log-equidistant, weights from the
    collocated least-squares system.

    q_target maps omega to the target 1/Q(omega).  K = 2L-1 collocation
    frequencies are geometrically spaced over the band (``collocation=
    "geometric"``); ``collocation="paper"`` reproduces the literal
    half-decade-step recursion, which yields only 3 points.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if omegas is None:
        omegas = log_equidistant(band, L)
    omegas = np.asarray(omegas, dtype=float)
    if collocation == "geometric":
        K = max(2 * L - 1, 1)
        wt = np.exp(np.linspace(math.log(band.omega1), math.log(band.omega2), K)) if K > 1 else np.array([band.omega1])
    elif collocation == "paper":
        r = math.sqrt(band.omega2 / band.omega1)
        wt = band.omega1 * r ** np.arange(3)
    else:
        raise ValueError(f"unknown collocation rule {collocation!r}")
    qinv = np.asarray([q_target(w) for w in wt])
    if np.any(qinv <= 0):
        raise FitError("target 1/Q must be positive on the band")
    # rows of the overdetermined system for the weights
    A = wt[:, None] * (omegas[None, :] - qinv[:, None] * wt[:, None]) / (omegas[None, :] ** 2 + wt[:, None] ** 2)
    # normal equations; the system is tiny and benign on log-spaced grids
    from scipy.linalg import LinAlgError, cho_factor, cho_solve

    ata = A.T @ A
    try:
        y = cho_solve(cho_factor(ata), A.T @ qinv)
    except LinAlgError as exc:
        raise FitError("rank-deficient collocation system (duplicate omega_l?)") from exc
    if clamp_negative:
        y = np.maximum(y, 0.0)
    order = np.argsort(omegas)
    rheo = Rheology(rho, mu_R, tuple(zip(y[order], omegas[order])))
    return rheo, _report("gmb", band, wt, rheo, q_target)


def fit_tau(Q0: float, omegas, band: FitBand | None = None, rho: float = 1.0, mu_R: float = 1.0):
    """Tau-method fit: one dimensionless weight tau for all mechanisms.

    The least-squares functional is quadratic in tau, so the minimizer is
    closed form: tau = int(F/Q0) / int(F^2) with
    F(w) = sum_l (w/w_l)/(1+(w/w_l)^2), integrated over the band with a
    log-frequency substitution at 1e-10 relative tolerance.
    """
    if Q0 <= 0:
        raise ValueError("Q0 must be positive")
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise ValueError("omegas must be nonempty")
    if np.any(omegas <= 0) or len(set(omegas.tolist())) != omegas.size:
        raise ValueError("omegas must be positive and distinct")
    if band is None:
        band = FitBand(float(np.min(omegas)), float(np.max(omegas))) if omegas.size > 1 else FitBand(
            float(omegas[0]) / 10.0, float(omegas[0]) * 10.0
        )

    def debye_sum(w):
        r = w / omegas
        return float(np.sum(r / (1.0 + r**2)))

    u1, u2 = math.log(band.omega1), math.log(band.omega2)

    def num_integrand(u):
        w = math.exp(u)
        return debye_sum(w) / Q0 * w

    def den_integrand(u):
        w = math.exp(u)
        return debye_sum(w) ** 2 * w

    num, _ = quad(num_integrand, u1, u2, epsrel=1e-10, limit=200)
    den, _ = quad(den_integrand, u1, u2, epsrel=1e-10, limit=200)
    tau = num / den
    order = np.argsort(omegas)
    rheo = Rheology(rho, mu_R, tuple((tau, w) for w in omegas[order]))
    return rheo, _report("tau", band, omegas, rheo, lambda w: 1.0 / Q0)
