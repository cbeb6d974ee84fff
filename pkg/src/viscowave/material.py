"""Material laws for viscoacoustic media.

Provides the exact constant-Q complex modulus, the rational (memory-variable)
modulus built from a set of relaxation mechanisms, the quality factor, and the
complex wavenumber used by the analytic solutions.

Conventions
-----------
Time dependence is exp(i*omega*t).  Complex powers use the principal
logarithm branch; for omega > 0 the argument i*omega/omega_ref lies on the
positive imaginary axis, so the branch is unambiguous.  With this convention
a dissipative modulus has positive imaginary part and the complex wavenumber
has negative imaginary part, so exp(i*(omega*t - k*x)) decays for x -> +inf.

Infinite quality factor is represented by ``math.inf`` (an exact marker, not
a large float): elastic media take exact elastic code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KjartanssonModel:
    """Constant-Q modulus law mu_ref * (i*omega/omega_ref)**gamma.

    gamma = (2/pi) * arctan(1/Q).  Q may be ``math.inf`` (elastic).
    """

    mu_ref: float
    omega_ref: float
    Q: float

    def __post_init__(self):
        if self.mu_ref <= 0:
            raise ValueError(f"mu_ref must be positive, got {self.mu_ref}")
        if self.omega_ref <= 0:
            raise ValueError(f"omega_ref must be positive, got {self.omega_ref}")
        if self.Q <= 0:
            raise ValueError(f"Q must be positive, got {self.Q}")

    @property
    def gamma(self) -> float:
        if math.isinf(self.Q):
            return 0.0
        return (2.0 / math.pi) * math.atan(1.0 / self.Q)


@dataclass(frozen=True)
class Rheology:
    """Density, relaxed modulus and L relaxation mechanisms (y_l, omega_l).

    Mechanisms are (weight, relaxation angular frequency) pairs with the
    omega_l strictly increasing.  Negative weights (possible output of a
    least-squares fit) are accepted; ``has_negative_weights`` flags them.
    """

    rho: float
    mu_R: float
    mechanisms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.mu_R <= 0:
            raise ValueError(f"mu_R must be positive, got {self.mu_R}")
        omegas = [w for _, w in self.mechanisms]
        if any(w <= 0 for w in omegas):
            raise ValueError("relaxation frequencies must be positive")
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise ValueError("relaxation frequencies must be strictly increasing")
        object.__setattr__(self, "mechanisms", tuple((float(y), float(w)) for y, w in self.mechanisms))

    @property
    def L(self) -> int:
        return len(self.mechanisms)

    @property
    def y(self) -> np.ndarray:
        return np.array([y for y, _ in self.mechanisms], dtype=float)

    @property
    def omega(self) -> np.ndarray:
        return np.array([w for _, w in self.mechanisms], dtype=float)

    @property
    def has_negative_weights(self) -> bool:
        return bool(np.any(self.y < 0.0))

    @property
    def mu_U(self) -> float:
        """Unrelaxed (high-frequency) modulus mu_R * (1 + sum y_l)."""
        return self.mu_R * (1.0 + float(np.sum(self.y)))

    @property
    def alpha(self) -> np.ndarray:
        """Normalized mechanism weights y_l / sum(y_l)."""
        s = float(np.sum(self.y))
        if s == 0.0:
            raise ValueError("alpha undefined for sum(y_l) = 0")
        return self.y / s

    @property
    def c_R(self) -> float:
        """Relaxed speed sqrt(mu_R / rho)."""
        return math.sqrt(self.mu_R / self.rho)

    @property
    def c_U(self) -> float:
        """Unrelaxed speed sqrt(mu_U / rho)."""
        return math.sqrt(self.mu_U / self.rho)

    def clamped(self) -> "Rheology":
        """Copy with negative weights clamped to zero (safety mode)."""
        mechs = tuple((max(y, 0.0), w) for y, w in self.mechanisms)
        return Rheology(self.rho, self.mu_R, mechs)


def kjartansson_modulus(model: KjartanssonModel, omega):
    """Exact constant-Q modulus mu_ref * (i*omega/omega_ref)**gamma.

    omega may be a positive scalar or an array of positive values.
    """
    om = np.asarray(omega, dtype=float)
    if np.any(om <= 0.0):
        raise ValueError("omega must be positive")
    if math.isinf(model.Q):
        out = np.full(om.shape, model.mu_ref + 0.0j)
        return out if om.ndim else complex(out)
    z = 1j * om / model.omega_ref
    out = model.mu_ref * z ** model.gamma
    return out if om.ndim else complex(out)


def modulus_of_fit(r: Rheology, omega):
    """Rational modulus mu_R * (1 + sum_l y_l*i*omega/(i*omega + omega_l)).

    Valid for omega >= 0; returns mu_R at omega = 0 and tends to the
    unrelaxed modulus as omega -> inf.
    """
    om = np.asarray(omega, dtype=float)
    if np.any(om < 0.0):
        raise ValueError("omega must be nonnegative")
    iw = 1j * om
    acc = np.ones(om.shape, dtype=complex)
    for y_l, w_l in r.mechanisms:
        acc = acc + y_l * iw / (iw + w_l)
    out = r.mu_R * acc
    return out if om.ndim else complex(out)


def quality_factor(modulus):
    """Quality factor Re(mu)/Im(mu); ``math.inf`` for a lossless modulus."""
    m = np.asarray(modulus, dtype=complex)
    if np.any(m.real <= 0.0):
        raise ValueError("modulus must have positive real part")
    with np.errstate(divide="ignore"):
        q = np.where(m.imag == 0.0, np.inf, m.real / np.where(m.imag == 0.0, 1.0, m.imag))
    return q if m.ndim else float(q)


def complex_wavenumber(model: KjartanssonModel, c_ref: float, omega):
    """Complex wavenumber (omega/c_ref)*(i*omega/omega_ref)**(-arctan(1/Q)/pi).

    c_ref is the phase velocity at omega_ref.  The imaginary part is
    negative, so exp(i*(omega*t - k*x)) decays for x -> +inf.
    """
    om = np.asarray(omega, dtype=float)
    if np.any(om <= 0.0):
        raise ValueError("omega must be positive")
    if c_ref <= 0:
        raise ValueError("c_ref must be positive")
    if math.isinf(model.Q):
        out = om / c_ref + 0.0j
        return out if om.ndim else complex(out)
    z = 1j * om / model.omega_ref
    out = (om / c_ref) * z ** (-model.gamma / 2.0)
    return out if om.ndim else complex(out)


def calibrate_to_speed(r: Rheology, c_ref: float, omega_ref: float) -> Rheology:
    """Rescale mu_R so that |mu(omega_ref)| = rho * c_ref**2.

    Makes the phase velocity of the fitted medium at the reference frequency
    match c_ref, which is how target media specified by (c, rho, Q) are
    realized as discrete rheologies.
    """
    if c_ref <= 0 or omega_ref <= 0:
        raise ValueError("c_ref and omega_ref must be positive")
    mag = abs(modulus_of_fit(Rheology(r.rho, 1.0, r.mechanisms), omega_ref))
    mu_R = r.rho * c_ref**2 / mag
    return Rheology(r.rho, mu_R, r.mechanisms)
