"""Pulse envelopes, pulse areas and the power-to-area mapping.

``duration_fwhm`` always refers to the full width at half maximum of the
field amplitude (Rabi frequency) envelope. Laser pulse lengths quoted as
intensity FWHM are converted with :func:`amplitude_fwhm`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ValidationError
from .model import Transition

LN2 = math.log(2.0)
ACOSH2 = math.acosh(2.0)
ACOSH_SQRT2 = math.acosh(math.sqrt(2.0))
# Half-width of the integration window in FWHM units; tails beyond it are
# below 1e-7 of the area.
TRUNCATION_FWHM = {"sech": 8.0, "double_exp": 12.0}


class PulseShape(str, enum.Enum):
    SECH = "sech"
    DOUBLE_EXP = "double_exp"
    SQUARE = "square"


class AdiabaticityWarning(UserWarning):
    """Raised when the adiabatic-elimination formula is used outside its regime."""


def amplitude_fwhm(shape, intensity_fwhm: float) -> float:
    """Amplitude-envelope FWHM of a pulse whose intensity FWHM is given."""
    shape = PulseShape(shape)
    if shape is PulseShape.SECH:
        # |sech|^2 halves at acosh(sqrt 2), sech halves at acosh(2).
        return intensity_fwhm * ACOSH2 / ACOSH_SQRT2
    if shape is PulseShape.DOUBLE_EXP:
        return 2.0 * intensity_fwhm
    return intensity_fwhm


@dataclass(frozen=True)
class PulseEnvelope:
    """One laser segment.

    ``peak_rabi`` is the peak Rabi frequency (rad/s) of a unit coupling and
    ``couplings`` maps each driven transition to its amplitude scale, so the
    Rabi frequency on transition X is ``couplings[X] * envelope_value(t)``.
    The carrier sits ``carrier_detuning`` (rad/s) above the ``reference`` line.
    """

    shape: PulseShape
    duration_fwhm: float
    peak_rabi: float
    couplings: dict = field(default_factory=lambda: {Transition.C: 1.0})
    carrier_detuning: float = 0.0
    reference: Transition = Transition.C
    phase: float = 0.0
    t_center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", PulseShape(self.shape))
        object.__setattr__(self, "reference", Transition.coerce(self.reference))
        object.__setattr__(
            self, "couplings", {Transition.coerce(k): float(v) for k, v in self.couplings.items()}
        )
        if not self.duration_fwhm > 0:
            raise ValidationError("duration_fwhm must be positive")
        if self.peak_rabi < 0 or any(v < 0 for v in self.couplings.values()):
            raise ValidationError("amplitude scales must be non-negative")

    def value(self, t):
        return envelope_value(self, t)

    @property
    def truncation(self) -> float:
        """Half-width of the support in units of ``duration_fwhm``."""
        if self.shape is PulseShape.SQUARE:
            return 0.5
        return TRUNCATION_FWHM[self.shape.value]

    @property
    def support(self) -> tuple:
        half = self.truncation * self.duration_fwhm
        return (self.t_center - half, self.t_center + half)

    def replace(self, **changes) -> "PulseEnvelope":
        return replace(self, **changes)


def envelope_value(p: PulseEnvelope, t):
    x = np.asarray(t, dtype=float) - p.t_center
    tau = p.duration_fwhm
    if p.shape is PulseShape.SECH:
        a = np.exp(-np.abs(2.0 * ACOSH2 * x / tau))
        out = p.peak_rabi * 2.0 * a / (1.0 + a * a)
    elif p.shape is PulseShape.DOUBLE_EXP:
        out = p.peak_rabi * np.exp(-2.0 * LN2 * np.abs(x) / tau)
    else:
        out = np.where(np.abs(x) <= 0.5 * tau, p.peak_rabi, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def shape_area_factor(shape) -> float:
    """Pulse area of a unit-peak, unit-FWHM envelope (infinite support)."""
    shape = PulseShape(shape)
    if shape is PulseShape.SECH:
        return math.pi / (2.0 * ACOSH2)
    if shape is PulseShape.DOUBLE_EXP:
        return 1.0 / LN2
    return 1.0


def shape_energy_factor(shape) -> float:
    """Integral of the squared unit-peak, unit-FWHM envelope."""
    shape = PulseShape(shape)
    if shape is PulseShape.SECH:
        return 1.0 / ACOSH2
    if shape is PulseShape.DOUBLE_EXP:
        return 1.0 / (2.0 * LN2)
    return 1.0


def pulse_area(p: PulseEnvelope, truncation: float | None = None) -> float:
    """Time integral of the unit-coupling Rabi frequency over the support (rad).

    ``truncation`` overrides the support half-width in FWHM units;
    ``math.inf`` gives the untruncated area.
    """
    n = p.truncation if truncation is None else truncation
    tau = p.duration_fwhm
    if p.shape is PulseShape.SQUARE:
        return p.peak_rabi * tau * min(1.0, 2.0 * n)
    if math.isinf(n):
        return p.peak_rabi * tau * shape_area_factor(p.shape)
    if p.shape is PulseShape.SECH:
        a = 2.0 * ACOSH2 * n
        return p.peak_rabi * tau / (2.0 * ACOSH2) * 4.0 * math.atan(math.tanh(0.5 * a))
    return p.peak_rabi * tau / LN2 * -math.expm1(-2.0 * LN2 * n)


def peak_rabi_for_area(shape, duration_fwhm: float, area: float) -> float:
    return area / (duration_fwhm * shape_area_factor(shape))


def power_to_area(avg_power, rep_rate: float, shape, duration: float, calib: float):
    """Pulse area for an average laser power.

    ``calib`` converts peak optical power (W) into squared peak Rabi
    frequency ((rad/s)^2 per W). Peak power is the pulse energy
    ``avg_power / rep_rate`` divided by the effective intensity duration.
    """
    p = np.asarray(avg_power, dtype=float)
    if np.any(p < 0) or rep_rate <= 0 or duration <= 0 or calib <= 0:
        raise ValidationError("power_to_area requires non-negative power and positive constants")
    peak_power = p / (rep_rate * duration * shape_energy_factor(shape))
    area = np.sqrt(calib * peak_power) * duration * shape_area_factor(shape)
    return float(area) if np.ndim(area) == 0 else area


def area_to_power(area, rep_rate: float, shape, duration: float, calib: float):
    """Inverse of :func:`power_to_area`."""
    a = np.asarray(area, dtype=float)
    omega = a / (duration * shape_area_factor(shape))
    power = omega**2 / calib * rep_rate * duration * shape_energy_factor(shape)
    return float(power) if np.ndim(power) == 0 else power


def calib_for_pi_power(pi_power: float, rep_rate: float, shape, duration: float) -> float:
    """Calibration constant placing area pi at ``pi_power``."""
    omega = math.pi / (duration * shape_area_factor(shape))
    return omega**2 * rep_rate * duration * shape_energy_factor(shape) / pi_power


def raman_effective_rabi(omega_c: float, omega_d: float, detuning: float) -> float:
    """Two-photon Rabi frequency of a far-detuned Lambda system."""
    if abs(detuning) < 5.0 * max(abs(omega_c), abs(omega_d)):
        warnings.warn(
            "adiabatic elimination requires |detuning| >> drive amplitudes",
            AdiabaticityWarning,
            stacklevel=2,
        )
    if omega_c == 0 or omega_d == 0:
        return 0.0
    return omega_c * omega_d / (2.0 * detuning)


@dataclass(frozen=True)
class DriveRatio:
    """Amplitude ratio of the D coupling to the C coupling in the Raman beam."""

    r: float = 0.7

    def __post_init__(self):
        if not self.r >= 0:
            raise ValidationError("drive ratio must be non-negative")
