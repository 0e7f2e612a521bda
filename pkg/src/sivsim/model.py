"""Four-level orbital model of the SiV- centre.

Basis ordering used throughout the package::

    0  |1>  lower ground
    1  |2>  upper ground
    2  |3>  lower excited
    3  |4>  upper excited

Angular frequencies and rates are in SI units (rad/s, 1/s), times in seconds.
The lab-frame energy of |1> is zero; rotating frames shift only the excited
manifold by the laser angular frequency.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import constants

from .exceptions import ConstraintInfeasibleError, InvalidTransitionError, ValidationError

TWO_PI = 2.0 * math.pi
HBAR = constants.hbar
K_B = constants.k

N_LEVELS = 4
GROUND = (0, 1)
EXCITED = (2, 3)

# Measured observables used to build the default parameter set.
DEFAULT_DELTA_G = TWO_PI * 48e9
DEFAULT_DELTA_E = TWO_PI * 259e9
DEFAULT_ZPL_FREQUENCY = 406.8e12
DEFAULT_T1_ORBIT = 35e-9
DEFAULT_T2_LOWER = 578e-12
DEFAULT_T2_UPPER = 279e-12
DEFAULT_GAMMA_PURE = TWO_PI * 160e6
DEFAULT_TEMPERATURE = 5.0
DEFAULT_BRANCHING = ((0.5, 0.5), (0.5, 0.5))


class Transition(str, enum.Enum):
    """Optical lines, ordered by decreasing frequency."""

    A = "A"
    B = "B"
    C = "C"
    D = "D"

    @property
    def ground(self) -> int:
        return 0 if self in (Transition.A, Transition.C) else 1

    @property
    def excited(self) -> int:
        return 3 if self in (Transition.A, Transition.B) else 2

    @classmethod
    def coerce(cls, value) -> "Transition":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise InvalidTransitionError(
                f"undefined transition {value!r}; expected one of A, B, C, D"
            ) from None


def boltzmann_factor(splitting: float, temperature: float) -> float:
    """exp(-hbar * splitting / (k_B * T)) for an angular splitting."""
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    return math.exp(-HBAR * splitting / (K_B * temperature))


@dataclass(frozen=True)
class SivParameters:
    """Rates, splittings and bath temperature of the four-level model.

    ``branching[i][j]`` is the fraction of radiative decay of excited state
    ``i`` (0: |3>, 1: |4>) into ground state ``j`` (0: |1>, 1: |2>).
    ``gamma_pure`` is the decay rate it adds to every ground-excited coherence.
    """

    delta_g: float = DEFAULT_DELTA_G
    delta_e: float = DEFAULT_DELTA_E
    zpl_frequency: float = DEFAULT_ZPL_FREQUENCY
    gamma_rad: float = 0.0
    branching: tuple = DEFAULT_BRANCHING
    gamma_g_down: float = 0.0
    gamma_g_up: float = 0.0
    gamma_e_down: float = 0.0
    gamma_e_up: float = 0.0
    gamma_pure: float = DEFAULT_GAMMA_PURE
    temperature: float = DEFAULT_TEMPERATURE
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        branching = tuple(tuple(float(x) for x in row) for row in self.branching)
        object.__setattr__(self, "branching", branching)
        if len(branching) != 2 or any(len(row) != 2 for row in branching):
            raise ValidationError("branching must be a 2x2 matrix")
        for row in branching:
            if min(row) < 0 or abs(sum(row) - 1.0) > 1e-12:
                raise ValidationError("branching rows must be non-negative and sum to 1")
        rates = {
            "gamma_rad": self.gamma_rad,
            "gamma_g_down": self.gamma_g_down,
            "gamma_g_up": self.gamma_g_up,
            "gamma_e_down": self.gamma_e_down,
            "gamma_e_up": self.gamma_e_up,
            "gamma_pure": self.gamma_pure,
        }
        for name, value in rates.items():
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be a finite rate >= 0, got {value}")
        if not 0 < self.delta_g < self.delta_e:
            raise ValidationError("splittings must satisfy delta_e > delta_g > 0")
        if self.zpl_frequency <= 0:
            raise ValidationError("zpl_frequency must be positive")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        for label, up, down, split in (
            ("ground", self.gamma_g_up, self.gamma_g_down, self.delta_g),
            ("excited", self.gamma_e_up, self.gamma_e_down, self.delta_e),
        ):
            if down == 0 and up == 0:
                continue
            expected = boltzmann_factor(split, self.temperature)
            if down == 0 or abs(up / down - expected) > 1e-9 * expected:
                raise ValidationError(
                    f"{label} thermalization violates detailed balance: "
                    f"up/down must equal {expected:.12g}"
                )

    def replace(self, **changes) -> "SivParameters":
        return replace(self, **changes)

    def without_dissipation(self) -> "SivParameters":
        return replace(
            self,
            gamma_rad=0.0,
            gamma_g_down=0.0,
            gamma_g_up=0.0,
            gamma_e_down=0.0,
            gamma_e_up=0.0,
            gamma_pure=0.0,
        )

    def coherence_decay_rate(self, i: int, j: int) -> float:
        """Free-evolution decay rate of rho[i, j] (i != j)."""
        out = self.population_loss_rates()
        rate = 0.5 * (out[i] + out[j])
        if (i in EXCITED) != (j in EXCITED):
            rate += self.gamma_pure
        return rate

    def population_loss_rates(self) -> np.ndarray:
        return np.array(
            [
                self.gamma_g_up,
                self.gamma_g_down,
                self.gamma_rad + self.gamma_e_up,
                self.gamma_rad + self.gamma_e_down,
            ]
        )

    @property
    def t1_orbit(self) -> float:
        return 1.0 / (self.gamma_g_up + self.gamma_g_down)

    @property
    def t2_lower(self) -> float:
        return 1.0 / self.coherence_decay_rate(0, 2)

    @property
    def t2_upper(self) -> float:
        return 1.0 / self.coherence_decay_rate(1, 3)


def params_from_observables(
    t1_orbit: float = DEFAULT_T1_ORBIT,
    t2_lower: float = DEFAULT_T2_LOWER,
    t2_upper: float = DEFAULT_T2_UPPER,
    gamma_pure: float = DEFAULT_GAMMA_PURE,
    temperature: float = DEFAULT_TEMPERATURE,
    gamma_rad: float | None = None,
    branching=DEFAULT_BRANCHING,
    delta_g: float = DEFAULT_DELTA_G,
    delta_e: float = DEFAULT_DELTA_E,
    zpl_frequency: float = DEFAULT_ZPL_FREQUENCY,
    rtol: float = 1e-6,
) -> SivParameters:
    """Solve the model rates from measured lifetimes.

    Ground thermalization follows from ``t1_orbit`` and detailed balance.
    The two optical coherence times then fix the radiative rate and the
    downward excited-state phonon rate (the upward one follows by detailed
    balance at ``delta_e``). When ``gamma_rad`` is supplied the system is
    overdetermined and it must agree with the solved value within ``rtol``.
    """
    for name, value in (
        ("t1_orbit", t1_orbit),
        ("t2_lower", t2_lower),
        ("t2_upper", t2_upper),
        ("gamma_pure", gamma_pure),
        ("temperature", temperature),
    ):
        if not value > 0:
            raise ValidationError(f"{name} must be positive, got {value}")
    if not t2_upper < t2_lower:
        raise ValidationError("t2_upper must be shorter than t2_lower")

    bg = boltzmann_factor(delta_g, temperature)
    be = boltzmann_factor(delta_e, temperature)
    g_sum = 1.0 / t1_orbit
    g_down = g_sum / (1.0 + bg)
    g_up = g_sum - g_down

    # rho_13: (g_up + gamma_rad + e_up)/2 + gamma_pure = 1/t2_lower
    # rho_24: (g_down + gamma_rad + e_down)/2 + gamma_pure = 1/t2_upper
    budget_lower = 2.0 * (1.0 / t2_lower - gamma_pure)
    budget_upper = 2.0 * (1.0 / t2_upper - gamma_pure)
    e_down = (budget_upper - budget_lower - (g_down - g_up)) / (1.0 - be)
    if e_down < 0:
        raise ConstraintInfeasibleError(
            "gamma_e_down >= 0 violated: t2_upper is too long relative to t2_lower"
        )
    e_up = be * e_down
    rad = budget_lower - g_up - e_up
    if rad <= 0:
        raise ConstraintInfeasibleError(
            "gamma_rad > 0 violated: pure dephasing and thermalization exceed 1/t2_lower"
        )
    if gamma_rad is not None and abs(gamma_rad - rad) > rtol * rad:
        raise ConstraintInfeasibleError(
            f"gamma_rad = {gamma_rad:.6g} 1/s is inconsistent with the coherence times; "
            f"they require gamma_rad = {rad:.6g} 1/s"
        )
    return SivParameters(
        delta_g=delta_g,
        delta_e=delta_e,
        zpl_frequency=zpl_frequency,
        gamma_rad=rad,
        branching=branching,
        gamma_g_down=g_down,
        gamma_g_up=g_up,
        gamma_e_down=e_down,
        gamma_e_up=e_up,
        gamma_pure=gamma_pure,
        temperature=temperature,
        metadata={"t1_spin_s": 2.4e-3},
    )


@lru_cache(maxsize=1)
def default_parameters() -> SivParameters:
    """Parameter set built from the measured lifetimes at 5 K."""
    return params_from_observables()


def transition_frequency(params: SivParameters, transition) -> float:
    """Lab-frame optical frequency of a line in Hz."""
    t = Transition.coerce(transition)
    f_c = params.zpl_frequency
    dg = params.delta_g / TWO_PI
    de = params.delta_e / TWO_PI
    return {
        Transition.A: f_c + de,
        Transition.B: f_c + de - dg,
        Transition.C: f_c,
        Transition.D: f_c - dg,
    }[t]


def thermal_state(params: SivParameters) -> np.ndarray:
    """Ground-manifold Boltzmann mixture (excited manifold empty)."""
    b = boltzmann_factor(params.delta_g, params.temperature)
    rho = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    rho[0, 0] = 1.0 / (1.0 + b)
    rho[1, 1] = b / (1.0 + b)
    return rho


def basis_state(index: int) -> np.ndarray:
    rho = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    rho[index, index] = 1.0
    return rho


def check_density_matrix(rho, *, trace_tol=1e-9, herm_tol=1e-12, psd_tol=1e-8) -> np.ndarray:
    """Return ``rho`` as a complex 4x4 array after checking the state invariants."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (N_LEVELS, N_LEVELS):
        raise ValidationError(f"density matrix must be 4x4, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise ValidationError(f"density matrix trace {np.trace(rho).real!r} differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -psd_tol:
        raise ValidationError("density matrix is not positive semidefinite")
    return rho


def _ket_bra(i: int, j: int) -> np.ndarray:
    op = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    op[i, j] = 1.0
    return op


def frame_diagonal(params: SivParameters, frame) -> np.ndarray:
    """Bare level energies (rad/s) in the frame rotating at ``frame.laser_frequency``."""
    if frame is None:
        offset = 0.0
    else:
        offset = TWO_PI * (params.zpl_frequency - frame.laser_frequency)
    return np.array([0.0, params.delta_g, offset, offset + params.delta_e])


def drive_terms(params: SivParameters, drives, frame):
    """Decompose drives into ``(G, c)`` pairs with ``H_drive(t) = sum c(t) G + h.c.``.

    ``G`` carries the per-transition amplitude scales and the optical phase on
    the ground-row/excited-column entries; ``c(t)`` is the envelope times the
    residual carrier phase relative to the frame.
    """
    terms = []
    for drive in drives:
        g = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
        for label, scale in drive.couplings.items():
            t = Transition.coerce(label)
            g[t.ground, t.excited] += 0.5 * scale * np.exp(1j * drive.phase)
        carrier = transition_frequency(params, drive.reference) + drive.carrier_detuning / TWO_PI
        offset = TWO_PI * (carrier - frame.laser_frequency) if frame is not None else 0.0
        terms.append((g, DriveCoefficient(drive, offset)))
    return terms


class DriveCoefficient:
    """``t -> envelope(t) * exp(i * offset * t)`` for one drive."""

    def __init__(self, drive, offset: float):
        self.drive = drive
        self.offset = offset

    def __call__(self, t):
        value = self.drive.value(t)
        if self.offset == 0.0:
            return value
        return value * np.exp(1j * self.offset * t)


def hamiltonian(params: SivParameters, drives, frame, t: float) -> np.ndarray:
    """Rotating-wave Hamiltonian (rad/s) at time ``t``."""
    h = np.diag(frame_diagonal(params, frame)).astype(complex)
    for g, coeff in drive_terms(params, drives, frame):
        c = coeff(t)
        h += c * g + np.conj(c) * g.conj().T
    return h


def dissipators(params: SivParameters) -> list:
    """Lindblad jump operators with their rates.

    Pure dephasing uses ``sqrt(2) * P_excited`` so that each ground-excited
    coherence decays at exactly ``gamma_pure``.
    """
    out = []
    for e_idx, e in enumerate(EXCITED):
        for g_idx, g in enumerate(GROUND):
            rate = params.gamma_rad * params.branching[e_idx][g_idx]
            if rate > 0:
                out.append((_ket_bra(g, e), rate))
    for op, rate in (
        (_ket_bra(0, 1), params.gamma_g_down),
        (_ket_bra(1, 0), params.gamma_g_up),
        (_ket_bra(2, 3), params.gamma_e_down),
        (_ket_bra(3, 2), params.gamma_e_up),
    ):
        if rate > 0:
            out.append((op, rate))
    if params.gamma_pure > 0:
        proj = np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex) * math.sqrt(2.0)
        out.append((proj, params.gamma_pure))
    return out


def apply_dissipator(diss, rho: np.ndarray) -> np.ndarray:
    """Action of the dissipator sum on a density matrix."""
    out = np.zeros_like(rho, dtype=complex)
    for op, rate in diss:
        opd = op.conj().T
        n = opd @ op
        out += rate * (op @ rho @ opd - 0.5 * (n @ rho + rho @ n))
    return out
