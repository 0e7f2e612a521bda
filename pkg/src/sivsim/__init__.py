"""Density-matrix simulator for ultrafast optical control of the SiV- orbital qubit."""

from .engine import RotatingFrame, Trajectory, integrate_segment, propagator
from .estimators import (
    OpticalRamseyExperiment,
    PumpExperiment,
    RabiExperiment,
    RamanRabiExperiment,
    RamanRamseyExperiment,
)
from .exceptions import (
    ConstraintInfeasibleError,
    FitDiagnosticError,
    IntegrationAccuracyError,
    InvalidTransitionError,
    NumericalError,
    SivSimError,
    StiffnessError,
    UndefinedVisibilityError,
    ValidationError,
)
from .fitting import FitProblem, FitResult, extract_visibility, fit_least_squares
from .model import (
    SivParameters,
    Transition,
    default_parameters,
    dissipators,
    hamiltonian,
    params_from_observables,
    thermal_state,
)
from .pulses import DriveRatio, PulseEnvelope, PulseShape, power_to_area, pulse_area, raman_effective_rabi
from .sequences import (
    ExperimentResult,
    SequenceConfig,
    run_pump,
    run_rabi,
    run_raman_rabi,
    run_raman_ramsey,
    run_ramsey_optical,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
