"""Exception hierarchy shared by all sivsim modules."""


class SivSimError(Exception):
    """Base class for all errors raised by sivsim."""


class ValidationError(SivSimError, ValueError):
    """Invalid user input (parameters, configuration, sweep strings)."""


class ConstraintInfeasibleError(ValidationError):
    """A set of observables cannot be reproduced by non-negative rates."""


class InvalidTransitionError(ValidationError):
    """A drive references a transition that is not defined for the operation."""


class NumericalError(SivSimError):
    """Base class for failures of the numerical machinery."""


class StiffnessError(NumericalError):
    """The adaptive integrator's step size underflowed."""


class IntegrationAccuracyError(NumericalError):
    """Trace drift of an integrated state exceeded the allowed bound."""


class FitDiagnosticError(NumericalError):
    """A curve fit could not be performed on the supplied data."""


class UndefinedVisibilityError(NumericalError):
    """Visibility is undefined because upper + lower vanishes."""

    def __init__(self, index):
        super().__init__(f"visibility undefined at index {index}: upper + lower == 0")
        self.index = index
