"""Exception hierarchy shared by all tsteer modules."""


class TsteerError(Exception):
    """Base class for all library errors."""


class NonZeroMean(TsteerError, ValueError):
    """A field that must be average-free has a non-negligible mean."""


class UnsupportedOrder(TsteerError, ValueError):
    """Requested Sobolev order is outside the supported range."""


class LengthConditionViolated(TsteerError, ValueError):
    """The covering squares are too large for the control rectangle."""


class NotASquare(TsteerError, ValueError):
    """The number of covering squares is not a perfect square."""


class StepTooLarge(TsteerError, ValueError):
    """Flow step exceeds the admissible fraction of the phase length."""


class InactiveTime(TsteerError, ValueError):
    """A window-only quantity was requested outside every control window."""


class ParallelModes(TsteerError, ValueError):
    """Two wave vectors are parallel where independence is required."""


class CflViolation(TsteerError, RuntimeError):
    """The adaptive time step collapsed below the admissible floor."""


class BlowupDetected(TsteerError, RuntimeError):
    """The solution norm exceeded the blow-up threshold."""


class BudgetExceeded(TsteerError, ValueError):
    """A dense linear-algebra budget was exceeded."""


class TargetUnreachable(TsteerError, RuntimeError):
    """Least-squares control synthesis missed the residual target.

    The best residual found is available as ``best_residual``.
    """

    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class SigmaTooSmall(TsteerError, ValueError):
    """The scaling constant does not fit into the control horizon."""


class SupportViolation(TsteerError, ValueError):
    """A control is nonzero outside its admissible support."""


class DependentAverages(TsteerError, ValueError):
    """Cut fields have (nearly) linearly dependent averages."""


class ConfigError(TsteerError, ValueError):
    """Malformed or inconsistent configuration file."""
