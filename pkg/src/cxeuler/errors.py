"""Exception types raised by the solvers and experiments."""


class RadiusUndetermined(ValueError):
    """Too few coefficients above the noise floor to fit a decay rate."""


class StepRejected(FloatingPointError):
    """A time step produced (or started from) a non-finite state."""


class ResolutionExhausted(RuntimeError):
    """Spectral tail beyond 2K/3 exceeded the configured threshold.

    This is the expected signature of the ill-posed dynamics, not a bug.
    ``state`` holds the last state that passed the check.
    """

    def __init__(self, message, state=None, tail=None):
        super().__init__(message)
        self.state = state
        self.tail = tail


class InvalidFitWindow(RuntimeError):
    """Perturbation left the linear regime before the fit window closed."""


class ThresholdOnSpectrum(ValueError):
    """An eigenvalue sits on the dichotomy line Re(lambda) = gamma."""


class KBelowK0(ValueError):
    """Eigenvalue groups are not separated at this wavenumber."""


class HypothesisViolation(ValueError):
    """A structural assumption on the local system fails."""


class OutsideAnalyticityBall(ValueError):
    """Argument norm exceeds a quarter of the Taylor series radius."""


class NoContraction(RuntimeError):
    """Fixed-point iteration did not reach tolerance within the budget."""


class NuTooLarge(RuntimeError):
    """Semigroup constants grow along k: the smoothing rate is too large."""
