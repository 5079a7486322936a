"""Exception hierarchy shared by all modules."""


class OptosyncError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(OptosyncError, ValueError):
    """A physical or numerical parameter is out of its allowed range."""


class IntegrationError(OptosyncError):
    """The ODE integrator could not complete the requested run."""


class StepSizeUnderflow(IntegrationError):
    pass


class NonFinite(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class PhaseUndefined(OptosyncError):
    """Oscillation action below the floor where a phase is meaningful."""


class UndersampledPhase(OptosyncError):
    """Phase increments between samples are ambiguous modulo 2*pi."""


class NotSynchronized(OptosyncError):
    """Late-time phase difference drifts or oscillates above threshold."""

    def __init__(self, message, phi_stat=float("nan"), phi_amp=float("nan"),
                 drift=float("nan")):
        super().__init__(message)
        self.phi_stat = phi_stat
        self.phi_amp = phi_amp
        self.drift = drift


class PhysicalityLost(OptosyncError):
    """Covariance matrix violates the uncertainty relation."""


class WindowTooShort(OptosyncError, ValueError):
    pass


class UnphysicalState(OptosyncError, ValueError):
    pass


class BranchRadicandNegative(OptosyncError, ValueError):
    pass


class DomainError(OptosyncError, ValueError):
    pass


class NoSignChange(OptosyncError):
    """Bisection predicate agrees at both ends of the bracket."""


class MaxIterations(OptosyncError):
    pass
