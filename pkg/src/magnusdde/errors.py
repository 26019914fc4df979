"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid input: dimension mismatch, bad parameter, malformed config."""


class KrylovConvergenceError(RuntimeError):
    """Arnoldi iteration failed to reach the requested tolerance.

    Carries the best residual estimate achieved so the caller can decide
    whether the partial result is usable.
    """

    def __init__(self, message, residual_estimate):
        super().__init__(message)
        self.residual_estimate = residual_estimate


class GuardViolationError(RuntimeError):
    """A run was aborted because an invariant guard tripped."""

    def __init__(self, message, step, component=None):
        super().__init__(message)
        self.step = step
        self.component = component


class HarnessError(RuntimeError):
    """Verification harness could not establish a trusted result."""
