"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (bad motif, mask, sizes, ...)."""


class InfeasibleProcessError(RuntimeError):
    """The requested true process has no valid outcomes."""


class TrainingError(RuntimeError):
    """Optimization produced non-finite values; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class RejectionInfeasibleError(RuntimeError):
    """Rejection sampling acceptance rate fell below the configured floor."""
