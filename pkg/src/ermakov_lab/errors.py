"""Exception and warning types shared across the package."""


class ErmakovLabError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ErmakovLabError, ValueError):
    """Non-finite or out-of-range input to a numerical operation."""


class UnstableLatticeError(ErmakovLabError):
    """One-turn matrix trace is outside (-2, 2); no periodic envelope exists.

    Carries the offending trace so callers can report the design failure.
    """

    def __init__(self, trace: float):
        self.trace = float(trace)
        super().__init__(
            f"lattice is unstable: |trace| = {abs(trace):.6f} >= 2 "
            f"(trace = {trace:.6f})"
        )


class SingularEnvelopeError(ErmakovLabError):
    """Envelope beta collapsed to (numerical) zero during propagation."""


class EigensolverError(ErmakovLabError):
    """Stationary eigensolve failed to converge or returned garbage."""


class ConfigError(ErmakovLabError):
    """Scenario configuration is invalid; message lists the diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid scenario config:\n" + "\n".join(self.diagnostics))


class AccuracyWarning(UserWarning):
    """Result is usable but a resolution/aliasing guard was tripped."""
