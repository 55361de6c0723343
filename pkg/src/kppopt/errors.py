"""Exception types shared by the solvers and the CLI."""


class KPPError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(KPPError, ValueError):
    pass


class NonConvergence(KPPError):
    """Raised when an iteration cap is exhausted.

    ``best`` carries the best iterate seen (array or result object) and
    ``residual`` its residual norm, so callers can still inspect it.
    """

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SingularSystem(KPPError):
    pass


class DegenerateState(KPPError):
    """The state has no isolated critical points (e.g. constant theta)."""


class StructureViolation(KPPError):
    """A profile does not have exactly one jump per critical interval."""
