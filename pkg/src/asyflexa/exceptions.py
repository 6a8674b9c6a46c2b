"""Error types shared across the package."""


class StructuralError(ValueError):
    """Dimension mismatch, malformed configuration or unsupported structure."""


class DomainError(ValueError):
    """A numerical argument lies outside the domain where a formula is valid."""


class InvariantViolation(RuntimeError):
    """A runtime invariant of the method was broken (e.g. an infeasible iterate)."""


class ConvergenceError(RuntimeError):
    """An inner solver stopped before reaching its tolerance.

    The best iterate found so far is kept in ``best`` together with its
    optimality residual.
    """

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual
