"""Exception hierarchy.

Two families matter to callers: configuration problems (bad input, caught
before any heavy numerics; CLI exit code 2) and numerical failures
(degenerate metric, singular pencil, non-convergence; CLI exit code 3).
"""


class CylresError(Exception):
    """Base class for all library errors."""


class ConfigError(CylresError):
    """Invalid or inconsistent configuration / parameters."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalError(CylresError):
    """Numerical failure during a computation."""


class GeometryError(NumericalError):
    """Non-positive metric sample, singular Jacobian, or similar."""


class DomainError(NumericalError):
    """Evaluation point outside the analyticity sector."""


class ResolutionError(ConfigError):
    """Grid too coarse for the requested quantity."""


class DegeneracyError(NumericalError):
    """Vanishing determinant of the deformed metric (reports where)."""

    def __init__(self, message, x=None, y=None, lam=None):
        self.x, self.y, self.lam = x, y, lam
        if x is not None:
            message += f" at (x={x!r}, y={y!r}, lambda={lam!r})"
        super().__init__(message)


class UnsupportedError(CylresError):
    """Operation not supported for this configuration (e.g. wrong BC)."""


class ShiftOnSpectrumError(NumericalError):
    """Shift-invert factorization broke down: sigma is (numerically) an eigenvalue."""


class SingularPencilError(NumericalError):
    """A - mu*M is singular at the requested mu."""


class IterationError(NumericalError):
    """Eigensolver did not converge; carries the best partial result."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)
