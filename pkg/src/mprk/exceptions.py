"""Exception hierarchy shared across the package."""


class MPRKError(Exception):
    """Base class for all package errors."""


class SingularSystem(MPRKError):
    """``I - zA`` is singular to working precision."""


class PoleAtTwo(MPRKError):
    """The closed-form midpoint stability function has a pole at z = 2."""


class OverflowToInfinity(MPRKError, OverflowError):
    """A value exceeds the largest finite number of the target format."""


class DimensionTooSmall(MPRKError, ValueError):
    pass


class ConvergenceFailure(MPRKError):
    pass


class LengthMismatch(MPRKError, ValueError):
    pass


class WrongEquation(MPRKError, ValueError):
    pass


class ZeroEigenvalueSum(MPRKError, ZeroDivisionError):
    """The diagonal core of the fast-diagonalization preconditioner is singular."""


class BreakdownDetected(MPRKError):
    """A Krylov inner product lost positivity (SPD assumption violated)."""


class NonFiniteState(MPRKError, FloatingPointError):
    """A stage or state vector contains NaN or Inf."""


class UsageError(MPRKError, ValueError):
    pass
