"""Exception hierarchy shared by all mflq modules."""


class MFLQError(Exception):
    """Base class for all errors raised by this package."""


# --- model / input validation ---

class DimensionMismatch(MFLQError):
    pass


class NotSymmetric(MFLQError):
    pass


class NotPositiveDefinite(MFLQError):
    pass


class NonPositiveRho(MFLQError):
    pass


class NegativeTime(MFLQError):
    pass


# --- Riccati solvers ---

class BlowUp(MFLQError):
    """Finite escape of a differential Riccati path (indefinite state weight)."""


class StepTooCoarse(MFLQError):
    """Grid-refinement check failed: halving the step moved the initial value."""


class ImaginaryAxisEigenvalue(MFLQError):
    """The Hamiltonian matrix has an eigenvalue too close to the imaginary axis."""


class SubspaceNotGraph(MFLQError):
    """Stable invariant subspace is not a graph: no stabilizing solution exists."""


class AsymmetricResult(MFLQError):
    pass


# --- diagnostics / mean field ---

class NotPSD(MFLQError):
    """A symmetric square root was requested of a matrix that is not PSD."""


class NotStabilizing(MFLQError):
    """An operation required a rho-stabilizing solution and did not get one."""


class Unclassified(MFLQError):
    """No stabilization theorem applies to the given problem data."""


# --- control / simulation ---

class GridMismatch(MFLQError):
    pass


class NonFiniteState(MFLQError):
    """NaN or overflow encountered while advancing agent states."""

    def __init__(self, message, time_index=None):
        super().__init__(message)
        self.time_index = time_index


class RegimeViolation(MFLQError):
    """A control-law construction was requested outside its validity regime."""


# --- scenario / CLI ---

class ParseError(MFLQError):
    pass


class UnknownField(MFLQError):
    pass


class MissingField(MFLQError):
    pass


class IoError(MFLQError):
    pass
