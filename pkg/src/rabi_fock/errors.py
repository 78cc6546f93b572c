"""Exception hierarchy shared by every module."""


class RabiFockError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RabiFockError, ValueError):
    """A parameter, tag or argument is outside its allowed domain."""


class CriticalityError(RabiFockError):
    """Raised when an operation needs |v_r| != |v_cr| but the couplings match."""


class WrongRegimeError(RabiFockError):
    """Raised when an operation needs |v_r| == |v_cr| but they differ."""


class CutoffInsufficientError(RabiFockError):
    """The Fock cutoff cannot hold the state being constructed."""

    def __init__(self, message, suggested_n_max=None):
        super().__init__(message)
        self.suggested_n_max = suggested_n_max


class NonConvergenceError(RabiFockError):
    """Eigenvalue iteration failed to converge."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegeneracyError(RabiFockError):
    """Two distinct states compete for the same label."""


class IllDefinedError(RabiFockError):
    """A geometric quantity is undefined (e.g. a vanishing sublattice)."""


class TrajectoryThroughOriginError(RabiFockError):
    """The phase-space loop passes (numerically) through the origin."""


class MethodDisagreementError(RabiFockError):
    """Independent routes to the same integer invariant disagree."""


class GridTooSmallError(RabiFockError):
    """A Wigner grid does not cover the support of the state."""

    def __init__(self, message, suggested_bounds=None):
        super().__init__(message)
        self.suggested_bounds = suggested_bounds


class UntrustedMomentsError(RabiFockError):
    """State population reaches the cutoff edge, moments are unreliable."""
