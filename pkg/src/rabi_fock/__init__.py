"""Generalized quantum Rabi model as a Fock-state lattice: spectra, defect states and their topology."""
from .errors import (
    CriticalityError,
    CutoffInsufficientError,
    DegeneracyError,
    GridTooSmallError,
    IllDefinedError,
    InvalidInputError,
    MethodDisagreementError,
    NonConvergenceError,
    RabiFockError,
    TrajectoryThroughOriginError,
    UntrustedMomentsError,
    WrongRegimeError,
)
from .model import FockCutoff, ModelParams, SpinFockVector, build_hamiltonian

__version__ = "0.1.0"

__all__ = [
    "CriticalityError",
    "CutoffInsufficientError",
    "DegeneracyError",
    "FockCutoff",
    "GridTooSmallError",
    "IllDefinedError",
    "InvalidInputError",
    "MethodDisagreementError",
    "ModelParams",
    "NonConvergenceError",
    "RabiFockError",
    "SpinFockVector",
    "TrajectoryThroughOriginError",
    "UntrustedMomentsError",
    "WrongRegimeError",
    "build_hamiltonian",
    "__version__",
]
