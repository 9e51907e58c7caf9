"""Dwell-time stability certificates and interval observers for linear
positive impulsive systems, with sampled-data and switched liftings."""

__version__ = "0.1.0"

from .polymat import Poly, PolyMatrix, HandelmanBasis, handelman_basis
from .lpcore import LinearProgram, LPOutcome, lp_solve, lp_feasibility
from .systems import (
    ImpulsiveSystem,
    DwellSpec,
    DisturbanceBounds,
    check_positivity,
    lift_sampled_data,
    lift_switched,
    load_system,
    save_system,
    save_report,
)
from .analysis import (
    transition_matrix,
    certify_range_spectral,
    certify_min_spectral,
    certify_range_clock,
    certify_min_clock,
    iss_bound,
)
from .errors import (
    PositivityError,
    FineGridViolation,
    GainRecoveryFailure,
    SystemFormatError,
)

__all__ = [
    "__version__",
    "Poly", "PolyMatrix", "HandelmanBasis", "handelman_basis",
    "LinearProgram", "LPOutcome", "lp_solve", "lp_feasibility",
    "ImpulsiveSystem", "DwellSpec", "DisturbanceBounds",
    "check_positivity", "lift_sampled_data", "lift_switched",
    "load_system", "save_system", "save_report",
    "transition_matrix",
    "certify_range_spectral", "certify_min_spectral",
    "certify_range_clock", "certify_min_clock",
    "iss_bound",
    "PositivityError", "FineGridViolation", "GainRecoveryFailure",
    "SystemFormatError",
]
