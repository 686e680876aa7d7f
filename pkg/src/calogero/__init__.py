"""Spin Calogero models built from dynamical r-matrices."""

from .errors import (BranchError, CalogeroError, CapabilityError, CayleyDomainError,
                     ConfigError, ConstructionError, FactorizationError, PreconditionError,
                     SingularityError)
from .liealg import LieAlgebraModel, SubalgebraSplit, build_model
from .rmatrix import RMatrixSpec, eval_r, eval_r_plus
from .dynamics import PhaseState, hamiltonian, lax, eom_rhs
from .models import get_model, random_state

__version__ = "0.1.0"

__all__ = [
    "BranchError", "CalogeroError", "CapabilityError", "CayleyDomainError", "ConfigError",
    "ConstructionError", "FactorizationError", "PreconditionError", "SingularityError",
    "LieAlgebraModel", "SubalgebraSplit", "build_model", "RMatrixSpec", "eval_r",
    "eval_r_plus", "PhaseState", "hamiltonian", "lax", "eom_rhs", "get_model", "random_state",
]
