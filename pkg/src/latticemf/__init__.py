"""Finite-volume lattice-fermion simulator with mean-field interactions."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    GeometryError,
    IntegratorError,
    LatticeMFError,
    NonConvergenceError,
    ResourceLimitError,
)
from .lattice import Box, DecayFunction, PeriodVector
from .fock import FockOperator, LocalOp, ModeSpace, SPIN_HALF, SPINLESS
from .interactions import (
    Atom,
    Interaction,
    LongRangeModel,
    Schedule,
    TimeDependentModel,
    build_bcs_model,
    constant_model,
)
from .states import LatticeState, Mixture, ProductStateSpec, product_state

__all__ = [
    "Atom",
    "Box",
    "ConfigError",
    "DecayFunction",
    "FockOperator",
    "GeometryError",
    "IntegratorError",
    "Interaction",
    "LatticeMFError",
    "LatticeState",
    "LocalOp",
    "LongRangeModel",
    "Mixture",
    "ModeSpace",
    "NonConvergenceError",
    "PeriodVector",
    "ProductStateSpec",
    "ResourceLimitError",
    "SPINLESS",
    "SPIN_HALF",
    "Schedule",
    "TimeDependentModel",
    "build_bcs_model",
    "constant_model",
    "product_state",
]
