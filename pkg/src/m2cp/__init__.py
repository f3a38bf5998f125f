"""Markov two-components processes: exact algebra, simulation and statistical checks."""

from __future__ import annotations

__version__ = "0.1.0"

from .chains import (
    ChainError,
    HittingLaw,
    StochasticMatrix,
    derive_adapted_matrix,
    hitting_law,
    sync_chain_matrix,
    validate_stochastic,
)
from .model import (
    AdaptedFamily,
    IndependentChains,
    M2CPModel,
    ModelError,
    TargetChain,
    build_from_adapted,
    exact_cylinder_prob,
    sync_product,
)
from .trajectory import (
    INFINITY,
    Decomposition,
    DistributedSystem,
    Length,
    Trajectory,
    TrajectoryError,
    concat,
    decompose,
    gamma,
    induced_q_sequence,
    is_trajectory,
    join,
    meet,
    subtrajectory_lattice,
)

__all__ = [
    "__version__",
    "AdaptedFamily",
    "ChainError",
    "Decomposition",
    "DistributedSystem",
    "HittingLaw",
    "INFINITY",
    "IndependentChains",
    "Length",
    "M2CPModel",
    "ModelError",
    "StochasticMatrix",
    "TargetChain",
    "Trajectory",
    "TrajectoryError",
    "build_from_adapted",
    "concat",
    "decompose",
    "derive_adapted_matrix",
    "exact_cylinder_prob",
    "gamma",
    "hitting_law",
    "induced_q_sequence",
    "is_trajectory",
    "join",
    "meet",
    "subtrajectory_lattice",
    "sync_chain_matrix",
    "sync_product",
    "validate_stochastic",
]
