"""Dyadic coupling of the simulated area walk with its Gaussian surrogate."""
from .dyadic import (
    DyadicSet,
    NodeMatrices,
    SingularNode,
    TailReport,
    build_Gr,
    build_HE,
    build_Mr,
    conditional_matrices,
    dyadic_decomposition,
    tail_statistics,
)
from .subcouplers import (
    AssignmentSubcoupler,
    EdgeworthSubcoupler,
    IndependentSubcoupler,
    NodeBatch,
    Subcoupler,
    make_subcoupler,
)
from .walk import (
    CoupledBatch,
    CoupledTrajectory,
    GuardConfig,
    couple_batch,
    couple_children,
    couple_root,
    coupling_error,
    run_coupled_walk,
    run_trees,
    write_trajectory_csv,
)

__all__ = [
    "AssignmentSubcoupler",
    "CoupledBatch",
    "CoupledTrajectory",
    "DyadicSet",
    "EdgeworthSubcoupler",
    "GuardConfig",
    "IndependentSubcoupler",
    "NodeBatch",
    "NodeMatrices",
    "SingularNode",
    "Subcoupler",
    "TailReport",
    "build_Gr",
    "build_HE",
    "build_Mr",
    "conditional_matrices",
    "couple_batch",
    "couple_children",
    "couple_root",
    "coupling_error",
    "dyadic_decomposition",
    "make_subcoupler",
    "run_coupled_walk",
    "run_trees",
    "tail_statistics",
    "write_trajectory_csv",
]
