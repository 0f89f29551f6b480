"""Distributed adaptive-steplength stochastic approximation for monotone Nash games.

The package solves strongly monotone stochastic variational inequalities
VI(X, F) by projected stochastic approximation in which every player runs
its own diminishing stepsize sequence.  It ships the adaptive per-player
rules (DASA), harmonic baselines (HSA), a worst-case error-bound calculus
that certifies the adaptive rules as error-minimizing, and a seeded
Monte-Carlo experiment harness built around a bandwidth-sharing network
game.
"""

from dasa.vi import (
    Box,
    DecisionVector,
    FeasibleSet,
    GameInstance,
    MappingPair,
    Polyhedron,
    ProblemConstants,
    ProductOfBoxes,
    estimate_constants,
    evaluate_mapping,
    natural_residual,
    project,
    sample_noisy_mapping,
)
from dasa.stepsize import (
    CentralizedAdaptivePolicy,
    DasaPlayerPolicy,
    HarmonicPolicy,
    coordination_ratio,
    validate_assumption2,
)
from dasa.error_model import (
    ErrorRecursion,
    evaluate_error,
    minimizer_gap,
    optimal_steps,
    predicted_vs_observed,
)
from dasa.engine import (
    ReplicationResult,
    SolverConfig,
    reduce_mse,
    run_replications,
    run_sa,
    run_sa_identical,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CentralizedAdaptivePolicy",
    "DasaPlayerPolicy",
    "DecisionVector",
    "ErrorRecursion",
    "FeasibleSet",
    "GameInstance",
    "HarmonicPolicy",
    "MappingPair",
    "Polyhedron",
    "ProblemConstants",
    "ProductOfBoxes",
    "ReplicationResult",
    "SolverConfig",
    "coordination_ratio",
    "estimate_constants",
    "evaluate_error",
    "evaluate_mapping",
    "minimizer_gap",
    "natural_residual",
    "optimal_steps",
    "predicted_vs_observed",
    "project",
    "reduce_mse",
    "run_replications",
    "run_sa",
    "run_sa_identical",
    "sample_noisy_mapping",
    "validate_assumption2",
]
