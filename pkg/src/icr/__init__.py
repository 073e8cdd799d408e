"""Sparse signal recovery under spike-and-slab priors.

The solver refines a sequence of convex weighted problems whose solutions
approach a MAP estimate of the sparse coefficients and their activation
pattern; exact desk-scale oracles, a convex baseline, convergence checks,
and a seeded benchmark harness round out the package.
"""

from .core import IcrOptions, IcrResult, IcrTrace, icr_run
from .model import (
    ProblemInstance,
    compute_rho,
    map_objective,
    normalize_columns,
    surrogate_objective,
)
from .oracle import OracleResult, elastic_net, global_enumeration, ridge_on_support
from .subproblems import (
    SubproblemSolution,
    SubproblemSpec,
    kkt_residual,
    soft_threshold,
    solve_nonneg_weighted_qp,
    solve_weighted_l1_ridge,
)
from .synth import SynthInstance, generate_instance, mse, sparsity_level, support_match

__all__ = [
    "IcrOptions",
    "IcrResult",
    "IcrTrace",
    "icr_run",
    "ProblemInstance",
    "compute_rho",
    "map_objective",
    "normalize_columns",
    "surrogate_objective",
    "OracleResult",
    "elastic_net",
    "global_enumeration",
    "ridge_on_support",
    "SubproblemSolution",
    "SubproblemSpec",
    "kkt_residual",
    "soft_threshold",
    "solve_nonneg_weighted_qp",
    "solve_weighted_l1_ridge",
    "SynthInstance",
    "generate_instance",
    "mse",
    "sparsity_level",
    "support_match",
]
