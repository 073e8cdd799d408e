"""Exact small-scale minimization by support enumeration, plus baselines.

For a fixed activation pattern the MAP objective reduces to ridge regression
on the active columns, so the exact global minimizer over patterns of size
up to ``max_support`` is found by enumerating supports, solving the
restricted normal equations in batches, and keeping the cheapest.  The cost
of a support S uses the identity

    cost(S) = ||y||^2 - b_S^T x_S + sum_{i in S} rho_i,

valid at the solution of (G_SS + lam I) x_S = b_S with G = A^T A, b = A^T y.
Enumeration is exact only at desk scale; the budget guard keeps it there.

`elastic_net` is the convex relaxation baseline: the weighted-l1 + ridge
problem with constant weights rho (no reweighting).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from .model import ProblemInstance, map_objective
from .subproblems import SubproblemSpec, solve_weighted_l1_ridge

__all__ = [
    "SingularSystem",
    "BudgetExceeded",
    "OracleResult",
    "ridge_on_support",
    "global_enumeration",
    "elastic_net",
]

# Supports are solved in batches of this many right-hand sides to bound the
# working memory of the stacked normal equations.
ENUM_CHUNK = 4096


class SingularSystem(np.linalg.LinAlgError):
    """A restricted normal-equations system is singular (lam = 0 and the
    selected columns are linearly dependent)."""


class BudgetExceeded(RuntimeError):
    """The requested enumeration needs more supports than the budget allows."""

    def __init__(self, required: int, budget: int):
        super().__init__(
            f"enumeration needs {required} supports, exceeding the budget of {budget}"
        )
        self.required = required
        self.budget = budget


@dataclass
class OracleResult:
    x_g: np.ndarray
    gamma_g: np.ndarray
    cost: float
    supports_examined: int


def ridge_on_support(inst: ProblemInstance, support) -> tuple[np.ndarray, float]:
    """Ridge solve restricted to ``support``; zero elsewhere.

    Returns (x, cost) where x solves (A_S^T A_S + lam I) x_S = A_S^T y and
    cost is the full objective value including the activation penalties of
    every index in S (even ones the solve happens to zero).
    """
    support = sorted(set(int(i) for i in support))
    if support and (support[0] < 0 or support[-1] >= inst.p):
        raise ValueError("support indices out of range")
    x = np.zeros(inst.p)
    if support:
        idx = np.array(support, dtype=int)
        gsub = inst.gram[np.ix_(idx, idx)] + inst.lam * np.eye(len(idx))
        try:
            x[idx] = np.linalg.solve(gsub, inst.aty[idx])
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(
                f"normal equations singular on support {tuple(support)} with lam={inst.lam}"
            ) from exc
    gamma = np.zeros(inst.p)
    gamma[support] = 1.0
    return x, map_objective(inst, x, gamma)


def _chunked(iterable, size):
    it = iter(iterable)
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def global_enumeration(
    inst: ProblemInstance, max_support: int | None = None, budget: int = 1 << 20
) -> OracleResult:
    """Exact minimizer over all supports of size <= max_support.

    With ``max_support = p`` (the default) this is the global optimum of the
    MAP objective.  Ties are broken towards the smaller support, then the
    lexicographically smallest index tuple; the reduction is therefore
    independent of evaluation order.  Raises BudgetExceeded (reporting the
    required count) before doing any work if the support count is too large.
    """
    p = inst.p
    kmax = p if max_support is None else min(int(max_support), p)
    if kmax < 0:
        raise ValueError("max_support must be non-negative")
    required = sum(math.comb(p, k) for k in range(kmax + 1))
    if required > budget:
        raise BudgetExceeded(required, budget)

    glam = inst.gram + inst.lam * np.eye(p)
    b = inst.aty
    rho = inst.rho
    best_cost = inst.y_sq
    best_support: tuple[int, ...] = ()
    for k in range(1, kmax + 1):
        for block in _chunked(combinations(range(p), k), ENUM_CHUNK):
            idx = np.array(block, dtype=int)
            gsub = glam[idx[:, :, None], idx[:, None, :]]
            bsub = b[idx]
            try:
                xs = np.linalg.solve(gsub, bsub[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(
                    f"a size-{k} support is singular with lam={inst.lam}"
                ) from exc
            costs = inst.y_sq - np.einsum("mk,mk->m", bsub, xs) + rho[idx].sum(axis=1)
            j = int(np.argmin(costs))  # first minimum = lexicographically smallest
            if costs[j] < best_cost:
                best_cost = float(costs[j])
                best_support = tuple(int(i) for i in idx[j])

    x_g, cost = ridge_on_support(inst, best_support)
    gamma_g = np.zeros(p)
    gamma_g[list(best_support)] = 1.0
    return OracleResult(x_g=x_g, gamma_g=gamma_g, cost=cost, supports_examined=required)


def elastic_net(inst: ProblemInstance, tol: float = 1e-8) -> np.ndarray:
    """Convex baseline: weighted-l1 + ridge with constant weights rho.

    Identical to the first refinement subproblem when every |mu_i| seed is 1.
    Returns the solution vector; use the subproblem API directly if the
    certificate or iteration count is needed.
    """
    spec = SubproblemSpec(
        inst=inst,
        weights=inst.rho.copy(),
        frozen=frozenset(),
        nonneg=False,
        warm_start=np.zeros(inst.p),
        tol=tol,
    )
    return solve_weighted_l1_ridge(spec).x
