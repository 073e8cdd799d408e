"""Iterative convex refinement: the outer reweighting loop.

Each outer iteration solves one convex subproblem whose penalty weights are
rho_i / |mu_i|, where mu is the running arithmetic mean of all previous
iterates (seeded with mu = A^T y before the first iteration).  Coordinates
whose running mean falls below a threshold are frozen to zero for every
following iteration; with the default relative threshold rho_i / (2 (q + p))
a frozen coordinate is exactly what the next subproblem would have zeroed
anyway, so freezing only removes work.

The loop stops when consecutive iterates are closer than ``tol`` in
Euclidean norm and reports the pre-stop iterate together with the activation
estimate gamma_i = x_i / mu_i (which approaches 1 on the support and is 0
off it).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ProblemInstance, surrogate_objective
from .subproblems import (
    SubproblemSpec,
    solve_nonneg_weighted_qp,
    solve_weighted_l1_ridge,
)

__all__ = [
    "InnerSolverFailure",
    "IcrOptions",
    "IcrTrace",
    "IcrResult",
    "freeze_scale",
    "weights_from_mu",
    "update_mu",
    "stopping",
    "icr_run",
]

VARIANTS = ("unconstrained", "nonneg")
FREEZE_MODES = ("relative", "absolute")


class InnerSolverFailure(RuntimeError):
    """An inner solve failed to meet its certificate at some outer iteration."""

    def __init__(self, iteration: int, detail: str):
        super().__init__(f"inner solver failed at outer iteration {iteration}: {detail}")
        self.iteration = iteration


@dataclass
class IcrOptions:
    """Configuration of one refinement run.

    freeze_threshold_mode "relative" freezes coordinate i once
    |mu_i| <= rho_i * (1 - 1e-9) / (2 (q + p)); "absolute" compares |mu_i|
    against the fixed floor ``freeze_epsilon`` instead.  Inner accuracy
    should exceed the outer ``tol`` by at least two orders of magnitude so
    outer convergence is not an artifact of inner noise.
    """

    variant: str = "unconstrained"
    tol: float = 1e-6
    max_outer_iters: int = 500
    freeze_threshold_mode: str = "relative"
    freeze_epsilon: float = 1e-12
    inner_tol: float = 1e-8
    max_inner_iters: int = 10_000
    record_trace: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.freeze_threshold_mode not in FREEZE_MODES:
            raise ValueError(
                f"freeze_threshold_mode must be one of {FREEZE_MODES}, "
                f"got {self.freeze_threshold_mode!r}"
            )
        if not self.tol > 0 or not self.inner_tol > 0 or not self.freeze_epsilon > 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class IcrTrace:
    """Full per-iteration history of one run.

    For iteration n (1-based, list index n-1): ``xs[n-1]`` is the iterate,
    ``mus[n-1]`` the running mean of iterates 1..n, ``f_values[n-1]`` the
    surrogate value at the iterate under the weights used to produce it,
    ``frozen_sets[n-1]`` the coordinates pinned to zero during that solve.
    ``mu0`` is the weight seed A^T y, which is not part of the mean.
    """

    mu0: np.ndarray
    xs: list = field(default_factory=list)
    mus: list = field(default_factory=list)
    f_values: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    frozen_sets: list = field(default_factory=list)

    @property
    def n_iters(self) -> int:
        return len(self.xs)


@dataclass
class IcrResult:
    x_star: np.ndarray
    gamma_star: np.ndarray
    iterations: int
    converged: bool
    trace: IcrTrace | None = None


def freeze_scale(q: int, p: int) -> float:
    """Relative freeze factor 1 / (2 (q + p)), shaved by 1e-9 so the
    comparison |mu_i| <= scale * rho_i sits strictly inside the regime where
    the next subproblem's minimizer is guaranteed zero."""
    return (1.0 - 1e-9) / (2.0 * (q + p))


def weights_from_mu(
    rho: np.ndarray,
    mu: np.ndarray,
    frozen: frozenset[int],
    opts: IcrOptions,
    q_plus_p: int,
) -> tuple[np.ndarray, frozenset[int]]:
    """Penalty weights rho_i / |mu_i| and the updated frozen set.

    Coordinates already frozen stay frozen; active coordinates whose |mu_i|
    is at or below the threshold join the frozen set and carry no weight
    (the subproblem constrains them to zero instead).
    """
    rho = np.asarray(rho, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if opts.freeze_threshold_mode == "relative":
        thresholds = rho * ((1.0 - 1e-9) / (2.0 * q_plus_p))
    else:
        thresholds = np.full_like(rho, opts.freeze_epsilon)
    active = np.ones(rho.shape[0], dtype=bool)
    if frozen:
        active[np.fromiter(frozen, dtype=int)] = False
    newly = active & (np.abs(mu) <= thresholds)
    new_frozen = frozenset(frozen) | frozenset(np.flatnonzero(newly).tolist())
    keep = active & ~newly
    weights = np.zeros_like(rho)
    weights[keep] = rho[keep] / np.abs(mu[keep])
    return weights, new_frozen


def update_mu(mu_prev, x_n, n: int) -> np.ndarray:
    """Running mean of iterates 1..n, updated recursively.

    For n = 1 the result is x_n regardless of mu_prev (the weight seed is
    not part of the mean); for n >= 2 it is ((n-1) mu_prev + x_n) / n.
    """
    if n < 1:
        raise ValueError("iteration index must be >= 1")
    x_n = np.asarray(x_n, dtype=float)
    if n == 1:
        return x_n.copy()
    return ((n - 1) * np.asarray(mu_prev, dtype=float) + x_n) / n


def stopping(x_n, x_prev, tol: float) -> bool:
    """True iff ||x_n - x_prev||_2 <= tol (inclusive)."""
    x_n = np.asarray(x_n, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    if x_n.shape != x_prev.shape:
        raise ValueError("iterates must have equal length")
    return bool(np.linalg.norm(x_n - x_prev) <= tol)


def _gamma_from(x, mu, frozen: frozenset[int]) -> np.ndarray:
    gamma = np.zeros_like(x)
    ok = mu != 0.0
    if frozen:
        ok[np.fromiter(frozen, dtype=int)] = False
    gamma[ok] = x[ok] / mu[ok]
    return gamma


def icr_run(inst: ProblemInstance, opts: IcrOptions | None = None) -> IcrResult:
    """Run the refinement loop on ``inst``.

    Returns the pre-stop iterate x* = x^(n-1) on convergence (the stopping
    test bounds its distance to the final solve by ``tol``) together with
    gamma* = x* / mu^(n-1) on non-frozen coordinates.  If the iteration
    budget runs out, the last iterate is returned best-effort with
    ``converged=False``.  Identical inputs produce bit-identical results.
    """
    if opts is None:
        opts = IcrOptions()
    nonneg = opts.variant == "nonneg"
    p, q = inst.p, inst.q
    qp = q + p

    mu_prev = inst.aty.copy()  # weight seed; not an iterate mean
    frozen: frozenset[int] = frozenset()
    weights, frozen = weights_from_mu(inst.rho, mu_prev, frozen, opts, qp)
    x_prev = np.zeros(p)
    trace = IcrTrace(mu0=inst.aty.copy()) if opts.record_trace else None

    x_n = x_prev
    mu_n = mu_prev
    for n in range(1, opts.max_outer_iters + 1):
        warm = x_prev.copy()
        if frozen:
            warm[np.fromiter(frozen, dtype=int)] = 0.0
        if nonneg:
            warm = np.maximum(warm, 0.0)
        spec = SubproblemSpec(
            inst=inst,
            weights=weights,
            frozen=frozen,
            nonneg=nonneg,
            warm_start=warm,
            tol=opts.inner_tol,
            max_inner_iters=opts.max_inner_iters,
        )
        sol = solve_nonneg_weighted_qp(spec) if nonneg else solve_weighted_l1_ridge(spec)
        if not sol.converged:
            raise InnerSolverFailure(n, f"certificate residual {sol.kkt_residual:g}")
        x_n = sol.x
        f_n = surrogate_objective(inst, x_n, mu_prev, frozen=frozen)
        mu_n = update_mu(mu_prev, x_n, n)
        if trace is not None:
            trace.xs.append(x_n.copy())
            trace.mus.append(mu_n.copy())
            trace.f_values.append(f_n)
            trace.inner_iters.append(sol.inner_iters)
            trace.frozen_sets.append(frozen)
        if n >= 2 and stopping(x_n, x_prev, opts.tol):
            return IcrResult(
                x_star=x_prev,
                gamma_star=_gamma_from(x_prev, mu_prev, frozen),
                iterations=n,
                converged=True,
                trace=trace,
            )
        weights, frozen = weights_from_mu(inst.rho, mu_n, frozen, opts, qp)
        x_prev = x_n
        mu_prev = mu_n

    return IcrResult(
        x_star=x_n,
        gamma_star=_gamma_from(x_n, mu_n, frozen),
        iterations=opts.max_outer_iters,
        converged=False,
        trace=trace,
    )
