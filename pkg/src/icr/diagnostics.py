"""Runtime convergence checks evaluated on recorded solver traces.

Two properties of the refinement loop are turned into falsifiable checks on
finite traces:

* the sequence of per-iteration surrogate values a_n = f_n(x^(n)) should be
  quasi-Cauchy, i.e. |a_{n+1} - a_n| decays at least like c'/n
  (`quasi_cauchy_check` fits c' empirically and tests that the scaled
  differences n |a_{n+1} - a_n| do not grow);
* once a coordinate's running mean drops below its freeze threshold
  rho_j / (2 (q + p)), the coordinate must stay exactly zero in every later
  iterate (`freezing_monitor`); violations indicate an implementation bug.

Checks are pure functions of the trace: re-running yields identical
reports.  Reports serialize with ``to_dict`` for the CLI's JSON output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import IcrTrace
from .model import ProblemInstance, surrogate_objective

__all__ = [
    "TraceTooShort",
    "ConvergenceReport",
    "FreezeViolation",
    "FreezingReport",
    "MonotoneStepReport",
    "quasi_cauchy_check",
    "freezing_monitor",
    "monotone_step_check",
]

# A trailing-quartile max of the scaled differences beyond this multiple of
# the leading-quartile max counts as growth rather than noise.
QUARTILE_RATIO = 3.0


class TraceTooShort(ValueError):
    """The trace has too few iterations to fit the decay constant."""


@dataclass
class ConvergenceReport:
    """Outcome of the scaled-difference decay check.

    ``deltas[n-1]`` is |f_{n+1}(x^(n+1)) - f_n(x^(n))| and ``scaled`` the
    same multiplied by n.  ``c_prime`` is the post-burn-in maximum of the
    scaled sequence, so by construction no scaled entry past the burn-in
    exceeds it; ``max_violation`` instead quantifies growth, the amount by
    which the trailing-quartile max exceeds QUARTILE_RATIO times the
    leading-quartile max (0 when the bound holds, matching ``passed``).
    """

    burn_in: int
    c_prime: float
    max_violation: float
    passed: bool
    deltas: np.ndarray = field(repr=False)
    scaled: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "burn_in": self.burn_in,
            "c_prime": self.c_prime,
            "max_violation": self.max_violation,
            "passed": self.passed,
            "deltas": [float(v) for v in self.deltas],
            "scaled_deltas": [float(v) for v in self.scaled],
        }


def quasi_cauchy_check(trace: IcrTrace, burn_in_fraction: float = 0.3) -> ConvergenceReport:
    """Check that scaled consecutive surrogate differences stay bounded.

    With N recorded iterations and N0 = ceil(burn_in_fraction * N), the
    constant is fitted as c' = max_{N0 < n <= N-1} n |f_{n+1}(x^(n+1)) -
    f_n(x^(n))|.  The check passes iff every value is finite and, within the
    post-burn-in scaled sequence, the maximum over its last quarter does not
    exceed QUARTILE_RATIO times the maximum over its first quarter.
    """
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    n_total = trace.n_iters
    if n_total < 5:
        raise TraceTooShort(f"need at least 5 iterations, trace has {n_total}")
    f = np.asarray(trace.f_values, dtype=float)
    deltas = np.abs(np.diff(f))  # deltas[n-1] pairs iterations n and n+1
    scaled = deltas * np.arange(1, n_total)
    burn_in = math.ceil(burn_in_fraction * n_total)
    post = scaled[burn_in:]

    finite = bool(np.all(np.isfinite(f)))
    c_prime = float(np.max(post)) if post.size and finite else 0.0
    if post.size and finite:
        qsize = max(1, post.size // 4)
        head_max = float(np.max(post[:qsize]))
        tail_max = float(np.max(post[-qsize:]))
        violation = max(0.0, tail_max - QUARTILE_RATIO * head_max)
    elif finite:
        violation = 0.0
    else:
        violation = float("inf")
    return ConvergenceReport(
        burn_in=burn_in,
        c_prime=c_prime,
        max_violation=violation,
        passed=finite and violation == 0.0,
        deltas=deltas,
        scaled=scaled,
    )


@dataclass
class FreezeViolation:
    coord: int
    mean_iter: int  # running-mean index whose magnitude was sub-threshold
    iterate: int  # later iteration where the coordinate was nonzero
    value: float


@dataclass
class FreezingReport:
    violations: list[FreezeViolation]
    checked: int  # sub-threshold (coordinate, mean-index) pairs examined

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "clean": self.clean,
            "checked": self.checked,
            "violations": [
                {
                    "coord": v.coord,
                    "mean_iter": v.mean_iter,
                    "iterate": v.iterate,
                    "value": v.value,
                }
                for v in self.violations
            ],
        }


def freezing_monitor(trace: IcrTrace, inst: ProblemInstance) -> FreezingReport:
    """Verify the freezing implication on a recorded trace.

    For every coordinate j and running-mean index n (including the seed at
    n = 0) with |mu_j^(n)| < rho_j / (2 (q + p)), every later recorded
    iterate must have x_j exactly zero.  Violations are reported, not
    raised: on instances satisfying unit columns and bounded entries they
    indicate an implementation bug.
    """
    alpha = 1.0 / (2.0 * (inst.q + inst.p))
    thresholds = alpha * inst.rho
    mus = [trace.mu0] + list(trace.mus)  # index n = 0 .. N
    xs = list(trace.xs)  # iterate m lives at xs[m-1]
    n_iters = len(xs)
    violations: list[FreezeViolation] = []
    checked = 0
    for n in range(0, n_iters):  # means with at least one later iterate
        below = np.abs(mus[n]) < thresholds
        if not np.any(below):
            continue
        checked += int(np.count_nonzero(below))
        for m in range(n + 1, n_iters + 1):
            bad = below & (xs[m - 1] != 0.0)
            for j in np.flatnonzero(bad):
                violations.append(
                    FreezeViolation(
                        coord=int(j),
                        mean_iter=n,
                        iterate=m,
                        value=float(xs[m - 1][j]),
                    )
                )
    return FreezingReport(violations=violations, checked=checked)


@dataclass
class MonotoneStepReport:
    max_excess: float
    ok: bool
    excesses: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_excess": self.max_excess,
            "excesses": [float(v) for v in self.excesses],
        }


def monotone_step_check(
    trace: IcrTrace, inst: ProblemInstance, inner_tol: float = 1e-8
) -> MonotoneStepReport:
    """Each solve must not exceed the previous iterate under its own weights.

    For every n, f_{n+1}(x^(n+1)) <= f_{n+1}(x~^(n)) + inner_tol (1 +
    ||x^(n)||_1) must hold, where x~^(n) is the previous iterate with the
    coordinates newly frozen at step n+1 zeroed (the warm start actually
    handed to the solve).  The excess above the slack is reported per step.
    """
    n_iters = trace.n_iters
    excesses = np.zeros(max(n_iters - 1, 0))
    for n in range(1, n_iters):
        frozen_next = trace.frozen_sets[n]
        x_prev = trace.xs[n - 1].copy()
        if frozen_next:
            x_prev[np.fromiter(frozen_next, dtype=int)] = 0.0
        bound = surrogate_objective(inst, x_prev, trace.mus[n - 1], frozen=frozen_next)
        slack = inner_tol * (1.0 + float(np.sum(np.abs(trace.xs[n - 1]))))
        excesses[n - 1] = trace.f_values[n] - (bound + slack)
    max_excess = float(np.max(excesses)) if excesses.size else 0.0
    return MonotoneStepReport(max_excess=max_excess, ok=max_excess <= 0.0, excesses=excesses)
