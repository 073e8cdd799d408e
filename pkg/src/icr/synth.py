"""Seeded synthetic recovery instances and the figures of merit.

Instances follow the standard compressed-sensing protocol: a Gaussian
measurement matrix with unit-normalized columns, a sparse ground truth with
a uniformly random support and Gaussian nonzero values, and an observation
y = A x0 + noise.  Everything is a pure function of the seed, so trials can
be generated independently (and in parallel) from per-trial seeds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance

__all__ = [
    "InvalidDims",
    "SynthInstance",
    "generate_instance",
    "mse",
    "support_match",
    "sparsity_level",
]


class InvalidDims(ValueError):
    """Requested dimensions or sparsity level are inconsistent."""


@dataclass(frozen=True, eq=False)
class SynthInstance:
    inst: ProblemInstance
    x0: np.ndarray
    s: int
    seed: object


def generate_instance(
    p: int,
    q: int,
    s: int,
    sigma: float,
    lam: float = 1e-2,
    kappa: float = 0.05,
    seed=0,
    nonneg_signal: bool = False,
) -> SynthInstance:
    """One seeded instance: unit-column Gaussian A, s-sparse x0, noisy y.

    ``seed`` may be an integer or a numpy SeedSequence.  The ground truth
    has exactly s nonzeros with standard Gaussian values (absolute values
    when ``nonneg_signal`` is set, for constrained-recovery experiments).
    """
    if p < 1 or q < 1:
        raise InvalidDims(f"need p >= 1 and q >= 1, got p={p}, q={q}")
    if s < 0 or s > p:
        raise InvalidDims(f"sparsity level must satisfy 0 <= s <= p, got s={s}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((q, p))
    A /= np.linalg.norm(A, axis=0)
    x0 = np.zeros(p)
    if s > 0:
        support = np.sort(rng.choice(p, size=s, replace=False))
        values = rng.standard_normal(s)
        if nonneg_signal:
            values = np.abs(values)
        x0[support] = values
    y = A @ x0 + sigma * rng.standard_normal(q)
    inst = ProblemInstance(
        A=A, y=y, lam=lam, sigma2=sigma**2, kappa=kappa, unit_columns=True
    )
    x0.setflags(write=False)
    return SynthInstance(inst=inst, x0=x0, s=s, seed=seed)


def mse(x, x_ref) -> float:
    """Mean squared error (1/p) ||x - x_ref||^2."""
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x.shape != x_ref.shape:
        raise ValueError("vectors must have equal length")
    d = x - x_ref
    return float(d @ d) / x.size


def support_match(x, x_ref, tau: float = 1e-6, over_union: bool = False) -> float:
    """Percentage of coordinates whose active/inactive status agrees.

    A coordinate counts as active when |value| > tau.  By default agreement
    is counted over all p coordinates; with ``over_union`` only coordinates
    active in either vector enter the denominator.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x.shape != x_ref.shape:
        raise ValueError("vectors must have equal length")
    a = np.abs(x) > tau
    b = np.abs(x_ref) > tau
    if over_union:
        union = a | b
        if not np.any(union):
            return 100.0
        return 100.0 * float(np.mean(a[union] == b[union]))
    return 100.0 * float(np.mean(a == b))


def sparsity_level(x, tau: float = 1e-6) -> int:
    """Number of coordinates with |x_i| > tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return int(np.count_nonzero(np.abs(np.asarray(x, dtype=float)) > tau))
