"""Recovery problem definition: data, hyperparameters, and objectives.

The target problem is MAP sparse recovery under a Bernoulli-Gaussian
(spike-and-slab) signal model.  Written as a minimization it reads

    minimize_{x, gamma}   ||y - A x||^2 + lam ||x||^2 + sum_i rho_i gamma_i

over x in R^p and binary activation indicators gamma_i = 1{x_i != 0}.  The
per-coefficient activation penalty is derived from the hyperparameters:

    rho_i = sigma2 * log( 2*pi*sigma2 * (1 - kappa_i)^2 / (lam * kappa_i^2) )

where kappa_i in (0,1) is the prior probability that coefficient i is active,
sigma2 the noise variance, and lam the ridge weight of the Gaussian slab.
Larger kappa_i (stronger prior belief of activity) lowers rho_i.

The refinement solver replaces gamma_i with the ratio x_i / mu_i of the
current candidate to a running mean of past iterates, giving at each step the
convex surrogate

    f(x) = ||y - A x||^2 + lam ||x||^2 + sum_i rho_i |x_i| / |mu_i|

(`surrogate_objective` below; the constant ||y||^2 is kept so f(0) = ||y||^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "NonPositivePenalty",
    "InfeasibleIndicator",
    "DivisionByFrozenWeight",
    "ProblemInstance",
    "compute_rho",
    "map_objective",
    "surrogate_objective",
    "indicator_of",
    "normalize_columns",
]


class NonPositivePenalty(ValueError):
    """Hyperparameters make some activation penalty non-positive.

    With rho_i <= 0 activating coefficient i is free (or rewarded) and the
    weighted subproblems lose their sparsity-inducing term, so the instance
    is rejected instead of silently accepted.
    """


class InfeasibleIndicator(ValueError):
    """A nonzero coefficient was paired with a zero activation indicator."""


class DivisionByFrozenWeight(ZeroDivisionError):
    """A non-frozen coordinate has a zero running mean, so its reweighted
    penalty rho_i / |mu_i| is undefined."""


def compute_rho(kappa, sigma2: float, lam: float) -> np.ndarray:
    """Per-coefficient activation penalties from the prior hyperparameters.

    rho_i = sigma2 * log(2*pi*sigma2*(1-kappa_i)^2 / (lam*kappa_i^2)),
    elementwise over ``kappa``; strictly decreasing in each kappa_i.

    Raises NonPositivePenalty if any rho_i <= 0, i.e. whenever
    2*pi*sigma2*(1-kappa_i)^2 <= lam*kappa_i^2.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if kappa.ndim != 1:
        raise ValueError("kappa must be a scalar or 1-D vector")
    if np.any(kappa <= 0.0) or np.any(kappa >= 1.0):
        raise ValueError("every kappa entry must lie strictly inside (0, 1)")
    if not sigma2 > 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if not lam > 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    rho = sigma2 * np.log(2.0 * np.pi * sigma2 * (1.0 - kappa) ** 2 / (lam * kappa**2))
    if np.any(rho <= 0.0):
        bad = int(np.argmin(rho))
        raise NonPositivePenalty(
            f"activation penalty rho[{bad}] = {rho[bad]:g} <= 0 for "
            f"kappa={kappa[bad]:g}, sigma2={sigma2:g}, lam={lam:g}"
        )
    return rho


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Immutable recovery problem: A (q x p), observation y, hyperparameters.

    The penalty vector ``rho`` is derived from ``kappa`` eagerly at
    construction and validated to be strictly positive.  Desk-scale checks
    may instead supply ``rho`` directly (then ``kappa`` may be omitted and
    ``lam`` may be zero); if both are given they must agree to 1e-12
    relative.

    Instances are read-only after construction (arrays have their write flag
    cleared) and safe to share across concurrent solver runs.
    """

    A: np.ndarray
    y: np.ndarray
    lam: float
    sigma2: float = 1.0
    kappa: np.ndarray | None = None
    rho: np.ndarray | None = None
    unit_columns: bool = False
    bounded_y: bool = False

    def __post_init__(self):
        A = _readonly(self.A)
        y = _readonly(self.y)
        if A.ndim != 2:
            raise ValueError(f"A must be a 2-D matrix, got shape {A.shape}")
        q, p = A.shape
        if q < 1 or p < 1:
            raise ValueError(f"A must be at least 1 x 1, got {q} x {p}")
        if y.shape != (q,):
            raise ValueError(f"y must have shape ({q},), got {y.shape}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(y)):
            raise ValueError("A and y must be finite")
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "sigma2", float(self.sigma2))

        if self.unit_columns:
            norms = np.linalg.norm(A, axis=0)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise ValueError(
                    f"unit_columns is set but column {bad} has norm {norms[bad]!r}"
                )
        if self.bounded_y and np.any(np.abs(y) > 1.0):
            raise ValueError("bounded_y is set but some |y_i| exceeds 1")

        kappa = self.kappa
        if kappa is not None:
            kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
            if kappa.size == 1:
                kappa = np.full(p, kappa[0])
            if kappa.shape != (p,):
                raise ValueError(f"kappa must have length {p}, got {kappa.shape}")
            object.__setattr__(self, "kappa", _readonly(kappa))

        if self.rho is None:
            if kappa is None:
                raise ValueError("either kappa or rho must be supplied")
            if not self.lam > 0.0:
                raise ValueError("lam must be positive when rho is derived from kappa")
            rho = compute_rho(kappa, self.sigma2, self.lam)
        else:
            if not self.lam >= 0.0:
                raise ValueError(f"lam must be non-negative, got {self.lam}")
            rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
            if rho.size == 1:
                rho = np.full(p, rho[0])
            if rho.shape != (p,):
                raise ValueError(f"rho must have length {p}, got {rho.shape}")
            if np.any(rho <= 0.0):
                raise NonPositivePenalty("every rho entry must be strictly positive")
            if kappa is not None:
                derived = compute_rho(kappa, self.sigma2, self.lam)
                if np.any(np.abs(rho - derived) > 1e-12 * np.abs(derived)):
                    raise ValueError(
                        "supplied rho disagrees with the value derived from kappa"
                    )
        object.__setattr__(self, "rho", _readonly(rho))

    @property
    def q(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    # Shared precomputations.  cached_property stores into __dict__ directly,
    # which is compatible with the frozen dataclass; values are themselves
    # read-only so sharing across threads stays safe.
    @cached_property
    def aty(self) -> np.ndarray:
        return _readonly(self.A.T @ self.y)

    @cached_property
    def y_sq(self) -> float:
        return float(self.y @ self.y)

    @cached_property
    def gram(self) -> np.ndarray:
        return _readonly(self.A.T @ self.A)

    @cached_property
    def op_norm_sq(self) -> float:
        """Largest eigenvalue of A^T A (squared spectral norm of A)."""
        return float(np.linalg.eigvalsh(self.gram)[-1])

    def with_observation(self, y: np.ndarray) -> "ProblemInstance":
        """New instance sharing A and hyperparameters but a different y.

        Copies the observation-independent precomputations (gram, operator
        norm), which dominate construction cost for large A.
        """
        inst = ProblemInstance(
            A=self.A,
            y=y,
            lam=self.lam,
            sigma2=self.sigma2,
            kappa=self.kappa,
            rho=self.rho,
            unit_columns=self.unit_columns,
            bounded_y=self.bounded_y,
        )
        for name in ("gram", "op_norm_sq"):
            if name in self.__dict__:
                inst.__dict__[name] = self.__dict__[name]
        return inst


def indicator_of(x) -> np.ndarray:
    """Activation indicator of x: 1.0 where x_i != 0, else 0.0."""
    x = np.asarray(x, dtype=float)
    return (x != 0.0).astype(float)


def _as_indicator(gamma, p: int) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (p,):
        raise ValueError(f"gamma must have length {p}, got {gamma.shape}")
    if not np.all((gamma == 0.0) | (gamma == 1.0)):
        raise ValueError("gamma entries must be exactly 0 or 1")
    return gamma


def map_objective(inst: ProblemInstance, x, gamma) -> float:
    """Exact MAP cost ||y - A x||^2 + lam ||x||^2 + sum_i rho_i gamma_i.

    ``gamma`` must be a feasible indicator for x: gamma_i = 1 wherever
    x_i != 0 (gamma_i = 1 with x_i = 0 is allowed and simply pays rho_i).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.p,):
        raise ValueError(f"x must have length {inst.p}, got {x.shape}")
    gamma = _as_indicator(gamma, inst.p)
    if np.any((x != 0.0) & (gamma == 0.0)):
        bad = int(np.argmax((x != 0.0) & (gamma == 0.0)))
        raise InfeasibleIndicator(f"x[{bad}] = {x[bad]!r} is nonzero but gamma[{bad}] = 0")
    r = inst.y - inst.A @ x
    return float(r @ r + inst.lam * (x @ x) + inst.rho @ gamma)


def surrogate_objective(inst: ProblemInstance, x, mu_prev, frozen=()) -> float:
    """Reweighted convex surrogate at x given the previous running mean.

    Returns ||y - A x||^2 + lam ||x||^2 + sum_{i not frozen} rho_i |x_i| / |mu_prev_i|.
    The constant ||y||^2 is included, so the value at x = 0 is ||y||^2;
    dropping it would shift every iteration's value equally and leave
    consecutive differences unchanged.

    Frozen coordinates must be exactly zero in x and are excluded from the
    penalty sum.  A zero running mean on a non-frozen coordinate raises
    DivisionByFrozenWeight.
    """
    x = np.asarray(x, dtype=float)
    mu_prev = np.asarray(mu_prev, dtype=float)
    if x.shape != (inst.p,) or mu_prev.shape != (inst.p,):
        raise ValueError("x and mu_prev must both have length p")
    active = np.ones(inst.p, dtype=bool)
    frozen_idx = np.fromiter(frozen, dtype=int) if len(frozen) else np.empty(0, dtype=int)
    if frozen_idx.size:
        active[frozen_idx] = False
        if np.any(x[frozen_idx] != 0.0):
            raise ValueError("frozen coordinates of x must be exactly zero")
    if np.any(mu_prev[active] == 0.0):
        bad = int(np.argmax(active & (mu_prev == 0.0)))
        raise DivisionByFrozenWeight(
            f"mu_prev[{bad}] = 0 on a non-frozen coordinate"
        )
    r = inst.y - inst.A @ x
    penalty = np.sum(inst.rho[active] * np.abs(x[active]) / np.abs(mu_prev[active]))
    return float(r @ r + inst.lam * (x @ x) + penalty)


def normalize_columns(A) -> tuple[np.ndarray, np.ndarray]:
    """Rescale the columns of A to unit Euclidean norm.

    Returns (A_unit, scales) with A_unit[:, i] = A[:, i] / scales[i].
    Rescaling is explicit rather than silent because it changes the meaning
    of any ground-truth coefficients tied to the original columns.
    """
    A = np.asarray(A, dtype=float)
    scales = np.linalg.norm(A, axis=0)
    if np.any(scales == 0.0):
        raise ValueError("cannot normalize a zero column")
    return A / scales, scales
