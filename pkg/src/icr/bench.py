"""Monte-Carlo experiment harness: configs, trial execution, CSV/JSON output.

An experiment is declared by an `ExperimentConfig`; `run_experiment`
materializes every trial from (master_seed, trial key) through a splittable
seed scheme, runs each requested method, and aggregates one `MetricsRow`
per (method, sparsity level).  Trials are independent and may execute in a
process pool; aggregation happens in trial order, so results and emitted
bytes do not depend on the parallelism level.

The timing column exists in the schema but is written as 0.0 unless
``timing`` is enabled: clock readings would break the byte-reproducibility
contract of rerunning a config.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import comb
from pathlib import Path

import numpy as np

from .core import IcrOptions, icr_run
from .idx import ImageSet, load_idx_images, write_pgm
from .model import ProblemInstance, compute_rho, map_objective
from .oracle import global_enumeration
from .subproblems import SubproblemSpec, solve_weighted_l1_ridge
from .synth import generate_instance, mse, sparsity_level, support_match

__all__ = [
    "CSV_HEADER",
    "KNOWN_METHODS",
    "ConfigError",
    "TrialFailure",
    "ExperimentConfig",
    "MetricsRow",
    "trial_seed",
    "run_experiment",
    "mnist_recovery_experiment",
    "emit_csv",
    "emit_json",
]

CSV_HEADER = (
    "method,p,q,s,lambda,kappa,sigma,trials,avg_cost,mse,"
    "support_match_pct,avg_sparsity,avg_iters,wall_time_s"
)

KNOWN_METHODS = ("ICR", "ICR-NN", "ElasticNet", "Oracle")

MNIST_PIXELS = 28 * 28


class ConfigError(ValueError):
    """The experiment description is invalid."""


class TrialFailure(RuntimeError):
    """A trial failed; carries the completed rows for partial emission."""

    def __init__(self, trial: tuple, cause: str, partial_rows: list):
        super().__init__(f"trial {trial} failed: {cause}")
        self.trial = trial
        self.cause = cause
        self.partial_rows = partial_rows


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description.

    ``kappa = None`` resolves to 0.05 for synthetic kinds and to the
    empirical active-pixel fraction of the loaded images for ``mnist``.
    ``jobs`` and output locations are execution details and are excluded
    from the config echo.
    """

    kind: str
    p: int = 512
    q: int = 128
    s: int = 30
    s_list: tuple[int, ...] | None = None
    sigma: float = 0.01
    lam: float = 1e-2
    kappa: float | None = None
    trials: int = 50
    master_seed: int = 0
    methods: tuple[str, ...] = ("ICR", "ElasticNet")
    tau: float = 1e-6
    outer_tol: float = 1e-6
    inner_tol: float = 1e-8
    max_outer: int = 500
    max_inner: int = 10_000
    oracle_budget: int = 1 << 20
    timing: bool = False
    jobs: int = 1
    images_path: str | None = None
    image_count: int = 20
    dump_dir: str | None = None

    def __post_init__(self):
        if self.kind not in ("synth-global", "synth-large", "sweep", "mnist"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise ConfigError(f"unknown method {m!r}; known: {KNOWN_METHODS}")
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.kind == "sweep":
            if not self.s_list:
                raise ConfigError("sweep requires a non-empty s_list")
            if len(set(self.s_list)) != len(self.s_list):
                raise ConfigError("s_list entries must be distinct")
            object.__setattr__(self, "s_list", tuple(int(v) for v in self.s_list))
        if "Oracle" in self.methods and self.kind != "synth-global":
            raise ConfigError("the Oracle method requires the synth-global kind")
        if self.kind == "synth-global":
            required = sum(comb(self.p, k) for k in range(self.p + 1))
            if required > self.oracle_budget:
                raise ConfigError(
                    f"synth-global needs full enumeration of {required} supports, "
                    f"exceeding the budget of {self.oracle_budget}"
                )
        if self.kind == "mnist" and self.image_count < 1:
            raise ConfigError("image_count must be >= 1")

    def sparsity_levels(self) -> tuple[int, ...]:
        return self.s_list if self.kind == "sweep" else (self.s,)

    def echo_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "p": self.p,
            "q": self.q,
            "sigma": self.sigma,
            "lambda": self.lam,
            "kappa": self.kappa,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "methods": list(self.methods),
            "tau": self.tau,
            "outer_tol": self.outer_tol,
            "inner_tol": self.inner_tol,
            "max_outer": self.max_outer,
            "max_inner": self.max_inner,
            "oracle_budget": self.oracle_budget,
            "timing": self.timing,
        }
        if self.kind == "sweep":
            doc["s_list"] = list(self.s_list)
        elif self.kind == "mnist":
            doc["images_path"] = self.images_path
            doc["image_count"] = self.image_count
        else:
            doc["s"] = self.s
        return doc


@dataclass
class MetricsRow:
    method: str
    p: int
    q: int
    s: int
    lam: float
    kappa: float
    sigma: float
    trials: int
    avg_cost: float
    mse: float
    support_match_pct: float
    avg_sparsity: float
    avg_iters: float
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "p": self.p,
            "q": self.q,
            "s": self.s,
            "lambda": self.lam,
            "kappa": self.kappa,
            "sigma": self.sigma,
            "trials": self.trials,
            "avg_cost": self.avg_cost,
            "mse": self.mse,
            "support_match_pct": self.support_match_pct,
            "avg_sparsity": self.avg_sparsity,
            "avg_iters": self.avg_iters,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsRow":
        return cls(
            method=d["method"],
            p=d["p"],
            q=d["q"],
            s=d["s"],
            lam=d["lambda"],
            kappa=d["kappa"],
            sigma=d["sigma"],
            trials=d["trials"],
            avg_cost=d["avg_cost"],
            mse=d["mse"],
            support_match_pct=d["support_match_pct"],
            avg_sparsity=d["avg_sparsity"],
            avg_iters=d["avg_iters"],
            wall_time_s=d["wall_time_s"],
        )

    def csv_line(self) -> str:
        f6 = lambda v: format(float(v), ".6g")
        return ",".join(
            [
                self.method,
                str(self.p),
                str(self.q),
                str(self.s),
                f6(self.lam),
                f6(self.kappa),
                f6(self.sigma),
                str(self.trials),
                f6(self.avg_cost),
                f6(self.mse),
                f6(self.support_match_pct),
                f6(self.avg_sparsity),
                f6(self.avg_iters),
                f6(self.wall_time_s),
            ]
        )


def trial_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Splittable per-trial seed: serial and parallel runs agree exactly."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))


def _icr_options(config: ExperimentConfig, variant: str) -> IcrOptions:
    return IcrOptions(
        variant=variant,
        tol=config.outer_tol,
        max_outer_iters=config.max_outer,
        inner_tol=config.inner_tol,
        max_inner_iters=config.max_inner,
        record_trace=False,
    )


def _solve_method(method: str, inst: ProblemInstance, config: ExperimentConfig):
    """Run one method; returns (solution, iteration count)."""
    if method == "ICR":
        res = icr_run(inst, _icr_options(config, "unconstrained"))
        return res.x_star, res.iterations
    if method == "ICR-NN":
        res = icr_run(inst, _icr_options(config, "nonneg"))
        return res.x_star, res.iterations
    if method == "ElasticNet":
        spec = SubproblemSpec(
            inst=inst,
            weights=inst.rho.copy(),
            tol=config.inner_tol,
            max_inner_iters=config.max_inner,
        )
        sol = solve_weighted_l1_ridge(spec)
        return sol.x, sol.inner_iters
    raise ValueError(f"unknown method {method!r}")


def _thresholded_cost(inst: ProblemInstance, x: np.ndarray, tau: float) -> float:
    active = np.abs(x) > tau
    return map_objective(inst, np.where(active, x, 0.0), active.astype(float))


def _method_metrics(inst, x, iters, x_ref, tau, wall) -> dict:
    return {
        "cost": _thresholded_cost(inst, x, tau),
        "mse": mse(x, x_ref),
        "sm": support_match(x, x_ref, tau),
        "sparsity": float(sparsity_level(x, tau)),
        "iters": float(iters),
        "wall": wall,
    }


def _synth_trial(args):
    config, s, t = args
    try:
        seed = trial_seed(config.master_seed, s, t)
        kappa = 0.05 if config.kappa is None else config.kappa
        synth = generate_instance(
            config.p, config.q, s, config.sigma, lam=config.lam, kappa=kappa, seed=seed
        )
        inst = synth.inst
        if config.kind == "synth-global":
            oracle = global_enumeration(inst, budget=config.oracle_budget)
            x_ref = oracle.x_g
        else:
            oracle = None
            x_ref = synth.x0
        out = {}
        for method in config.methods:
            t0 = time.perf_counter()
            if method == "Oracle":
                x, iters = oracle.x_g, 0
            else:
                x, iters = _solve_method(method, inst, config)
            wall = time.perf_counter() - t0 if config.timing else 0.0
            out[method] = _method_metrics(inst, x, iters, x_ref, config.tau, wall)
        return ("ok", out)
    except Exception as exc:  # noqa: BLE001 - reported with the trial key
        return ("error", f"{type(exc).__name__}: {exc}")


def _run_trials(worker, arglist, jobs: int):
    if jobs == 1:
        return [worker(a) for a in arglist]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, arglist))


def _aggregate(config, s, kappa_shown, per_trial) -> list[MetricsRow]:
    rows = []
    n = len(per_trial)
    for method in config.methods:
        rows.append(
            MetricsRow(
                method=method,
                p=config.p,
                q=config.q,
                s=s,
                lam=config.lam,
                kappa=kappa_shown,
                sigma=config.sigma,
                trials=n,
                avg_cost=sum(tr[method]["cost"] for tr in per_trial) / n,
                mse=sum(tr[method]["mse"] for tr in per_trial) / n,
                support_match_pct=sum(tr[method]["sm"] for tr in per_trial) / n,
                avg_sparsity=sum(tr[method]["sparsity"] for tr in per_trial) / n,
                avg_iters=sum(tr[method]["iters"] for tr in per_trial) / n,
                wall_time_s=sum(tr[method]["wall"] for tr in per_trial) / n,
            )
        )
    return rows


def run_experiment(config: ExperimentConfig) -> list[MetricsRow]:
    """Run every trial of a synthetic experiment and aggregate rows.

    synth-global scores methods against the enumerated global solution;
    synth-large and sweep score against the ground truth.  Deterministic
    for a fixed config, independently of ``jobs``.
    """
    if config.kind == "mnist":
        rows, _records = mnist_recovery_experiment(config)
        return rows
    kappa_shown = 0.05 if config.kappa is None else config.kappa
    rows: list[MetricsRow] = []
    for s in config.sparsity_levels():
        arglist = [(config, s, t) for t in range(config.trials)]
        results = _run_trials(_synth_trial, arglist, config.jobs)
        per_trial = []
        for t, (status, payload) in enumerate(results):
            if status == "error":
                raise TrialFailure((s, t), payload, rows)
            per_trial.append(payload)
        rows.extend(_aggregate(config, s, kappa_shown, per_trial))
    return rows


def _mnist_matrix(config: ExperimentConfig) -> np.ndarray:
    rng = np.random.default_rng(trial_seed(config.master_seed, 0))
    A = rng.standard_normal((config.q, MNIST_PIXELS))
    return A / np.linalg.norm(A, axis=0)


def _mnist_trial(args):
    config, kappa, image, index = args
    try:
        A = _mnist_matrix(config)
        x0 = np.asarray(image, dtype=float).reshape(MNIST_PIXELS)
        noise_rng = np.random.default_rng(trial_seed(config.master_seed, 1 + index))
        y = A @ x0 + config.sigma * noise_rng.standard_normal(config.q)
        inst = ProblemInstance(
            A=A, y=y, lam=config.lam, sigma2=config.sigma**2, kappa=kappa,
            unit_columns=True,
        )
        record = {"index": index, "s0": int(np.count_nonzero(x0))}
        recons = {}
        for method in config.methods:
            t0 = time.perf_counter()
            x, iters = _solve_method(method, inst, config)
            wall = time.perf_counter() - t0 if config.timing else 0.0
            record[method] = _method_metrics(inst, x, iters, x0, config.tau, wall)
            recons[method] = x
        if config.dump_dir is not None:
            out = Path(config.dump_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_pgm(x0.reshape(28, 28), out / f"img{index:03d}_input.pgm")
            for method, x in recons.items():
                name = method.lower().replace("-", "")
                write_pgm(
                    np.clip(x.reshape(28, 28), 0.0, 1.0),
                    out / f"img{index:03d}_{name}.pgm",
                )
        return ("ok", record)
    except Exception as exc:  # noqa: BLE001 - reported with the image index
        return ("error", f"{type(exc).__name__}: {exc}")


def empirical_kappa(images: np.ndarray) -> float:
    """Mean fraction of active (nonzero) pixels across an image stack."""
    return float(np.mean(images > 0.0))


def mnist_recovery_experiment(
    config: ExperimentConfig, images: ImageSet | None = None
) -> tuple[list[MetricsRow], list[dict]]:
    """Compressive recovery of sparse images from q Gaussian measurements.

    Each selected image is vectorized into the ground truth, observed
    through a shared unit-column Gaussian matrix with additive noise, and
    recovered with each method.  Returns aggregate rows plus per-image
    records; reconstructions are dumped as graymaps when ``dump_dir`` is
    set.
    """
    if config.kind != "mnist":
        raise ConfigError("mnist_recovery_experiment needs a config of kind 'mnist'")
    if images is None:
        if config.images_path is None:
            raise ConfigError("mnist experiment requires images_path")
        images = load_idx_images(config.images_path)
    count = min(config.image_count, images.count)
    if count < 1:
        raise ConfigError("no images to recover")
    stack = images.images[:count]
    kappa = empirical_kappa(stack) if config.kappa is None else config.kappa
    if not 0.0 < kappa < 1.0:
        raise ConfigError(
            f"resolved kappa {kappa:g} is outside (0, 1); supply --kappa explicitly"
        )
    # Surface bad hyperparameters as a config error before any trial runs.
    try:
        compute_rho(kappa, config.sigma**2, config.lam)
    except ValueError as exc:
        raise ConfigError(f"hyperparameters invalid for images: {exc}") from exc

    arglist = [(config, kappa, stack[i], i) for i in range(count)]
    results = _run_trials(_mnist_trial, arglist, config.jobs)
    records = []
    for i, (status, payload) in enumerate(results):
        if status == "error":
            raise TrialFailure(("image", i), payload, [])
        records.append(payload)

    rows = []
    avg_s0 = round(sum(r["s0"] for r in records) / count)
    for method in config.methods:
        rows.append(
            MetricsRow(
                method=method,
                p=MNIST_PIXELS,
                q=config.q,
                s=avg_s0,
                lam=config.lam,
                kappa=kappa,
                sigma=config.sigma,
                trials=count,
                avg_cost=sum(r[method]["cost"] for r in records) / count,
                mse=sum(r[method]["mse"] for r in records) / count,
                support_match_pct=sum(r[method]["sm"] for r in records) / count,
                avg_sparsity=sum(r[method]["sparsity"] for r in records) / count,
                avg_iters=sum(r[method]["iters"] for r in records) / count,
                wall_time_s=sum(r[method]["wall"] for r in records) / count,
            )
        )
    return rows, records


def emit_csv(rows: list[MetricsRow], path) -> None:
    """Write rows as CSV with the pinned 14-column header; floats carry six
    significant digits."""
    lines = [CSV_HEADER] + [r.csv_line() for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def emit_json(
    rows: list[MetricsRow],
    config: ExperimentConfig,
    path,
    per_image: list[dict] | None = None,
    failure: dict | None = None,
) -> None:
    """Write rows at full float precision with the config echo.

    The echo contains every experiment-defining field, so any emitted row
    is reproducible from the JSON alone; execution details (jobs, output
    locations) are omitted to keep reruns byte-identical.
    """
    doc: dict = {"config": config.echo_dict(), "rows": [r.to_dict() for r in rows]}
    if per_image is not None:
        doc["per_image"] = per_image
    if failure is not None:
        doc["failure"] = failure
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
