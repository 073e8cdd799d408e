"""Command-line benchmark harness.

Subcommands:

    synth-global   desk-scale comparison against the enumerated global optimum
    synth-large    larger synthetic comparison against the ground truth
    sweep          metrics versus the true sparsity level
    mnist          compressive recovery of 28x28 images from an IDX file
    diagnose       convergence checks on traced solver runs

Every experiment option can come from ``--config FILE`` (lines of
``key = value``, ``#`` comments) with individual flags taking precedence.
Exit codes: 0 success, 1 trial failure (partial results are still flushed,
with a failure marker in the JSON), 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ConfigError,
    ExperimentConfig,
    TrialFailure,
    emit_csv,
    emit_json,
    mnist_recovery_experiment,
    run_experiment,
    trial_seed,
)
from .core import IcrOptions, icr_run
from .diagnostics import (
    TraceTooShort,
    freezing_monitor,
    monotone_step_check,
    quasi_cauchy_check,
)
from .synth import generate_instance

__all__ = ["main", "build_parser"]

KIND_DEFAULTS = {
    "synth-global": dict(
        p=16, q=8, s=3, trials=200, methods=("ICR", "ElasticNet", "Oracle")
    ),
    "synth-large": dict(p=512, q=128, s=30, trials=50, methods=("ICR", "ElasticNet")),
    "sweep": dict(
        p=512, q=128, s_list=(5, 15, 30, 50, 70), trials=25,
        methods=("ICR", "ElasticNet"),
    ),
    "mnist": dict(q=150, trials=1, methods=("ICR", "ICR-NN", "ElasticNet")),
}

# config-file keys and flag spellings that map onto ExperimentConfig fields
ALIASES = {
    "lambda": "lam",
    "seed": "master_seed",
    "tol": "outer_tol",
    "inner_tol": "inner_tol",
    "images": "images_path",
    "count": "image_count",
}

_INT_FIELDS = {
    "p", "q", "s", "trials", "master_seed", "max_outer", "max_inner",
    "image_count", "jobs", "oracle_budget",
}
_FLOAT_FIELDS = {"sigma", "lam", "kappa", "tau", "outer_tol", "inner_tol", "burn_in"}
_BOOL_FIELDS = {"timing"}
_LIST_INT_FIELDS = {"s_list"}
_LIST_STR_FIELDS = {"methods"}


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        if key in _BOOL_FIELDS:
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if key in _LIST_INT_FIELDS:
            return tuple(int(v) for v in value.replace(",", " ").split())
        if key in _LIST_STR_FIELDS:
            return tuple(v for v in value.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc
    return value


def load_config_file(path) -> dict:
    """Parse a key = value text file into config fields."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        key = ALIASES.get(key, key)
        values[key] = _coerce(key, value.strip())
    return values


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="FILE", help="key = value config file")
    sub.add_argument("-p", type=int, dest="p", help="signal length")
    sub.add_argument("-q", type=int, dest="q", help="number of measurements")
    sub.add_argument("-s", type=int, dest="s", help="true sparsity level")
    sub.add_argument("--sigma", type=float, help="noise standard deviation")
    sub.add_argument("--lambda", type=float, dest="lam", help="ridge weight")
    sub.add_argument("--kappa", type=float, help="prior activation probability")
    sub.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
    sub.add_argument("--seed", type=int, dest="master_seed", help="master seed")
    sub.add_argument("--methods", help="comma-separated method list")
    sub.add_argument("--tau", type=float, help="support threshold for metrics")
    sub.add_argument("--tol", type=float, dest="outer_tol", help="outer stopping tolerance")
    sub.add_argument("--inner-tol", type=float, dest="inner_tol", help="inner certificate tolerance")
    sub.add_argument("--max-outer", type=int, help="outer iteration limit")
    sub.add_argument("--max-inner", type=int, help="inner iteration limit")
    sub.add_argument("--oracle-budget", type=int, help="max supports for enumeration")
    sub.add_argument("--timing", action="store_const", const=True,
                     help="stamp measured wall time into rows (breaks byte reproducibility)")
    sub.add_argument("--jobs", type=int, help="parallel trial workers")
    sub.add_argument("--out", metavar="PREFIX",
                     help="write PREFIX.csv and PREFIX.json instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icr-bench",
        description="Sparse-recovery benchmarks for iterative convex refinement",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for kind in ("synth-global", "synth-large", "sweep", "mnist"):
        sub = subs.add_parser(kind, help=f"run the {kind} experiment")
        _add_common(sub)
        if kind == "sweep":
            sub.add_argument("--s-list", dest="s_list",
                             help="comma-separated sparsity levels")
        if kind == "mnist":
            sub.add_argument("--images", dest="images_path", help="IDX image file")
            sub.add_argument("--count", type=int, dest="image_count",
                             help="number of images to recover")
            sub.add_argument("--dump-dir", help="directory for graymap reconstructions")
    diag = subs.add_parser("diagnose", help="convergence checks on traced runs")
    _add_common(diag)
    diag.add_argument("--burn-in", type=float, dest="burn_in",
                      help="burn-in fraction for the decay check (default 0.3)")
    return parser


def _gather(args: argparse.Namespace, kind: str) -> dict:
    """Merge kind defaults, config-file values, and explicit flags."""
    merged: dict = dict(KIND_DEFAULTS.get(kind, {}))
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config", "out", "burn_in") or value is None:
            continue
        key = ALIASES.get(key, key)
        merged[key] = _coerce(key, value)
    return merged


def _config_from(args: argparse.Namespace, kind: str) -> ExperimentConfig:
    merged = _gather(args, kind)
    merged.pop("burn_in", None)
    dump_dir = merged.pop("dump_dir", None)
    try:
        return ExperimentConfig(kind=kind, dump_dir=dump_dir, **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _emit(rows, config, out_prefix, per_image=None, failure=None) -> None:
    if out_prefix is None:
        from .bench import CSV_HEADER

        print(CSV_HEADER)
        for row in rows:
            print(row.csv_line())
        return
    prefix = Path(out_prefix)
    if str(prefix.parent) not in ("", "."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(rows, Path(str(prefix) + ".csv"))
    emit_json(
        rows, config, Path(str(prefix) + ".json"), per_image=per_image, failure=failure
    )


def _run_benchmark(args: argparse.Namespace, kind: str) -> int:
    config = _config_from(args, kind)
    try:
        if kind == "mnist":
            rows, per_image = mnist_recovery_experiment(config)
        else:
            rows, per_image = run_experiment(config), None
    except TrialFailure as failure:
        _emit(
            failure.partial_rows,
            config,
            args.out,
            failure={"trial": list(failure.trial), "error": failure.cause},
        )
        print(f"error: {failure}", file=sys.stderr)
        return 1
    _emit(rows, config, args.out, per_image=per_image)
    return 0


def _run_diagnose(args: argparse.Namespace) -> int:
    merged = _gather(args, "diagnose")
    merged.setdefault("p", 64)
    merged.setdefault("q", 32)
    merged.setdefault("s", 10)
    merged.setdefault("trials", 100)
    burn_in = merged.pop("burn_in", None)
    if burn_in is None:
        burn_in = args.burn_in if args.burn_in is not None else 0.3
    params = {
        "p": merged.get("p"),
        "q": merged.get("q"),
        "s": merged.get("s"),
        "sigma": merged.get("sigma", 0.01),
        "lam": merged.get("lam", 1e-2),
        "kappa": merged.get("kappa") or 0.05,
        "trials": merged.get("trials"),
        "master_seed": merged.get("master_seed", 0),
        "outer_tol": merged.get("outer_tol", 1e-6),
        "inner_tol": merged.get("inner_tol", 1e-8),
        "max_outer": merged.get("max_outer", 500),
        "max_inner": merged.get("max_inner", 10_000),
        "burn_in": burn_in,
    }
    opts = IcrOptions(
        tol=params["outer_tol"],
        inner_tol=params["inner_tol"],
        max_outer_iters=params["max_outer"],
        max_inner_iters=params["max_inner"],
        record_trace=True,
    )
    runs = []
    for t in range(params["trials"]):
        seed = trial_seed(params["master_seed"], params["s"], t)
        synth = generate_instance(
            params["p"], params["q"], params["s"], params["sigma"],
            lam=params["lam"], kappa=params["kappa"], seed=seed,
        )
        result = icr_run(synth.inst, opts)
        try:
            decay = quasi_cauchy_check(result.trace, burn_in).to_dict()
        except TraceTooShort as exc:
            decay = {"passed": False, "error": str(exc)}
        runs.append(
            {
                "trial": t,
                "iterations": result.iterations,
                "converged": result.converged,
                "decay": decay,
                "freezing": freezing_monitor(result.trace, synth.inst).to_dict(),
                "monotone": monotone_step_check(
                    result.trace, synth.inst, params["inner_tol"]
                ).to_dict(),
            }
        )
    summary = {
        "trials": params["trials"],
        "decay_passed": sum(1 for r in runs if r["decay"].get("passed")),
        "freezing_clean": all(r["freezing"]["clean"] for r in runs),
        "monotone_ok": all(r["monotone"]["ok"] for r in runs),
    }
    doc = {"params": params, "summary": summary, "runs": runs}
    if args.out is not None:
        prefix = Path(args.out)
        if str(prefix.parent) not in ("", "."):
            prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(str(prefix) + ".json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
    print(
        "decay check passed {decay_passed}/{trials}, freezing clean: {freezing_clean}, "
        "monotone steps: {monotone_ok}".format(**summary)
    )
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "diagnose":
            return _run_diagnose(args)
        return _run_benchmark(args, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
