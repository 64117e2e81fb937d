"""Command-line entry point producing reproducible on-disk artifacts.

Subcommands: generate, fit, sweep, robustness, figure3, condition-curve.
Configuration comes from an optional JSON document with a strict schema
(unknown keys are rejected); command-line flags override the file, and the
fully merged effective configuration is echoed into the output directory as
``manifest.json``.  Re-running a command with its persisted manifest as the
config reproduces every CSV/JSON artifact byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
failure.  Failures emit a machine-readable error JSON on stderr.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from dataclasses import replace

import numpy as np

from ._io import csv_text, generator_id, write_json_atomic, write_text_atomic
from .dynamics import SYSTEM_NAMES, get_system
from .experiments import (
    DATASET_CONFIGS,
    DEFAULT_ALPHA_GRID,
    TABLE2,
    RobustnessSpec,
    SweepSpec,
    dataset_selection,
    reproduce_figure3,
    run_robustness,
    run_sweep,
)
from .integrate import NonFinite, StepUnderflow
from .library import DimensionMismatch
from .metrics import EmptyMatrix, ShapeMismatch, build_report, condition_curve
from .regression import (
    EmptyData,
    InfeasibleConstraints,
    assemble_weighted,
    fit_stls,
    format_model,
)
from .sampling import (
    KindMismatch,
    NoConvergence,
    SampleSet,
    TooFewSamples,
    WrongStability,
    build_dataset,
    default_schedule,
    load_sample_set_csv,
    merge_samples,
    sample_set_to_csv,
    sidecar_metadata,
)

OUTPUT_ROOT_ENV = "MOSINDY_OUT"

NUMERICAL_ERRORS = (
    StepUnderflow,
    NonFinite,
    NoConvergence,
    WrongStability,
    InfeasibleConstraints,
    EmptyData,
    EmptyMatrix,
    ShapeMismatch,
    DimensionMismatch,
    KindMismatch,
    TooFewSamples,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


DEFAULT_CONFIG: dict = {
    "command": None,
    "system": None,
    "seed": 0,
    "data_dir": None,
    "schedule": {"n_points": None, "dt": None},
    "fit": {"lambda": None, "alpha": None, "data": "single_transient_attractors"},
    "sweep": {"lambda_grid": None, "alpha_grid": None, "datasets": None},
    "robustness": {
        "noise_levels": None,
        "keep_fractions": None,
        "realizations": 20,
        "lambda": None,
        "alpha": None,
    },
    "figure3": {"systems": None},
}


def _merge_strict(defaults: dict, overrides: dict, path: str = "") -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(defaults[key], dict) and defaults[key]:
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key {where!r} must be an object")
            merged[key] = _merge_strict(defaults[key], value, where)
        else:
            merged[key] = value
    return merged


def load_config(path: str | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        with open(path) as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object")
    # A persisted manifest nests the config under "config"; accept both forms.
    if "config" in document and isinstance(document.get("config"), dict):
        inner = dict(document["config"])
        if "command" in document and "command" not in inner:
            inner["command"] = document["command"]
        document = inner
    document.pop("generator", None)
    return _merge_strict(DEFAULT_CONFIG, document)


def _require_system(config: dict) -> str:
    name = config.get("system")
    if not name:
        raise ConfigError("a system name is required (--system)")
    if name not in SYSTEM_NAMES:
        raise ConfigError(
            f"unknown system {name!r}; valid names: {', '.join(SYSTEM_NAMES)}"
        )
    return name


def _resolve_out(args_out: str | None, command: str) -> str:
    if args_out:
        return args_out
    root = os.environ.get(OUTPUT_ROOT_ENV, "out")
    return os.path.join(root, command)


def _schedule_for(config: dict, name: str):
    schedule = default_schedule(name)
    overrides = config["schedule"]
    changes = {}
    if overrides.get("n_points") is not None:
        changes["n_points"] = int(overrides["n_points"])
    if overrides.get("dt") is not None:
        changes["dt"] = float(overrides["dt"])
    return replace(schedule, **changes) if changes else schedule


def _write_manifest(outdir: str, command: str, config: dict) -> None:
    effective = json.loads(json.dumps(config))
    effective["command"] = command
    write_json_atomic(
        os.path.join(outdir, "manifest.json"),
        {"command": command, "config": effective, "generator": generator_id()},
    )


def _validate_lambda(lam) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    return lam


class _LoadedDataset:
    """Dataset façade over files written by ``generate``."""

    def __init__(self, transients, attractors, single_index):
        self.transients = transients
        self.attractors = attractors
        self._single = single_index

    @property
    def single_transient(self) -> SampleSet:
        return self.transients[self._single]

    def all_transients(self) -> SampleSet:
        return merge_samples(self.transients)

    def all_attractors(self) -> SampleSet:
        return merge_samples(self.attractors)


def _load_generated(data_dir: str, system_name: str) -> _LoadedDataset:
    base = os.path.join(data_dir, system_name)
    if not os.path.isdir(base):
        raise FileNotFoundError(f"missing dataset directory {base!r}; run generate first")

    def load(prefix: str):
        out = []
        for csv_path in sorted(glob.glob(os.path.join(base, f"{prefix}_*.csv"))):
            sidecar = csv_path[:-4] + ".json"
            meta = {}
            if os.path.exists(sidecar):
                with open(sidecar) as handle:
                    meta = json.load(handle)
            with open(csv_path) as handle:
                out.append((load_sample_set_csv(handle.read(), meta), meta))
        if not out:
            raise FileNotFoundError(f"no {prefix} files under {base!r}")
        return out

    transients = load("transient")
    attractors = load("attractor")
    single = next(
        (i for i, (_, meta) in enumerate(transients) if meta.get("single_transient")),
        0,
    )
    return _LoadedDataset(
        [s for s, _ in transients], [s for s, _ in attractors], single
    )


def _dataset(config: dict, name: str):
    if config.get("data_dir"):
        return _load_generated(config["data_dir"], name)
    return build_dataset(get_system(name), _schedule_for(config, name))


def cmd_generate(config: dict, outdir: str) -> None:
    name = _require_system(config)
    schedule = _schedule_for(config, name)
    data = build_dataset(get_system(name), schedule)
    base = os.path.join(outdir, name)
    for index, samples in enumerate(data.transients):
        stem = os.path.join(base, f"transient_{index:02d}")
        write_text_atomic(stem + ".csv", sample_set_to_csv(samples))
        write_json_atomic(
            stem + ".json",
            sidecar_metadata(
                samples,
                {"single_transient": index == schedule.single_transient_index},
            ),
        )
    for index, samples in enumerate(data.attractors):
        stem = os.path.join(base, f"attractor_{index:02d}")
        write_text_atomic(stem + ".csv", sample_set_to_csv(samples))
        write_json_atomic(stem + ".json", sidecar_metadata(samples))
    _write_manifest(outdir, "generate", config)


def cmd_fit(config: dict, outdir: str) -> None:
    name = _require_system(config)
    fit_cfg = config["fit"]
    if fit_cfg.get("lambda") is None:
        raise ConfigError("fit requires a lambda (--lambda)")
    lam = _validate_lambda(fit_cfg["lambda"])
    alpha = 1.0 if fit_cfg.get("alpha") is None else float(fit_cfg["alpha"])
    dataset_name = fit_cfg.get("data") or "single_transient_attractors"
    if dataset_name not in DATASET_CONFIGS:
        raise ConfigError(
            f"unknown data configuration {dataset_name!r}; valid: {', '.join(DATASET_CONFIGS)}"
        )
    system = get_system(name)
    data = _dataset(config, name)
    transients, attractors = dataset_selection(data, dataset_name)
    problem = assemble_weighted(transients, attractors, system.library, alpha)
    fit = fit_stls(problem, lam)
    report = build_report(
        fit,
        system.true_coefficients,
        problem,
        lam,
        alpha,
        provenance={"system": name, "data": dataset_name, "generator": generator_id()},
    )
    payload = report.to_dict()
    payload["library"] = system.library.to_dict()
    write_json_atomic(os.path.join(outdir, "report.json"), payload)
    write_text_atomic(
        os.path.join(outdir, "model.txt"), format_model(fit, system.library) + "\n"
    )
    _write_manifest(outdir, "fit", config)


def cmd_sweep(config: dict, outdir: str) -> None:
    name = _require_system(config)
    system = get_system(name)
    data = _dataset(config, name)
    sweep_cfg = config["sweep"]
    kwargs = {}
    if sweep_cfg.get("lambda_grid"):
        kwargs["lambda_grid"] = tuple(float(v) for v in sweep_cfg["lambda_grid"])
    if sweep_cfg.get("alpha_grid"):
        kwargs["alpha_grid"] = tuple(float(v) for v in sweep_cfg["alpha_grid"])
    if sweep_cfg.get("datasets"):
        kwargs["datasets"] = tuple(sweep_cfg["datasets"])
    try:
        spec = SweepSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_sweep(system, data, spec)
    write_text_atomic(os.path.join(outdir, "sweep.csv"), result.csv())
    write_json_atomic(os.path.join(outdir, "summary.json"), result.summary())
    _write_manifest(outdir, "sweep", config)


def cmd_robustness(config: dict, outdir: str) -> None:
    name = _require_system(config)
    system = get_system(name)
    data = _dataset(config, name)
    rob = config["robustness"]
    lam, alpha = TABLE2[name]
    if rob.get("lambda") is not None:
        lam = _validate_lambda(rob["lambda"])
    if rob.get("alpha") is not None:
        alpha = float(rob["alpha"])
    kwargs = {
        "n_realizations": int(rob.get("realizations") or 20),
        "hyperparameters": (lam, alpha),
        "base_seed": int(config.get("seed") or 0),
    }
    if rob.get("noise_levels"):
        kwargs["noise_levels"] = tuple(float(v) for v in rob["noise_levels"])
    if rob.get("keep_fractions"):
        kwargs["keep_fractions"] = tuple(float(v) for v in rob["keep_fractions"])
    try:
        spec = RobustnessSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_robustness(system, data, spec)
    write_text_atomic(os.path.join(outdir, "heatmap.csv"), result.csv())
    _write_manifest(outdir, "robustness", config)


def cmd_figure3(config: dict, outdir: str) -> None:
    systems = config["figure3"].get("systems") or list(SYSTEM_NAMES)
    for name in systems:
        if name not in SYSTEM_NAMES:
            raise ConfigError(
                f"unknown system {name!r}; valid names: {', '.join(SYSTEM_NAMES)}"
            )
    reproduce_figure3(outdir, systems=systems)
    _write_manifest(outdir, "figure3", config)


def cmd_condition_curve(config: dict, outdir: str) -> None:
    name = _require_system(config)
    system = get_system(name)
    data = _dataset(config, name)
    alpha_grid = config["sweep"].get("alpha_grid") or DEFAULT_ALPHA_GRID
    curve = condition_curve(
        data.single_transient,
        data.all_attractors(),
        system.library,
        tuple(float(v) for v in alpha_grid),
    )
    write_text_atomic(
        os.path.join(outdir, "condition_curve.csv"),
        csv_text(["alpha", "kappa", "kappa_normalized"], curve.to_rows()),
    )
    write_json_atomic(
        os.path.join(outdir, "endpoints.json"),
        {
            "kappa_transient": curve.kappa_transient,
            "kappa_attractor": curve.kappa_attractor,
            "kappa_transient_normalized": curve.kappa_transient_normalized,
            "kappa_attractor_normalized": curve.kappa_attractor_normalized,
        },
    )
    _write_manifest(outdir, "condition-curve", config)


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "sweep": cmd_sweep,
    "robustness": cmd_robustness,
    "figure3": cmd_figure3,
    "condition-curve": cmd_condition_curve,
}


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mosindy",
        description="Parameterized model discovery from transient and attractor data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration (or persisted manifest)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--system", help=f"system name: {', '.join(SYSTEM_NAMES)}")
        p.add_argument("--seed", type=int, help="base seed for stochastic steps")
        p.add_argument("--data-dir", help="root of a previous `generate` run")

    p = sub.add_parser("generate", help="write the benchmark datasets to disk")
    common(p)

    p = sub.add_parser("fit", help="fit one model at fixed hyperparameters")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, help="sparsity threshold in [0, 1]")
    p.add_argument("--alpha", type=float, help="attractor weight (defaults to 1)")
    p.add_argument("--data", choices=DATASET_CONFIGS, help="training-data configuration")

    p = sub.add_parser("sweep", help="hyperparameter grid sweep per data configuration")
    common(p)
    p.add_argument("--datasets", help="comma-separated data configurations")

    p = sub.add_parser("robustness", help="Monte Carlo noise/decimation heatmap")
    common(p)
    p.add_argument("--realizations", type=int, help="Monte Carlo realizations per cell")
    p.add_argument("--noise-levels", help="comma-separated noise fractions")
    p.add_argument("--keep-fractions", help="comma-separated keep fractions")
    p.add_argument("--lambda", dest="lam", type=float, help="override the fixed lambda")
    p.add_argument("--alpha", type=float, help="override the fixed alpha")

    p = sub.add_parser("figure3", help="benchmark comparison bundle for all systems")
    common(p)
    p.add_argument("--systems", help="comma-separated subset of systems")

    p = sub.add_parser("condition-curve", help="condition number versus alpha")
    common(p)
    return parser


def _apply_flags(config: dict, args: argparse.Namespace) -> dict:
    if getattr(args, "system", None):
        config["system"] = args.system
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    if getattr(args, "data_dir", None):
        config["data_dir"] = args.data_dir
    if getattr(args, "lam", None) is not None:
        section = "robustness" if args.command == "robustness" else "fit"
        config[section]["lambda"] = args.lam
    if getattr(args, "alpha", None) is not None:
        section = "robustness" if args.command == "robustness" else "fit"
        config[section]["alpha"] = args.alpha
    if getattr(args, "data", None):
        config["fit"]["data"] = args.data
    if getattr(args, "datasets", None):
        config["sweep"]["datasets"] = [s.strip() for s in args.datasets.split(",")]
    if getattr(args, "realizations", None) is not None:
        config["robustness"]["realizations"] = args.realizations
    if getattr(args, "noise_levels", None):
        config["robustness"]["noise_levels"] = _parse_float_list(args.noise_levels)
    if getattr(args, "keep_fractions", None):
        config["robustness"]["keep_fractions"] = _parse_float_list(args.keep_fractions)
    if getattr(args, "systems", None):
        config["figure3"]["systems"] = [s.strip() for s in args.systems.split(",")]
    return config


def _fail(code: int, exc: BaseException) -> int:
    print(
        json.dumps({"error": type(exc).__name__, "message": str(exc)}),
        file=sys.stderr,
    )
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        configured_command = config.get("command")
        if configured_command and configured_command != args.command:
            raise ConfigError(
                f"config was persisted for {configured_command!r}, "
                f"but {args.command!r} was requested"
            )
        config = _apply_flags(config, args)
        config["command"] = args.command
        outdir = _resolve_out(args.out, args.command)
    except ConfigError as exc:
        return _fail(2, exc)

    try:
        COMMANDS[args.command](config, outdir)
    except ConfigError as exc:
        return _fail(2, exc)
    except NUMERICAL_ERRORS as exc:
        return _fail(3, exc)
    except OSError as exc:
        return _fail(4, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
