"""Experiment orchestration: hyperparameter sweeps, baseline comparisons and
Monte Carlo noise/decimation heatmaps.

Every stochastic cell derives its seeds from a stable content hash of the cell
coordinates and realization index, so results are reproducible and adding grid
cells never perturbs existing ones.
"""

from __future__ import annotations

import hashlib
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._io import csv_text, generator_id, write_json_atomic, write_text_atomic
from .dynamics import SYSTEM_NAMES, SystemDefinition, get_system
from .metrics import (
    coefficient_error,
    condition_curve,
    condition_number,
    structure_match,
)
from .regression import assemble_weighted, fit_stls
from .sampling import SampleSet, SystemDataset, add_noise, build_dataset, decimate

# Best-by-error hyperparameters per system and training-data configuration,
# from the benchmark sweep (standard method columns, then the multi-objective
# pair used on the single-transient + attractors configuration).
TABLE1: dict[str, dict[str, float | tuple[float, float]]] = {
    "saddle_node": {
        "single_transient": 1.000,
        "attractors": 0.0001,
        "single_transient_attractors": 0.0105,
        "full": 0.0095,
        "multi_objective": (0.0045, 1e20),
    },
    "hopf": {
        "single_transient": 1.000,
        "attractors": 0.3944,
        "single_transient_attractors": 0.2719,
        "full": 0.0003,
        "multi_objective": (0.0060, 1e4),
    },
    "stuart_landau": {
        "single_transient": 0.0001,
        "attractors": 0.0152,
        "single_transient_attractors": 0.0034,
        "full": 0.0001,
        "multi_objective": (0.0087, 1e4),
    },
    "lorenz": {
        "single_transient": 0.0072,
        "attractors": 0.0001,
        "single_transient_attractors": 0.0001,
        "full": 0.0001,
        "multi_objective": (0.0001, 1e20),
    },
}

# Fixed (lambda, alpha) pairs for the noise/decimation robustness study.
TABLE2: dict[str, tuple[float, float]] = {
    "saddle_node": (0.15, 1e14),
    "hopf": (0.06, 1e14),
    "stuart_landau": (0.0087, 1e10),
    "lorenz": (0.01, 1e14),
}

DATASET_CONFIGS = (
    "single_transient",
    "attractors",
    "single_transient_attractors",
    "full",
)

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 0, 100))
DEFAULT_ALPHA_GRID = tuple(np.logspace(-20, 20, 11))
DEFAULT_NOISE_LEVELS = (0.0, 0.025, 0.05, 0.1, 0.2, 0.4)
DEFAULT_KEEP_FRACTIONS = (1.0, 0.75, 0.5, 0.25, 0.1)


def stable_seed(base_seed: int, *parts) -> int:
    """Deterministic sub-seed from a content hash of the given parts."""
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return (int.from_bytes(digest, "big") ^ int(base_seed)) & (2**63 - 1)


def dataset_selection(
    data: SystemDataset, name: str
) -> tuple[SampleSet | None, SampleSet | None]:
    """Resolve a named data configuration to (transients, attractors)."""
    if name == "single_transient":
        return data.single_transient, None
    if name == "attractors":
        return None, data.all_attractors()
    if name == "single_transient_attractors":
        return data.single_transient, data.all_attractors()
    if name == "full":
        return data.all_transients(), data.all_attractors()
    raise ValueError(
        f"unknown data configuration {name!r}; valid: {', '.join(DATASET_CONFIGS)}"
    )


@dataclass(frozen=True)
class SweepSpec:
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    datasets: tuple[str, ...] = DATASET_CONFIGS

    def __post_init__(self):
        for name, grid in (("lambda", self.lambda_grid), ("alpha", self.alpha_grid)):
            values = tuple(float(v) for v in grid)
            if not values:
                raise ValueError(f"{name} grid must be nonempty")
            if any(v <= 0 for v in values) and name == "alpha":
                raise ValueError("alpha grid must be positive")
            if list(values) != sorted(values):
                raise ValueError(f"{name} grid must be sorted ascending")
            object.__setattr__(self, f"{name}_grid", values)
        for dataset in self.datasets:
            if dataset not in DATASET_CONFIGS:
                raise ValueError(f"unknown dataset configuration {dataset!r}")


@dataclass(frozen=True)
class SweepCell:
    dataset: str
    method: str
    lam: float
    alpha: float
    error: float
    structure: bool
    failed: bool = False


@dataclass(frozen=True)
class SweepResult:
    system: str
    cells: tuple[SweepCell, ...]
    best: dict[tuple[str, str], SweepCell]

    def csv(self) -> str:
        header = ["dataset", "method", "lambda", "alpha", "error", "structure_match", "failed"]
        rows = [
            (c.dataset, c.method, c.lam, c.alpha, c.error, c.structure, c.failed)
            for c in self.cells
        ]
        return csv_text(header, rows)

    def summary(self) -> dict:
        return {
            "system": self.system,
            "best": {
                f"{dataset}/{method}": {
                    "lambda": cell.lam,
                    "alpha": cell.alpha,
                    "error": cell.error,
                    "structure_match": cell.structure,
                }
                for (dataset, method), cell in sorted(self.best.items())
            },
        }


def _fit_cell(
    system: SystemDefinition,
    transients: SampleSet | None,
    attractors: SampleSet | None,
    lam: float,
    alpha: float,
) -> tuple[float, bool, bool]:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            problem = assemble_weighted(transients, attractors, system.library, alpha)
            fit = fit_stls(problem, lam)
    except (ValueError, np.linalg.LinAlgError):
        return math.inf, False, True
    return (
        coefficient_error(fit, system.true_coefficients),
        structure_match(fit, system.true_coefficients),
        False,
    )


def run_sweep(
    system: SystemDefinition, data: SystemDataset, spec: SweepSpec | None = None
) -> SweepResult:
    """Grid sweep of the sparsity knob (and the trade-off weight) per dataset.

    Standard fits run at alpha = 1 on every configuration; the multi-objective
    method additionally sweeps the alpha grid on the combined
    single-transient + attractors configuration.  The best cell per
    (configuration, method) minimizes coefficient error, ties broken toward
    the larger lambda and then the larger alpha.
    """
    if spec is None:
        spec = SweepSpec()
    cells: list[SweepCell] = []
    best: dict[tuple[str, str], SweepCell] = {}

    def record(dataset: str, method: str, lam: float, alpha: float,
               transients, attractors) -> None:
        error, structure, failed = _fit_cell(system, transients, attractors, lam, alpha)
        cell = SweepCell(dataset, method, lam, alpha, error, structure, failed)
        cells.append(cell)
        if failed:
            return
        key = (dataset, method)
        incumbent = best.get(key)
        if (
            incumbent is None
            or cell.error < incumbent.error
            or (cell.error == incumbent.error and (cell.lam, cell.alpha) > (incumbent.lam, incumbent.alpha))
        ):
            best[key] = cell

    for dataset in spec.datasets:
        transients, attractors = dataset_selection(data, dataset)
        for lam in spec.lambda_grid:
            record(dataset, "standard", lam, 1.0, transients, attractors)
        if dataset == "single_transient_attractors":
            for alpha in spec.alpha_grid:
                for lam in spec.lambda_grid:
                    record(dataset, "multi_objective", lam, alpha, transients, attractors)
    return SweepResult(system=system.name, cells=tuple(cells), best=best)


@dataclass(frozen=True)
class RobustnessSpec:
    noise_levels: tuple[float, ...] = DEFAULT_NOISE_LEVELS
    keep_fractions: tuple[float, ...] = DEFAULT_KEEP_FRACTIONS
    n_realizations: int = 20
    hyperparameters: tuple[float, float] | None = None  # defaults to TABLE2[system]
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "noise_levels", tuple(float(v) for v in self.noise_levels))
        object.__setattr__(self, "keep_fractions", tuple(float(v) for v in self.keep_fractions))
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if any(v < 0 for v in self.noise_levels):
            raise ValueError("noise levels must be >= 0")
        if any(not 0 < v <= 1 for v in self.keep_fractions):
            raise ValueError("keep fractions must lie in (0, 1]")


@dataclass(frozen=True)
class HeatmapCell:
    noise_level: float
    keep_fraction: float
    method: str
    mean_error: float
    mean_success: float
    n_realizations: int


@dataclass(frozen=True)
class HeatmapResult:
    system: str
    hyperparameters: tuple[float, float]
    cells: tuple[HeatmapCell, ...]

    def csv(self) -> str:
        header = [
            "system", "method", "noise_level", "keep_fraction",
            "mean_error", "mean_success", "n_realizations",
        ]
        rows = [
            (
                self.system, c.method, c.noise_level, c.keep_fraction,
                c.mean_error, c.mean_success, c.n_realizations,
            )
            for c in self.cells
        ]
        return csv_text(header, rows)

    def cell(self, noise_level: float, keep_fraction: float, method: str) -> HeatmapCell:
        for c in self.cells:
            if (
                c.method == method
                and c.noise_level == noise_level
                and c.keep_fraction == keep_fraction
            ):
                return c
        raise KeyError((noise_level, keep_fraction, method))


def run_robustness(
    system: SystemDefinition, data: SystemDataset, spec: RobustnessSpec | None = None
) -> HeatmapResult:
    """Monte Carlo noise/decimation study on the designated single transient.

    Per cell and realization, noise is injected into the transient, rows are
    randomly discarded, and both methods are fit with the fixed
    hyperparameters: multi-objective at (lambda, alpha) and standard at the
    same lambda with alpha = 1.  Degenerate fits count as failures with the
    error of whatever coefficients were returned.
    """
    if spec is None:
        spec = RobustnessSpec()
    lam, alpha = spec.hyperparameters or TABLE2[system.name]
    attractors = data.all_attractors()
    clean = data.single_transient

    cells: list[HeatmapCell] = []
    for noise_level in spec.noise_levels:
        for keep in spec.keep_fractions:
            errors = {"multi_objective": [], "standard": []}
            successes = {"multi_objective": [], "standard": []}
            for k in range(spec.n_realizations):
                noisy = add_noise(
                    clean,
                    noise_level,
                    stable_seed(spec.base_seed, "noise", noise_level, keep, k),
                )
                degraded = decimate(
                    noisy,
                    keep,
                    stable_seed(spec.base_seed, "decimate", noise_level, keep, k),
                )
                for method, a in (("multi_objective", alpha), ("standard", 1.0)):
                    error, success, failed = _fit_cell(
                        system, degraded, attractors, lam, a
                    )
                    errors[method].append(error)
                    successes[method].append(0.0 if failed else float(success))
            for method in ("multi_objective", "standard"):
                cells.append(
                    HeatmapCell(
                        noise_level=noise_level,
                        keep_fraction=keep,
                        method=method,
                        mean_error=float(np.mean(errors[method])),
                        mean_success=float(np.mean(successes[method])),
                        n_realizations=spec.n_realizations,
                    )
                )
    return HeatmapResult(
        system=system.name, hyperparameters=(lam, alpha), cells=tuple(cells)
    )


def reproduce_figure3(
    outdir: str,
    systems: Sequence[str] = SYSTEM_NAMES,
    datasets: dict[str, SystemDataset] | None = None,
) -> dict:
    """Benchmark comparison bundle: per-system error/structure table at the
    best-by-error hyperparameters, plus condition-number curves over alpha.

    Emits, under ``outdir``: ``fits.csv``, one ``<system>_condition_curve.csv``
    per system, and ``summary.json``.  Returns the summary dictionary.
    """
    os.makedirs(outdir, exist_ok=True)
    fit_rows = []
    summary: dict = {"generator": generator_id(), "systems": {}}
    for name in systems:
        system = get_system(name)
        data = datasets[name] if datasets else build_dataset(system)
        table = TABLE1[name]
        entry: dict = {}
        for dataset in DATASET_CONFIGS:
            transients, attractors = dataset_selection(data, dataset)
            lam = float(table[dataset])
            error, structure, failed = _fit_cell(system, transients, attractors, lam, 1.0)
            fit_rows.append((name, dataset, "standard", lam, 1.0, error, structure))
            entry[f"{dataset}/standard"] = {
                "lambda": lam, "alpha": 1.0, "error": error,
                "structure_match": structure, "failed": failed,
            }
        lam, alpha = table["multi_objective"]
        transients, attractors = dataset_selection(data, "single_transient_attractors")
        error, structure, failed = _fit_cell(system, transients, attractors, lam, alpha)
        fit_rows.append(
            (name, "single_transient_attractors", "multi_objective", lam, alpha, error, structure)
        )
        entry["single_transient_attractors/multi_objective"] = {
            "lambda": lam, "alpha": alpha, "error": error,
            "structure_match": structure, "failed": failed,
        }

        curve = condition_curve(
            data.single_transient, data.all_attractors(), system.library, DEFAULT_ALPHA_GRID
        )
        curve_rows = curve.to_rows()
        write_text_atomic(
            os.path.join(outdir, f"{name}_condition_curve.csv"),
            csv_text(["alpha", "kappa", "kappa_normalized"], curve_rows),
        )
        from .library import evaluate as _evaluate

        theta_full = np.vstack(
            [
                _evaluate(system.library, data.all_transients()),
                _evaluate(system.library, data.all_attractors()),
            ]
        )
        entry["condition"] = {
            "kappa_transient": curve.kappa_transient,
            "kappa_attractor": curve.kappa_attractor,
            "kappa_full": condition_number(theta_full),
            "kappa_minimum": min(curve.kappas),
        }
        summary["systems"][name] = entry

    write_text_atomic(
        os.path.join(outdir, "fits.csv"),
        csv_text(
            ["system", "dataset", "method", "lambda", "alpha", "error", "structure_match"],
            fit_rows,
        ),
    )
    write_json_atomic(os.path.join(outdir, "summary.json"), summary)
    return summary
