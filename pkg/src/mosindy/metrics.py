"""Model-quality and numerical-conditioning diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .library import MonomialLibrary, evaluate
from .regression import CoefficientMatrix, WeightedProblem, _normalizers
from .sampling import SampleSet


class ShapeMismatch(ValueError):
    """Coefficient matrices do not share a shape and library ordering."""


class EmptyMatrix(ValueError):
    """Condition numbers are undefined for empty matrices."""


def _check_comparable(fit: CoefficientMatrix, truth: CoefficientMatrix) -> None:
    if fit.values.shape != truth.values.shape:
        raise ShapeMismatch(
            f"shape {fit.values.shape} vs {truth.values.shape}"
        )
    if fit.library_ref and truth.library_ref and fit.library_ref != truth.library_ref:
        raise ShapeMismatch(
            f"library {fit.library_ref!r} vs {truth.library_ref!r}"
        )


def coefficient_error(fit: CoefficientMatrix, truth: CoefficientMatrix) -> float:
    """Frobenius-norm error of the fit relative to the ground truth."""
    _check_comparable(fit, truth)
    return float(
        np.linalg.norm(fit.values - truth.values) / np.linalg.norm(truth.values)
    )


def structure_match(fit: CoefficientMatrix, truth: CoefficientMatrix) -> bool:
    """True iff the nonzero patterns are identical sets."""
    _check_comparable(fit, truth)
    return bool(np.array_equal(fit.values != 0.0, truth.values != 0.0))


def condition_number(theta: np.ndarray) -> float:
    """sigma_max / sigma_min; +inf when numerically rank deficient."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.size == 0:
        raise EmptyMatrix("condition number of an empty matrix")
    singular = np.linalg.svd(theta, compute_uv=False)
    sigma_max = singular[0]
    if sigma_max == 0.0:
        return math.inf
    sigma_min = singular[min(theta.shape) - 1]
    if sigma_min < max(theta.shape) * np.finfo(float).eps * sigma_max:
        return math.inf
    return float(sigma_max / sigma_min)


@dataclass(frozen=True)
class ConditionCurve:
    """kappa of the row-weighted stack per alpha, plus the endpoint references."""

    alphas: tuple[float, ...]
    kappas: tuple[float, ...]
    kappas_normalized: tuple[float, ...]
    kappa_transient: float
    kappa_attractor: float
    kappa_transient_normalized: float
    kappa_attractor_normalized: float

    def to_rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.alphas, self.kappas, self.kappas_normalized))


def condition_curve(
    transients: SampleSet,
    attractors: SampleSet,
    lib: MonomialLibrary,
    alpha_grid: Sequence[float],
) -> ConditionCurve:
    """Condition number of [Theta_tr; sqrt(alpha) Theta_att] over an alpha grid.

    Both the raw and the max-abs column-normalized condition numbers are
    reported, since the thresholded regression operates on normalized columns.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    if not alpha_grid:
        raise ValueError("alpha grid must be nonempty")
    theta_tr = evaluate(lib, transients)
    theta_att = evaluate(lib, attractors)

    def normalized(theta: np.ndarray) -> np.ndarray:
        return theta / _normalizers(theta)

    kappas = []
    kappas_norm = []
    for alpha in alpha_grid:
        stacked = np.vstack([theta_tr, math.sqrt(alpha) * theta_att])
        kappas.append(condition_number(stacked))
        kappas_norm.append(condition_number(normalized(stacked)))
    return ConditionCurve(
        alphas=tuple(alpha_grid),
        kappas=tuple(kappas),
        kappas_normalized=tuple(kappas_norm),
        kappa_transient=condition_number(theta_tr),
        kappa_attractor=condition_number(theta_att),
        kappa_transient_normalized=condition_number(normalized(theta_tr)),
        kappa_attractor_normalized=condition_number(normalized(theta_att)),
    )


@dataclass(frozen=True)
class FitReport:
    """Identified coefficients with quality diagnostics and provenance."""

    coefficients: CoefficientMatrix
    coefficient_error: float
    structure_match: bool
    condition_numbers: dict[str, float]
    hyperparameters: dict[str, float]
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.to_dict(),
            "coefficient_error": self.coefficient_error,
            "structure_match": self.structure_match,
            "condition_numbers": dict(self.condition_numbers),
            "hyperparameters": dict(self.hyperparameters),
            "provenance": dict(self.provenance),
        }


def build_report(
    fit: CoefficientMatrix,
    truth: CoefficientMatrix,
    problem: WeightedProblem,
    lam: float,
    alpha: float,
    provenance: dict | None = None,
) -> FitReport:
    """Assemble the standard diagnostics for one fitted model."""
    conditions = {
        "theta_stacked": condition_number(problem.theta),
        "theta_stacked_normalized": condition_number(
            problem.theta / _normalizers(problem.theta)
        ),
    }
    return FitReport(
        coefficients=fit,
        coefficient_error=coefficient_error(fit, truth),
        structure_match=structure_match(fit, truth),
        condition_numbers=conditions,
        hyperparameters={"lambda": float(lam), "alpha": float(alpha)},
        provenance=dict(provenance or {}),
    )
