"""Sparse regression solvers for parameterized model discovery.

Three fitting routes live here:

* ``fit_stls`` — sequentially thresholded least squares on a (possibly
  row-weighted) stacked problem.  Columns of the candidate matrix are
  normalized by their max absolute value before fitting so the sparsity
  threshold does not have to track the row weighting, and thresholding is
  relative per state variable: entries below ``lam * max|xi(:, i)|`` are
  zeroed.  Five thresholding iterations, no early exit, for bit
  reproducibility.
* ``assemble_weighted`` — builds the stacked problem
  ``[Theta_tr; sqrt(alpha) Theta_att]`` trading off transient fit against
  attractor fit; ``alpha = 1`` is plain concatenation.
* ``fit_constrained`` — equality-constrained least squares via the KKT
  system, with sparsity enforced by appending unit-row constraints.  Existence
  requires the constraint rows to be independent and the stacked
  [candidates; constraints] matrix to have independent columns; both are
  checked by ``check_feasibility`` and violations raise
  ``InfeasibleConstraints``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .library import MonomialLibrary, evaluate

if TYPE_CHECKING:
    from .sampling import SampleSet


class EmptyData(ValueError):
    """No rows were supplied to assemble a regression problem."""


class AllThresholdedWarning(UserWarning):
    """An equation lost every candidate term; a zero column was returned."""


class InfeasibleConstraints(RuntimeError):
    """The constrained least-squares problem has no solution."""

    def __init__(self, message: str, report: "FeasibilityReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class CoefficientMatrix:
    """d x n model coefficients against a fixed library column ordering."""

    values: np.ndarray
    library_ref: str
    empty_equations: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("coefficient values must be a 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficient values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def sparsity_pattern(self) -> frozenset[tuple[int, int]]:
        rows, cols = np.nonzero(self.values)
        return frozenset(zip(rows.tolist(), cols.tolist()))

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.values))

    def to_dict(self) -> dict:
        return {
            "library": self.library_ref,
            "values": [[float(v) for v in row] for row in self.values],
            "sparsity_pattern": sorted([list(ij) for ij in self.sparsity_pattern]),
        }


@dataclass(frozen=True)
class WeightedProblem:
    """Stacked regression data [Theta_tr; sqrt(alpha) Theta_att]."""

    theta: np.ndarray
    xdot: np.ndarray
    alpha: float
    library_ref: str = ""

    def __post_init__(self):
        if self.theta.shape[0] != self.xdot.shape[0]:
            raise ValueError("theta and xdot row counts differ")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @property
    def n_rows(self) -> int:
        return self.theta.shape[0]

    @property
    def n_state(self) -> int:
        return self.xdot.shape[1]


@dataclass(frozen=True)
class ConstraintSet:
    """p linear equality constraints C xi = d on the vectorized coefficients."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if matrix.shape[0] != rhs.shape[0]:
            raise ValueError("constraint matrix and rhs row counts differ")
        if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(rhs))):
            raise ValueError("constraints must be finite")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n_constraints(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def empty(n_coefficients: int) -> "ConstraintSet":
        return ConstraintSet(np.zeros((0, n_coefficients)), np.zeros(0))


@dataclass(frozen=True)
class FeasibilityReport:
    """Existence conditions for the constrained least-squares solution."""

    rows_independent: bool
    columns_independent: bool
    n_attractor_constraints: int
    n_sparsity_constraints: int
    n_coefficients: int
    count_ok: bool
    constraint_rank: int

    @property
    def feasible(self) -> bool:
        return self.rows_independent and self.columns_independent

    def to_dict(self) -> dict:
        return {
            "rows_independent": self.rows_independent,
            "columns_independent": self.columns_independent,
            "n_attractor_constraints": self.n_attractor_constraints,
            "n_sparsity_constraints": self.n_sparsity_constraints,
            "n_coefficients": self.n_coefficients,
            "count_ok": self.count_ok,
            "constraint_rank": self.constraint_rank,
            "feasible": self.feasible,
        }


def _numerical_rank(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    tol = max(matrix.shape) * np.finfo(float).eps * singular[0]
    return int(np.sum(singular > tol))


def assemble_weighted(
    transients: "SampleSet | None",
    attractors: "SampleSet | None",
    lib: MonomialLibrary,
    alpha: float,
) -> WeightedProblem:
    """Stack transient and attractor data with sqrt(alpha) row weighting."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    blocks_theta = []
    blocks_xdot = []
    if transients is not None and transients.n_samples > 0:
        blocks_theta.append(evaluate(lib, transients))
        blocks_xdot.append(transients.derivatives)
    if attractors is not None and attractors.n_samples > 0:
        weight = np.sqrt(alpha)
        blocks_theta.append(weight * evaluate(lib, attractors))
        blocks_xdot.append(weight * attractors.derivatives)
    if not blocks_theta:
        raise EmptyData("no transient or attractor rows to assemble")
    theta = np.vstack(blocks_theta)
    xdot = np.vstack(blocks_xdot)
    return WeightedProblem(theta=theta, xdot=xdot, alpha=float(alpha), library_ref=lib.ref)


def _lstsq(theta: np.ndarray, target: np.ndarray) -> np.ndarray:
    # SVD-backed, rank revealing: minimum-norm solution on rank deficiency.
    solution, _, _, _ = np.linalg.lstsq(theta, target, rcond=None)
    return solution


def _normalizers(theta: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(theta), axis=0)
    scale[scale == 0.0] = 1.0  # all-zero columns: avoid 0/0
    return scale


def fit_stls(
    problem: WeightedProblem, lam: float, column_normalize: bool = True
) -> CoefficientMatrix:
    """Sequentially thresholded least squares with per-variable thresholding.

    Columns are normalized by max absolute value, the coefficients are
    initialized by least squares, and for five iterations each state
    variable's entries strictly below ``lam`` times the largest entry of its
    own column are zeroed before re-regressing onto the survivors.  Ties at
    exactly the threshold survive.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if problem.n_rows < 1:
        raise EmptyData("regression problem has no rows")

    if column_normalize:
        scale = _normalizers(problem.theta)
    else:
        scale = np.ones(problem.theta.shape[1])
    theta = problem.theta / scale

    xi = _lstsq(theta, problem.xdot)
    n_state = problem.n_state
    for _ in range(5):
        for i in range(n_state):
            column = xi[:, i]
            small = np.abs(column) < lam * np.max(np.abs(column))
            column[small] = 0.0
            big = ~small
            if np.any(big):
                xi[big, i] = _lstsq(theta[:, big], problem.xdot[:, i])

    empty = tuple(int(i) for i in range(n_state) if not np.any(xi[:, i]))
    if empty:
        warnings.warn(
            f"equations {empty} retained no candidate terms (identically zero data)",
            AllThresholdedWarning,
            stacklevel=2,
        )
    return CoefficientMatrix(
        values=xi / scale[:, None],
        library_ref=problem.library_ref,
        empty_equations=empty,
    )


def block_diagonal(theta: np.ndarray, n_state: int) -> np.ndarray:
    """n_state copies of theta down the diagonal, acting on column-stacked xi."""
    return np.kron(np.eye(n_state), theta)


def attractor_constraint_matrices(
    attractors: "SampleSet", lib: MonomialLibrary, state_dim: int
) -> ConstraintSet:
    """On-attractor dynamics as hard equality constraints.

    Builds the block-diagonal candidate matrix (one block per state variable)
    and the vectorized attractor derivatives; the vectorization stacks the
    coefficient columns, so block i constrains equation i.
    """
    if attractors.n_samples == 0:
        raise EmptyData("attractor sample set is empty")
    theta_att = evaluate(lib, attractors)
    matrix = block_diagonal(theta_att, state_dim)
    rhs = np.asarray(attractors.derivatives, dtype=float).ravel(order="F")
    return ConstraintSet(matrix=matrix, rhs=rhs)


def check_feasibility(
    constraints: ConstraintSet,
    theta_hat: np.ndarray,
    n: int,
    d: int,
    n_sparsity: int = 0,
) -> FeasibilityReport:
    """Report the two existence conditions and the constraint-count bound.

    ``constraints`` holds the on-attractor rows plus ``n_sparsity`` appended
    unit rows; ``theta_hat`` is the block-diagonal candidate matrix of the
    objective.  The count bound requires the attractor constraints to number
    at most ``n*d - n_sparsity``, i.e. at most the active coefficients.
    """
    c = constraints.matrix
    rank_c = _numerical_rank(c)
    rows_independent = rank_c == c.shape[0]
    stacked = np.vstack([theta_hat, c]) if c.size else theta_hat
    columns_independent = _numerical_rank(stacked) == n * d
    n_attr = c.shape[0] - n_sparsity
    return FeasibilityReport(
        rows_independent=rows_independent,
        columns_independent=columns_independent,
        n_attractor_constraints=n_attr,
        n_sparsity_constraints=n_sparsity,
        n_coefficients=n * d,
        count_ok=n_attr <= n * d - n_sparsity,
        constraint_rank=rank_c,
    )


def _solve_kkt(
    gram: np.ndarray, atb: np.ndarray, c: np.ndarray, d_vec: np.ndarray
) -> np.ndarray:
    n_coef = gram.shape[0]
    p = c.shape[0]
    kkt = np.zeros((n_coef + p, n_coef + p))
    kkt[:n_coef, :n_coef] = 2.0 * gram
    if p:
        kkt[:n_coef, n_coef:] = c.T
        kkt[n_coef:, :n_coef] = c
    rhs = np.concatenate([2.0 * atb, d_vec])
    solution = np.linalg.solve(kkt, rhs)
    residual = np.linalg.norm(kkt @ solution - rhs)
    scale = np.linalg.norm(kkt, ord="fro") * np.linalg.norm(solution) + np.linalg.norm(rhs)
    if residual > 1e-8 * max(scale, 1e-300):
        raise np.linalg.LinAlgError(
            f"KKT solve residual {residual:.3e} exceeds 1e-8 relative tolerance"
        )
    return solution[:n_coef]


def fit_constrained(
    transients: "SampleSet",
    lib: MonomialLibrary,
    constraints: ConstraintSet,
    lam: float,
) -> CoefficientMatrix:
    """Equality-constrained STLS on transient data.

    Each iteration solves the KKT system of the constrained least squares,
    thresholds per state variable exactly as ``fit_stls`` does, and appends a
    unit-row constraint per zeroed coefficient.  Feasibility is re-checked
    whenever the constraint set grows; the expected failure mode of dense
    on-attractor constraints is surfaced as ``InfeasibleConstraints``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    theta = evaluate(lib, transients)
    n_state = transients.state_dim
    d = lib.size
    n_coef = n_state * d

    scale = _normalizers(theta)
    theta_n = theta / scale
    scale_hat = np.tile(scale, n_state)

    theta_hat = block_diagonal(theta_n, n_state)
    chi_dot = np.asarray(transients.derivatives, dtype=float).ravel(order="F")
    gram = block_diagonal(theta_n.T @ theta_n, n_state)
    atb = theta_hat.T @ chi_dot

    # Constraints are expressed on the unnormalized xi; rescale columns to act
    # on the normalized coefficients.
    base_c = constraints.matrix / scale_hat[None, :] if constraints.n_constraints else constraints.matrix
    base_d = constraints.rhs

    zeroed: list[int] = []

    def current_constraints() -> tuple[np.ndarray, np.ndarray]:
        if not zeroed:
            return base_c, base_d
        unit = np.zeros((len(zeroed), n_coef))
        unit[np.arange(len(zeroed)), zeroed] = 1.0
        c = np.vstack([base_c, unit]) if base_c.size else unit
        d_vec = np.concatenate([base_d, np.zeros(len(zeroed))])
        return c, d_vec

    def ensure_feasible() -> None:
        c, d_vec = current_constraints()
        report = check_feasibility(
            ConstraintSet(c, d_vec), theta_hat, n_state, d, n_sparsity=len(zeroed)
        )
        if not report.rows_independent:
            raise InfeasibleConstraints(
                "constraint rows are linearly dependent "
                f"(rank {report.constraint_rank} < {c.shape[0]}; "
                f"{report.n_attractor_constraints} attractor constraints vs "
                f"capacity {report.n_coefficients - report.n_sparsity_constraints})",
                report,
            )
        if not report.columns_independent:
            raise InfeasibleConstraints(
                "stacked [candidates; constraints] matrix has dependent columns",
                report,
            )

    ensure_feasible()
    c, d_vec = current_constraints()
    xi = _solve_kkt(gram, atb, c, d_vec)

    for _ in range(5):
        matrix = xi.reshape((d, n_state), order="F")
        new_zeros = []
        for i in range(n_state):
            column = matrix[:, i]
            threshold = lam * np.max(np.abs(column))
            for row in np.nonzero(np.abs(column) < threshold)[0]:
                flat = i * d + int(row)
                if flat not in zeroed:
                    new_zeros.append(flat)
        if new_zeros:
            zeroed.extend(new_zeros)
            ensure_feasible()
        c, d_vec = current_constraints()
        xi = _solve_kkt(gram, atb, c, d_vec)
        if zeroed:
            xi[zeroed] = 0.0  # exact zeros rather than KKT round-off

    values = (xi / scale_hat).reshape((d, n_state), order="F")
    return CoefficientMatrix(values=values, library_ref=lib.ref)


def format_model(coefficients: CoefficientMatrix, lib: MonomialLibrary) -> str:
    """Pretty-print the identified equations, one line per state variable."""
    lines = []
    for i in range(coefficients.values.shape[1]):
        terms = []
        for j, label in enumerate(lib.labels):
            value = coefficients.values[j, i]
            if value == 0.0:
                continue
            sign = "-" if value < 0 else ("+" if terms else "")
            magnitude = f"{abs(value):.4g}"
            term = magnitude if label == "1" else f"{magnitude}*{label}"
            terms.append(f"{sign} {term}" if terms else f"{sign}{term}")
        body = " ".join(terms) if terms else "0"
        lines.append(f"d{lib.var_names[i]}/dt = {body}")
    return "\n".join(lines)
