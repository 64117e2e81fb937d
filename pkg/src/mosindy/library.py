"""Polynomial candidate-function libraries over the state variables and one parameter.

A library is an ordered list of monomial exponent multi-indices in the
variables (x_1, ..., x_n, mu), graded by total degree with the constant term
first.  Within a degree block, earlier variables carry higher exponents first
(descending lexicographic), so for one state variable the degree-2 block reads
x^2, x*mu, mu^2.  The parameter is always the last variable of every
multi-index.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import TYPE_CHECKING, Iterator, Sequence

import numpy as np

if TYPE_CHECKING:
    from .sampling import SampleSet


class DimensionMismatch(ValueError):
    """Sample dimensionality does not match the library's variable count."""


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # Exponent tuples summing to `total`, emitted in descending lex order.
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _label(exponents: tuple[int, ...], names: Sequence[str]) -> str:
    parts = []
    for name, power in zip(names, exponents):
        if power == 1:
            parts.append(name)
        elif power > 1:
            parts.append(f"{name}^{power}")
    return " ".join(parts) if parts else "1"


@dataclass(frozen=True)
class MonomialLibrary:
    """Ordered monomial basis in (x_1..x_n, mu) up to a total degree."""

    n_vars: int
    max_degree: int
    exponents: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    var_names: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.exponents)

    @property
    def state_dim(self) -> int:
        return self.n_vars - 1

    @property
    def ref(self) -> str:
        """Identifier tying coefficient rows to this column ordering."""
        return f"monomials[{','.join(self.var_names)}]<=deg{self.max_degree}"

    def index_of(self, exponent: tuple[int, ...]) -> int:
        return self.exponents.index(tuple(exponent))

    def to_dict(self) -> dict:
        return {
            "variables": list(self.var_names),
            "max_degree": self.max_degree,
            "exponents": [list(e) for e in self.exponents],
            "labels": list(self.labels),
        }


def build_library(
    state_dim: int, max_degree: int, state_names: Sequence[str] | None = None
) -> MonomialLibrary:
    """All monomials in (x_1..x_n, mu) of total degree <= max_degree, graded-lex."""
    if state_dim < 1:
        raise ValueError(f"state_dim must be >= 1, got {state_dim}")
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")
    if state_names is None:
        state_names = [f"x{i + 1}" for i in range(state_dim)]
    elif len(state_names) != state_dim:
        raise ValueError("state_names length must equal state_dim")
    names = tuple(state_names) + ("mu",)
    n_vars = state_dim + 1

    exponents: list[tuple[int, ...]] = []
    for degree in range(max_degree + 1):
        exponents.extend(_compositions(degree, n_vars))
    assert len(exponents) == comb(max_degree + n_vars, n_vars)

    labels = tuple(_label(e, names) for e in exponents)
    return MonomialLibrary(
        n_vars=n_vars,
        max_degree=max_degree,
        exponents=tuple(exponents),
        labels=labels,
        var_names=names,
    )


def evaluate_arrays(
    lib: MonomialLibrary, states: np.ndarray, parameters: np.ndarray
) -> np.ndarray:
    """Evaluate the library on raw state rows and per-row parameter values.

    Returns the m x d matrix whose row j is every monomial evaluated at
    (states[j], parameters[j]).  Monomials are built by repeated
    multiplication of cached power columns, so integer inputs evaluate
    exactly.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    parameters = np.asarray(parameters, dtype=float).reshape(-1)
    m = states.shape[0]
    if states.shape[1] + 1 != lib.n_vars:
        raise DimensionMismatch(
            f"library expects {lib.n_vars - 1} state variables, got {states.shape[1]}"
        )
    if parameters.shape[0] != m:
        raise DimensionMismatch("states and parameters must have equal row counts")

    variables = np.column_stack([states, parameters])
    # powers[v][k] is variables[:, v] ** k computed by cumulative multiply.
    powers = []
    for v in range(lib.n_vars):
        cols = [np.ones(m)]
        for _ in range(lib.max_degree):
            cols.append(cols[-1] * variables[:, v])
        powers.append(cols)

    theta = np.empty((m, lib.size))
    for j, exponent in enumerate(lib.exponents):
        column = np.ones(m)
        for v, power in enumerate(exponent):
            if power:
                column = column * powers[v][power]
        theta[:, j] = column
    return theta


def evaluate(lib: MonomialLibrary, samples: "SampleSet") -> np.ndarray:
    """Evaluate the library on a sample set, row j at (x_j, mu_j)."""
    return evaluate_arrays(lib, samples.states, samples.parameters)
