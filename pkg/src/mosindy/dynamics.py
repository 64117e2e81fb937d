"""The four benchmark parameterized systems and their ground-truth coefficients.

Each system couples an analytic right-hand side with the sparse coefficient
matrix that reproduces it exactly in the module's monomial ordering.  The
coefficient matrices are filled programmatically from exponent->value maps so
the declared ground truth cannot drift from the equations.  The parameter mu
enters the candidate library as one extra variable rather than as an augmented
state with trivial dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .library import MonomialLibrary, build_library
from .regression import CoefficientMatrix

RHS = Callable[[np.ndarray, float], np.ndarray]

# Stuart-Landau constants: unforced amplitudes and frequencies.
SL_R1 = 1.0
SL_R2 = 0.2
SL_OMEGA1 = 1.0 / math.pi
SL_OMEGA2 = 1.0

# Lorenz constants; mu takes the role of the usual rho.
LORENZ_SIGMA = 10.0
LORENZ_BETA = 8.0 / 3.0
# Fixed points lose stability in a subcritical Hopf bifurcation here.
LORENZ_MU_HOPF = LORENZ_SIGMA * (LORENZ_SIGMA + LORENZ_BETA + 3.0) / (
    LORENZ_SIGMA - LORENZ_BETA - 1.0
)


@dataclass(frozen=True)
class SystemDefinition:
    """A parameterized ODE plus its sparse ground truth over a declared library."""

    name: str
    state_dim: int
    rhs: RHS
    library_degree: int
    library: MonomialLibrary
    true_coefficients: CoefficientMatrix
    mu_range: tuple[float, float]
    state_box: tuple[tuple[float, float], ...]
    equilibrium_branches: Mapping[str, Callable[[float], np.ndarray]] = field(
        default_factory=dict
    )


def _coefficients(
    lib: MonomialLibrary, equations: Sequence[Mapping[tuple[int, ...], float]]
) -> CoefficientMatrix:
    index = {exponent: i for i, exponent in enumerate(lib.exponents)}
    values = np.zeros((lib.size, len(equations)))
    for j, terms in enumerate(equations):
        for exponent, value in terms.items():
            values[index[tuple(exponent)], j] = value
    return CoefficientMatrix(values=values, library_ref=lib.ref)


def saddle_node() -> SystemDefinition:
    """Saddle-node hysteresis loop: dx/dt = mu + x - x^3."""

    def rhs(x: np.ndarray, mu: float) -> np.ndarray:
        v = x[0]
        return np.array([mu + v - v * v * v])

    lib = build_library(1, 5, ["x"])
    truth = _coefficients(lib, [{(0, 1): 1.0, (1, 0): 1.0, (3, 0): -1.0}])

    def branch(sign: float) -> Callable[[float], np.ndarray]:
        def guess(mu: float) -> np.ndarray:
            return np.array([sign * 1.5 * max(1.0, abs(mu) ** (1.0 / 3.0))])

        return guess

    return SystemDefinition(
        name="saddle_node",
        state_dim=1,
        rhs=rhs,
        library_degree=5,
        library=lib,
        true_coefficients=truth,
        mu_range=(-6.0, 6.0),
        state_box=((-2.5, 2.5),),
        equilibrium_branches={"negative": branch(-1.0), "positive": branch(+1.0)},
    )


def hopf_normal_form() -> SystemDefinition:
    """Supercritical Hopf normal form; stable limit cycle of radius sqrt(mu)."""

    def rhs(x: np.ndarray, mu: float) -> np.ndarray:
        u, v = x[0], x[1]
        r2 = u * u + v * v
        return np.array([mu * u - v - u * r2, u + mu * v - v * r2])

    lib = build_library(2, 4, ["x", "y"])
    truth = _coefficients(
        lib,
        [
            {(1, 0, 1): 1.0, (0, 1, 0): -1.0, (3, 0, 0): -1.0, (1, 2, 0): -1.0},
            {(1, 0, 0): 1.0, (0, 1, 1): 1.0, (2, 1, 0): -1.0, (0, 3, 0): -1.0},
        ],
    )
    return SystemDefinition(
        name="hopf",
        state_dim=2,
        rhs=rhs,
        library_degree=4,
        library=lib,
        true_coefficients=truth,
        mu_range=(-3.0, 2.0),
        state_box=((-2.0, 2.0), (-2.0, 2.0)),
        equilibrium_branches={"origin": lambda mu: np.zeros(2)},
    )


def coupled_stuart_landau() -> SystemDefinition:
    """Two Stuart-Landau oscillators, the second unidirectionally driving the first."""

    r1sq = SL_R1 * SL_R1
    r2sq = SL_R2 * SL_R2

    def rhs(x: np.ndarray, mu: float) -> np.ndarray:
        x1, y1, x2, y2 = x[0], x[1], x[2], x[3]
        a1 = r1sq - (x1 * x1 + y1 * y1)
        a2 = r2sq - (x2 * x2 + y2 * y2)
        return np.array(
            [
                -SL_OMEGA1 * y1 + a1 * x1 + mu * (x1 * x2 + y1 * y2),
                SL_OMEGA1 * x1 + a1 * y1 + mu * (x1 * y2 - y1 * x2),
                -SL_OMEGA2 * y2 + a2 * x2,
                SL_OMEGA2 * x2 + a2 * y2,
            ]
        )

    lib = build_library(4, 3, ["x1", "y1", "x2", "y2"])
    truth = _coefficients(
        lib,
        [
            {
                (0, 1, 0, 0, 0): -SL_OMEGA1,
                (1, 0, 0, 0, 0): r1sq,
                (3, 0, 0, 0, 0): -1.0,
                (1, 2, 0, 0, 0): -1.0,
                (1, 0, 1, 0, 1): 1.0,
                (0, 1, 0, 1, 1): 1.0,
            },
            {
                (1, 0, 0, 0, 0): SL_OMEGA1,
                (0, 1, 0, 0, 0): r1sq,
                (2, 1, 0, 0, 0): -1.0,
                (0, 3, 0, 0, 0): -1.0,
                (1, 0, 0, 1, 1): 1.0,
                (0, 1, 1, 0, 1): -1.0,
            },
            {
                (0, 0, 0, 1, 0): -SL_OMEGA2,
                (0, 0, 1, 0, 0): r2sq,
                (0, 0, 3, 0, 0): -1.0,
                (0, 0, 1, 2, 0): -1.0,
            },
            {
                (0, 0, 1, 0, 0): SL_OMEGA2,
                (0, 0, 0, 1, 0): r2sq,
                (0, 0, 2, 1, 0): -1.0,
                (0, 0, 0, 3, 0): -1.0,
            },
        ],
    )
    return SystemDefinition(
        name="stuart_landau",
        state_dim=4,
        rhs=rhs,
        library_degree=3,
        library=lib,
        true_coefficients=truth,
        mu_range=(0.0, 1.817),
        state_box=((-1.5, 1.5),) * 4,
    )


def lorenz() -> SystemDefinition:
    """Lorenz equations with sigma=10, beta=8/3 and mu in place of rho."""

    def rhs(x: np.ndarray, mu: float) -> np.ndarray:
        u, v, w = x[0], x[1], x[2]
        return np.array(
            [
                LORENZ_SIGMA * (v - u),
                u * (mu - w) - v,
                u * v - LORENZ_BETA * w,
            ]
        )

    lib = build_library(3, 4, ["x", "y", "z"])
    truth = _coefficients(
        lib,
        [
            {(0, 1, 0, 0): LORENZ_SIGMA, (1, 0, 0, 0): -LORENZ_SIGMA},
            {(1, 0, 0, 1): 1.0, (1, 0, 1, 0): -1.0, (0, 1, 0, 0): -1.0},
            {(1, 1, 0, 0): 1.0, (0, 0, 1, 0): -LORENZ_BETA},
        ],
    )

    def branch(sign: float) -> Callable[[float], np.ndarray]:
        def guess(mu: float) -> np.ndarray:
            radius = math.sqrt(max(LORENZ_BETA * (mu - 1.0), 0.0))
            return np.array([sign * radius, sign * radius, mu - 1.0])

        return guess

    return SystemDefinition(
        name="lorenz",
        state_dim=3,
        rhs=rhs,
        library_degree=4,
        library=lib,
        true_coefficients=truth,
        mu_range=(16.0, 28.0),
        state_box=((-25.0, 25.0), (-25.0, 25.0), (0.0, 50.0)),
        equilibrium_branches={"positive": branch(+1.0), "negative": branch(-1.0)},
    )


_REGISTRY: dict[str, Callable[[], SystemDefinition]] = {
    "saddle_node": saddle_node,
    "hopf": hopf_normal_form,
    "stuart_landau": coupled_stuart_landau,
    "lorenz": lorenz,
}

SYSTEM_NAMES = tuple(_REGISTRY)


def get_system(name: str) -> SystemDefinition:
    """Look up a benchmark system by its registry name."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown system {name!r}; valid names: {', '.join(SYSTEM_NAMES)}"
        ) from None
    return factory()
