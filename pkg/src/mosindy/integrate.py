"""Adaptive Runge-Kutta time integration of the parameterized systems.

A thin, contract-enforcing wrapper around SciPy's Dormand-Prince 5(4) solver
(``solve_ivp`` method ``RK45``): embedded 4(5) error control with dense output
by the scheme's own continuous extension, so evenly sampled trajectories and
burst stencils are not polluted by linear-interpolation error.  Integration is
a pure function of its inputs; identical calls return bit-identical
trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import solve_ivp

if TYPE_CHECKING:
    from .dynamics import SystemDefinition


class StepUnderflow(RuntimeError):
    """The adaptive step collapsed; the problem is stiff or blowing up."""


class NonFinite(RuntimeError):
    """A state became non-finite during integration."""


@dataclass(frozen=True)
class IntegrationConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    dense_dt: float = 0.01

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be strictly positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be strictly positive")
        if self.dense_dt <= 0:
            raise ValueError("dense_dt must be strictly positive")


@dataclass(frozen=True)
class Trajectory:
    """States sampled on a uniform time grid for one parameter value."""

    times: np.ndarray
    states: np.ndarray
    parameter: float

    def __post_init__(self):
        if self.times.shape[0] != self.states.shape[0]:
            raise ValueError("times and states must have equal lengths")

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]


def _solve(system: "SystemDefinition", x0, mu: float, t_eval: np.ndarray, config: IntegrationConfig):
    rhs = system.rhs

    def fun(t, y):
        if not np.all(np.isfinite(y)):
            raise NonFinite(f"state became non-finite at t={t:.6g} (mu={mu:.6g})")
        return rhs(y, mu)

    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.state_dim,):
        raise ValueError(
            f"initial condition has shape {x0.shape}, expected ({system.state_dim},)"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(
            fun,
            (0.0, float(t_eval[-1])),
            x0,
            method="RK45",
            t_eval=t_eval,
            rtol=config.rel_tol,
            atol=config.abs_tol,
            max_step=config.max_step,
        )
    if not sol.success:
        raise StepUnderflow(f"integration failed at mu={mu:.6g}: {sol.message}")
    states = sol.y.T
    if not np.all(np.isfinite(states)):
        raise NonFinite(f"sampled states contain non-finite values (mu={mu:.6g})")
    return states


def integrate(
    system: "SystemDefinition",
    x0,
    mu: float,
    t_final: float,
    config: IntegrationConfig | None = None,
) -> Trajectory:
    """Integrate from ``x0`` and sample every ``dense_dt`` up to ``t_final``."""
    if config is None:
        config = IntegrationConfig()
    if t_final <= 0:
        raise ValueError("t_final must be strictly positive")
    n_samples = int(math.floor(t_final / config.dense_dt + 1e-9)) + 1
    times = np.arange(n_samples) * config.dense_dt
    states = _solve(system, x0, mu, times, config)
    return Trajectory(times=times, states=states, parameter=float(mu))


def sample_at(
    system: "SystemDefinition",
    x0,
    mu: float,
    times: np.ndarray,
    config: IntegrationConfig | None = None,
) -> np.ndarray:
    """States at an arbitrary increasing time grid (used for burst stencils)."""
    if config is None:
        config = IntegrationConfig()
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.shape[0] == 0:
        raise ValueError("times must be a non-empty 1-D array")
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be non-negative and strictly increasing")
    return _solve(system, x0, mu, times, config)
