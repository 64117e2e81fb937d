"""Dataset generation: transients, attractor measurements, noise and decimation.

Transient trajectories are sampled on a fast uniform grid and differentiated
with the 5-point 4th-order central stencil (two boundary points dropped at
each end, no one-sided formulas).  Attractor data comes either from
root-finding on stable fixed points (derivative exactly zero) or from burst
sampling: short 5-point bursts at the fast rate, spaced by a much slower rate,
keeping only each burst's central point and its stencil derivative.

Noise is injected on the raw measured trajectory of a transient and the
derivatives are then recomputed from the noisy signal, which is what an
experimenter would face.  Every stochastic operation takes an explicit seed
feeding a counter-based Philox generator, so experiments replay exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence, Union

import numpy as np
from scipy.optimize import root as scipy_root

from ._io import csv_text, fmt_float, generator_id
from .integrate import IntegrationConfig, integrate, sample_at

if TYPE_CHECKING:
    from .dynamics import SystemDefinition


class TooFewSamples(ValueError):
    """The central stencil needs at least five uniformly spaced samples."""


class KindMismatch(ValueError):
    """Operation applied to the wrong measurement kind."""


class NoConvergence(RuntimeError):
    """Root-finding failed to locate the requested equilibrium."""


class WrongStability(RuntimeError):
    """The located equilibrium is not stable."""


class SampleKind(str, Enum):
    TRANSIENT = "transient"
    ATTRACTOR = "attractor"


@dataclass(frozen=True)
class SampleSet:
    """Row-aligned states, parameter values and time derivatives.

    Transient sets additionally keep the raw uniformly sampled trajectory so
    noise can be injected on the measured signal and re-differentiated.
    """

    kind: SampleKind
    states: np.ndarray
    parameters: np.ndarray
    derivatives: np.ndarray
    meta: dict = field(default_factory=dict)
    raw_states: np.ndarray | None = None
    raw_dt: float | None = None

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        derivatives = np.atleast_2d(np.asarray(self.derivatives, dtype=float))
        parameters = np.asarray(self.parameters, dtype=float).reshape(-1)
        if states.shape != derivatives.shape:
            raise ValueError("states and derivatives must have identical shapes")
        if parameters.shape[0] != states.shape[0]:
            raise ValueError("parameters must align with state rows")
        if not np.all(np.isfinite(derivatives)):
            raise ValueError("derivatives must be finite")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "derivatives", derivatives)
        object.__setattr__(self, "parameters", parameters)

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class FixedPoint:
    """Attractor rule: one root-found equilibrium on the named branch."""

    branch: str


@dataclass(frozen=True)
class Sampled:
    """Attractor rule: burst-sampled points after settling onto the attractor."""

    count: int
    interval: float
    settle_time: float


AttractorRule = Union[FixedPoint, Sampled]


@dataclass(frozen=True)
class ScheduleSpec:
    """Per-system sampling recipe across the parameter range."""

    parameter_values: tuple[float, ...]
    initial_condition: np.ndarray
    n_points: int
    dt: float
    attractor_spec: tuple[AttractorRule, ...]
    single_transient_index: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "initial_condition", np.asarray(self.initial_condition, dtype=float)
        )
        object.__setattr__(self, "parameter_values", tuple(float(v) for v in self.parameter_values))
        if self.n_points < 5:
            raise ValueError("n_points must be >= 5 for the central stencil")
        if self.dt <= 0:
            raise ValueError("dt must be strictly positive")
        if len(self.attractor_spec) != len(self.parameter_values):
            raise ValueError("one attractor rule is required per parameter value")
        if not 0 <= self.single_transient_index < len(self.parameter_values):
            raise ValueError("single_transient_index out of range")


def default_schedule(name: str) -> ScheduleSpec:
    """The benchmark sampling recipe for one of the four named systems."""
    if name == "saddle_node":
        mus = tuple(np.linspace(-6.0, -0.182, 10)) + tuple(np.linspace(0.182, 6.0, 10))
        rules = tuple(
            FixedPoint("negative") if mu < 0 else FixedPoint("positive") for mu in mus
        )
        return ScheduleSpec(
            parameter_values=mus,
            initial_condition=np.zeros(1),
            n_points=1000,
            dt=0.01,
            attractor_spec=rules,
            single_transient_index=9,  # mu = -0.182
        )
    if name == "hopf":
        mus = [-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.01, 0.5, 1.0, 1.5, 2.0]
        mus += [0.3, 0.4, 0.5]  # stated extras; 0.5 repeats, kept for the count of 14
        rules: list[AttractorRule] = []
        for mu in mus:
            if mu < 0:
                rules.append(FixedPoint("origin"))
            else:
                # slow radial convergence near the bifurcation needs longer settling
                rules.append(Sampled(count=5, interval=1.1, settle_time=max(50.0, 12.0 / mu)))
        return ScheduleSpec(
            parameter_values=tuple(mus),
            initial_condition=np.array([2.0, 0.0]),
            n_points=2000,
            dt=0.01,
            attractor_spec=tuple(rules),
            single_transient_index=6,  # mu = 0.01
        )
    if name == "stuart_landau":
        mus = tuple(np.linspace(0.0, 1.817, 10))
        rules = tuple(Sampled(count=12, interval=1.0, settle_time=2000.0) for _ in mus)
        return ScheduleSpec(
            parameter_values=mus,
            initial_condition=np.array([1e-4, 0.0, 1e-2, 0.0]),
            n_points=5020,
            dt=0.01,
            attractor_spec=rules,
            single_transient_index=9,  # mu = 1.817
        )
    if name == "lorenz":
        from .dynamics import LORENZ_MU_HOPF

        mus = tuple(float(mu) for mu in range(16, 29))
        rules = tuple(
            FixedPoint("positive")
            if mu < LORENZ_MU_HOPF
            else Sampled(count=25, interval=0.2, settle_time=70.0)
            for mu in mus
        )
        return ScheduleSpec(
            parameter_values=mus,
            initial_condition=np.array([30.0, -30.0, 50.0]),
            n_points=500,
            dt=0.001,
            attractor_spec=rules,
            single_transient_index=10,  # mu = 26
        )
    raise ValueError(f"no default schedule for system {name!r}")


def differentiate_central4(states: np.ndarray, dt: float) -> np.ndarray:
    """5-point 4th-order central differences at interior points.

    Row i of the output approximates the derivative at input row i + 2; the
    two points at each boundary are dropped.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    m = states.shape[0]
    if m < 5:
        raise TooFewSamples(f"need at least 5 samples, got {m}")
    if dt <= 0:
        raise ValueError("dt must be strictly positive")
    return (
        states[:-4] - 8.0 * states[1:-3] + 8.0 * states[3:-1] - states[4:]
    ) / (12.0 * dt)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**63 - 1)))


def _transient_from_raw(mu: float, raw: np.ndarray, dt: float, meta: dict) -> SampleSet:
    derivatives = differentiate_central4(raw, dt)
    states = raw[2:-2]
    parameters = np.full(states.shape[0], mu)
    return SampleSet(
        kind=SampleKind.TRANSIENT,
        states=states,
        parameters=parameters,
        derivatives=derivatives,
        meta=meta,
        raw_states=raw,
        raw_dt=dt,
    )


@dataclass(frozen=True)
class TransientBatch:
    """Per-parameter transient sample sets plus any per-parameter failures."""

    samples: tuple[SampleSet, ...]
    failures: dict[int, str] = field(default_factory=dict)


def generate_transients(
    system: "SystemDefinition",
    schedule: ScheduleSpec,
    config: IntegrationConfig | None = None,
) -> TransientBatch:
    """Integrate one transient per scheduled parameter value and differentiate.

    Each transient keeps the interior ``n_points - 4`` rows after the central
    stencil; integration failures are collected per parameter value instead of
    aborting the batch.
    """
    if config is None:
        config = IntegrationConfig(dense_dt=schedule.dt)
    elif config.dense_dt != schedule.dt:
        config = replace(config, dense_dt=schedule.dt)
    t_final = (schedule.n_points - 1) * schedule.dt
    samples: list[SampleSet] = []
    failures: dict[int, str] = {}
    for index, mu in enumerate(schedule.parameter_values):
        try:
            trajectory = integrate(system, schedule.initial_condition, mu, t_final, config)
        except RuntimeError as exc:
            failures[index] = f"{type(exc).__name__}: {exc}"
            continue
        raw = trajectory.states[: schedule.n_points]
        meta = {
            "system": system.name,
            "kind": SampleKind.TRANSIENT.value,
            "mu": float(mu),
            "schedule_index": index,
            "dt": schedule.dt,
            "n_points": schedule.n_points,
            "generator": generator_id(),
        }
        samples.append(_transient_from_raw(mu, raw, schedule.dt, meta))
    return TransientBatch(samples=tuple(samples), failures=failures)


def burst_sample_attractor(
    system: "SystemDefinition",
    mu: float,
    settle_time: float,
    count: int,
    interval: float,
    dt: float,
    config: IntegrationConfig | None = None,
    initial_condition: np.ndarray | None = None,
) -> SampleSet:
    """Burst-sample an attractor after a settling period.

    At ``count`` instants spaced ``interval`` apart past ``settle_time``, a
    5-point burst at spacing ``dt`` is recorded; only each burst's central
    point is retained, with its central-difference derivative.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if interval <= 4 * dt:
        raise ValueError("interval must exceed the 4*dt burst width")
    if config is None:
        config = IntegrationConfig(dense_dt=dt)
    if initial_condition is None:
        initial_condition = np.ones(system.state_dim)
    centers = settle_time + interval * np.arange(1, count + 1)
    offsets = dt * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    stencil_times = (centers[:, None] + offsets[None, :]).ravel()
    states = sample_at(system, initial_condition, mu, stencil_times, config)
    bursts = states.reshape(count, 5, system.state_dim)

    rows = bursts[:, 2, :]
    derivatives = np.vstack(
        [differentiate_central4(bursts[k], dt) for k in range(count)]
    )
    meta = {
        "system": system.name,
        "kind": SampleKind.ATTRACTOR.value,
        "mu": float(mu),
        "settle_time": settle_time,
        "count": count,
        "interval": interval,
        "dt": dt,
        "generator": generator_id(),
    }
    return SampleSet(
        kind=SampleKind.ATTRACTOR,
        states=rows,
        parameters=np.full(count, float(mu)),
        derivatives=derivatives,
        meta=meta,
    )


def _finite_difference_jacobian(system: "SystemDefinition", x: np.ndarray, mu: float) -> np.ndarray:
    n = x.shape[0]
    jac = np.empty((n, n))
    for j in range(n):
        h = 1e-6 * (1.0 + abs(x[j]))
        forward = x.copy()
        backward = x.copy()
        forward[j] += h
        backward[j] -= h
        jac[:, j] = (system.rhs(forward, mu) - system.rhs(backward, mu)) / (2.0 * h)
    return jac


def fixed_point_sample(
    system: "SystemDefinition", mu: float, which_branch: str
) -> SampleSet:
    """One stable equilibrium, root-found on the selected branch, derivative zero."""
    try:
        guess_fn = system.equilibrium_branches[which_branch]
    except KeyError:
        raise ValueError(
            f"system {system.name!r} has no branch {which_branch!r}; "
            f"known: {', '.join(system.equilibrium_branches)}"
        ) from None
    guess = guess_fn(mu)
    result = scipy_root(lambda x: system.rhs(x, mu), guess, method="hybr", tol=1e-13)
    x_star = result.x
    # Newton polish with the finite-difference Jacobian down to the fp floor.
    for _ in range(10):
        f = system.rhs(x_star, mu)
        if np.max(np.abs(f)) <= 1e-13:
            break
        try:
            x_star = x_star - np.linalg.solve(
                _finite_difference_jacobian(system, x_star, mu), f
            )
        except np.linalg.LinAlgError:
            break
    residual = np.max(np.abs(system.rhs(x_star, mu)))
    if residual > 1e-12:
        raise NoConvergence(
            f"root-finding failed on branch {which_branch!r} at mu={mu:.6g} "
            f"(|rhs| = {residual:.3e})"
        )
    significant = np.abs(guess) > 1e-9
    if np.any(np.sign(x_star[significant]) != np.sign(guess[significant])):
        raise NoConvergence(
            f"root at mu={mu:.6g} does not lie on the {which_branch!r} branch"
        )
    eigenvalues = np.linalg.eigvals(_finite_difference_jacobian(system, x_star, mu))
    if np.max(eigenvalues.real) > -1e-9:
        raise WrongStability(
            f"equilibrium on branch {which_branch!r} at mu={mu:.6g} is not stable "
            f"(max Re(eig) = {np.max(eigenvalues.real):.3e})"
        )
    meta = {
        "system": system.name,
        "kind": SampleKind.ATTRACTOR.value,
        "mu": float(mu),
        "branch": which_branch,
        "generator": generator_id(),
    }
    return SampleSet(
        kind=SampleKind.ATTRACTOR,
        states=x_star[None, :],
        parameters=np.array([float(mu)]),
        derivatives=np.zeros((1, system.state_dim)),
        meta=meta,
    )


def add_noise(samples: SampleSet, level: float, seed: int) -> SampleSet:
    """Gaussian noise on the raw transient signal, derivatives recomputed.

    The noise standard deviation is ``level`` times the root mean square of
    the clean raw states; the noisy signal is re-differentiated with the same
    central stencil, so row counts are preserved.
    """
    if samples.kind is not SampleKind.TRANSIENT:
        raise KindMismatch("noise injection is defined for transient data only")
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if samples.raw_states is None or samples.raw_dt is None:
        raise ValueError("transient lacks its raw trajectory; cannot re-differentiate")
    raw = samples.raw_states
    sigma = level * float(np.sqrt(np.mean(raw**2)))
    noisy = raw + _rng(seed).normal(0.0, 1.0, size=raw.shape) * sigma
    meta = dict(samples.meta)
    meta.update({"noise_level": float(level), "noise_seed": int(seed)})
    mu = float(samples.parameters[0])
    return _transient_from_raw(mu, noisy, samples.raw_dt, meta)


def decimate(samples: SampleSet, keep_fraction: float, seed: int) -> SampleSet:
    """Keep ceil(keep_fraction * m) rows chosen uniformly without replacement."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    m = samples.n_samples
    kept = math.ceil(keep_fraction * m)
    indices = np.sort(_rng(seed).choice(m, size=kept, replace=False))
    meta = dict(samples.meta)
    meta.update({"keep_fraction": float(keep_fraction), "decimate_seed": int(seed)})
    return SampleSet(
        kind=samples.kind,
        states=samples.states[indices],
        parameters=samples.parameters[indices],
        derivatives=samples.derivatives[indices],
        meta=meta,
    )


def with_analytic_derivatives(system: "SystemDefinition", samples: SampleSet) -> SampleSet:
    """Replace derivative rows with exact right-hand-side evaluations."""
    derivatives = np.vstack(
        [
            system.rhs(samples.states[j], samples.parameters[j])
            for j in range(samples.n_samples)
        ]
    )
    meta = dict(samples.meta)
    meta["derivatives"] = "analytic"
    return SampleSet(
        kind=samples.kind,
        states=samples.states,
        parameters=samples.parameters,
        derivatives=derivatives,
        meta=meta,
        raw_states=samples.raw_states,
        raw_dt=samples.raw_dt,
    )


def merge_samples(sets: Iterable[SampleSet]) -> SampleSet:
    """Concatenate row-aligned sample sets of one kind."""
    sets = list(sets)
    if not sets:
        raise ValueError("nothing to merge")
    kind = sets[0].kind
    if any(s.kind is not kind for s in sets):
        raise KindMismatch("cannot merge transient and attractor data")
    meta = {
        "system": sets[0].meta.get("system", ""),
        "kind": kind.value,
        "merged_from": len(sets),
        "generator": generator_id(),
    }
    return SampleSet(
        kind=kind,
        states=np.vstack([s.states for s in sets]),
        parameters=np.concatenate([s.parameters for s in sets]),
        derivatives=np.vstack([s.derivatives for s in sets]),
        meta=meta,
    )


@dataclass(frozen=True)
class SystemDataset:
    """All scheduled transients and attractor measurements for one system."""

    system: "SystemDefinition"
    schedule: ScheduleSpec
    transients: tuple[SampleSet, ...]
    attractors: tuple[SampleSet, ...]

    @property
    def single_transient(self) -> SampleSet:
        return self.transients[self.schedule.single_transient_index]

    def all_transients(self) -> SampleSet:
        return merge_samples(self.transients)

    def all_attractors(self) -> SampleSet:
        return merge_samples(self.attractors)


def build_dataset(
    system: "SystemDefinition",
    schedule: ScheduleSpec | None = None,
    config: IntegrationConfig | None = None,
    include_attractors: bool = True,
) -> SystemDataset:
    """Generate the scheduled transients and attractor data for one system."""
    if schedule is None:
        schedule = default_schedule(system.name)
    batch = generate_transients(system, schedule, config)
    if batch.failures:
        raise RuntimeError(f"transient generation failed: {batch.failures}")
    attractors: list[SampleSet] = []
    if include_attractors:
        for mu, rule in zip(schedule.parameter_values, schedule.attractor_spec):
            if isinstance(rule, FixedPoint):
                attractors.append(fixed_point_sample(system, mu, rule.branch))
            else:
                attractors.append(
                    burst_sample_attractor(
                        system,
                        mu,
                        settle_time=rule.settle_time,
                        count=rule.count,
                        interval=rule.interval,
                        dt=schedule.dt,
                        config=config,
                        initial_condition=schedule.initial_condition,
                    )
                )
    return SystemDataset(
        system=system,
        schedule=schedule,
        transients=batch.samples,
        attractors=tuple(attractors),
    )


def sample_set_to_csv(samples: SampleSet) -> str:
    """Columnar CSV: mu, x1..xn, dx1..dxn, kind; full round-trip precision."""
    n = samples.state_dim
    header = (
        ["mu"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"dx{i + 1}" for i in range(n)]
        + ["kind"]
    )
    rows = []
    for j in range(samples.n_samples):
        row: list = [float(samples.parameters[j])]
        row.extend(float(v) for v in samples.states[j])
        row.extend(float(v) for v in samples.derivatives[j])
        row.append(samples.kind.value)
        rows.append(row)
    return csv_text(header, rows)


def load_sample_set_csv(text: str, meta: dict | None = None) -> SampleSet:
    """Rebuild a sample set from its CSV text (raw trajectory not recoverable)."""
    lines = [line for line in text.splitlines() if line]
    header = lines[0].split(",")
    if header[0] != "mu" or header[-1] != "kind":
        raise ValueError("unrecognized sample CSV header")
    n = (len(header) - 2) // 2
    mus, states, derivatives, kinds = [], [], [], []
    for line in lines[1:]:
        cells = line.split(",")
        mus.append(float(cells[0]))
        states.append([float(c) for c in cells[1 : 1 + n]])
        derivatives.append([float(c) for c in cells[1 + n : 1 + 2 * n]])
        kinds.append(cells[-1])
    kind = SampleKind(kinds[0])
    if any(k != kind.value for k in kinds):
        raise ValueError("mixed kinds in one sample CSV")
    return SampleSet(
        kind=kind,
        states=np.array(states),
        parameters=np.array(mus),
        derivatives=np.array(derivatives),
        meta=dict(meta or {}),
    )


def sidecar_metadata(samples: SampleSet, extra: dict | None = None) -> dict:
    meta = {k: v for k, v in samples.meta.items()}
    meta["rows"] = samples.n_samples
    meta["state_dim"] = samples.state_dim
    if extra:
        meta.update(extra)
    return meta
