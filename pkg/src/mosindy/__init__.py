"""mosindy: multi-objective sparse regression for parameterized model discovery.

Discovers parameterized nonlinear dynamics as sparse linear combinations of
monomial candidates, balancing the fit to transient-trajectory data against
the fit to attractor data through a row-weighted stacked regression.
"""

from . import (
    dynamics,
    experiments,
    integrate,
    library,
    metrics,
    regression,
    sampling,
)
from .dynamics import SYSTEM_NAMES, SystemDefinition, get_system
from .library import MonomialLibrary, build_library
from .regression import (
    CoefficientMatrix,
    ConstraintSet,
    WeightedProblem,
    assemble_weighted,
    attractor_constraint_matrices,
    check_feasibility,
    fit_constrained,
    fit_stls,
)
from .sampling import SampleKind, SampleSet, build_dataset, default_schedule

__version__ = "0.1.0"

__all__ = [
    "SYSTEM_NAMES",
    "CoefficientMatrix",
    "ConstraintSet",
    "MonomialLibrary",
    "SampleKind",
    "SampleSet",
    "SystemDefinition",
    "WeightedProblem",
    "assemble_weighted",
    "attractor_constraint_matrices",
    "build_dataset",
    "build_library",
    "check_feasibility",
    "default_schedule",
    "dynamics",
    "experiments",
    "fit_constrained",
    "fit_stls",
    "get_system",
    "integrate",
    "library",
    "metrics",
    "regression",
    "sampling",
]
