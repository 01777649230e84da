"""Exact symbolic forward-flatness analysis for discrete-time systems.

The package decides forward-flatness by two dual geometric tests, machine
checks that their sequences annihilate each other on every run, and
transforms flat systems into a triangular cascade.
"""

from .errors import DtflatError
from .exprs import Scalar, parse_scalar, solve_linear_in
from .flatness import (
    FlatnessVerdict,
    analyze,
    run_codistribution_test,
    run_distribution_test,
    verify_duality,
)
from .geometry import (
    Chart,
    Codistribution,
    Distribution,
    OneForm,
    VectorField,
    annihilator,
    generic_rank,
    same_span,
)
from .decompose import decompose_cascade, decompose_step, find_first_integrals
from .systems import AdaptedChartHint, DiscreteSystem, build_adapted_chart

__version__ = "0.1.0"

__all__ = [
    "AdaptedChartHint",
    "Chart",
    "Codistribution",
    "DiscreteSystem",
    "Distribution",
    "DtflatError",
    "FlatnessVerdict",
    "OneForm",
    "Scalar",
    "VectorField",
    "analyze",
    "annihilator",
    "build_adapted_chart",
    "decompose_cascade",
    "decompose_step",
    "find_first_integrals",
    "generic_rank",
    "parse_scalar",
    "run_codistribution_test",
    "run_distribution_test",
    "same_span",
    "solve_linear_in",
    "verify_duality",
    "__version__",
]
