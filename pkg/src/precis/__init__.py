"""precis: reduced-mantissa floating-point emulation, energy estimation,
and multi-objective precision search over built-in benchmark kernels."""

from .energy import EpiTable, ExecutionCounters, energy_report, profile_report
from .explore import (
    EvalPoint,
    GaParams,
    SearchSpace,
    exhaustive_search,
    lower_convex_hull,
    nsga2_search,
    quantize_frontier,
    robustness,
)
from .fpcore import FpValue, Fpi, OpClass, Width, apply_fpi, manipulated_bits, truncate_mantissa
from .runtime import Instrument, NativeOps
from .scope import CallStack, Configuration, PlacementRule, RuleKind, resolve_fpi

__version__ = "0.1.0"

__all__ = [
    "CallStack",
    "Configuration",
    "EpiTable",
    "EvalPoint",
    "ExecutionCounters",
    "FpValue",
    "Fpi",
    "GaParams",
    "Instrument",
    "NativeOps",
    "OpClass",
    "PlacementRule",
    "RuleKind",
    "SearchSpace",
    "Width",
    "apply_fpi",
    "energy_report",
    "exhaustive_search",
    "lower_convex_hull",
    "manipulated_bits",
    "nsga2_search",
    "profile_report",
    "quantize_frontier",
    "resolve_fpi",
    "robustness",
    "truncate_mantissa",
]
