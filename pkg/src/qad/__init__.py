"""Quantum forward-mode algorithmic differentiation on simulated fixed-point registers."""

from .analysis import (
    CostReport,
    DualNumber,
    ErrorReport,
    cost_estimate,
    error_bounds,
    oracle_eval,
    oracle_fixed,
    oracle_fixed_trace,
)
from .engine import RunConfig, RunResult, fanout_valder, run
from .errors import (
    AncillaExhaustedError,
    DomainError,
    FixedPointOverflowError,
    FormatError,
    ParseError,
    QADError,
    ResetRequiredError,
    SingularityWarning,
    WidthError,
)
from .fixedpoint import FixedPointFormat, FixedPointValue, decode, encode, truncate_to
from .graphir import CompGraph, build_graph, parse, size_plan, to_dot, to_text
from .primitives import PRIMITIVES, ValderState
from .registers import GateEvent, RegisterMachine

__version__ = "0.1.0"
