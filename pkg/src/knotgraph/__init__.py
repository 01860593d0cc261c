"""Positive bound states of -u'' + u = |u|^{p-2} u on single-knot metric graphs."""
from __future__ import annotations

from .scalar_core import Nonlinearity
from .graph_model import HalfLineSplit, RegularGraph, SingleKnotGraph
from .length_functions import LengthQuery, L1, L2, solve_length
from .bound_state import (
    build_core_symmetric,
    classify_monotone,
    concentrated_state,
    rank_candidates,
    soliton_action,
)

__all__ = [
    "Nonlinearity",
    "HalfLineSplit",
    "RegularGraph",
    "SingleKnotGraph",
    "LengthQuery",
    "L1",
    "L2",
    "solve_length",
    "build_core_symmetric",
    "classify_monotone",
    "concentrated_state",
    "rank_candidates",
    "soliton_action",
]
