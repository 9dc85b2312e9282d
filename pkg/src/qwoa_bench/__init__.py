"""Benchmarking suite for the non-variational QWOA on weighted maxcut.

Exact statevector simulation of the three-parameter quantum walk heuristic,
classical local-search baselines, a Grover baseline, and the surrounding
experiment orchestration (adaptive depth sweeps, interpolation, curve fits,
reports).
"""

__version__ = "0.1.0"

from qwoa_bench.graphs import LibraryConfig, WeightedGraph, generate_instance
from qwoa_bench.landscape import ObjectiveTable, build_objective_table, count_local_optima
from qwoa_bench.schedule import ScheduleParams, expand_schedule, optimize
from qwoa_bench.simulator import (
    LayerSchedule,
    Statevector,
    equal_superposition,
    evolve,
    expectation,
    optimal_probability,
)

__all__ = [
    "LibraryConfig",
    "WeightedGraph",
    "generate_instance",
    "ObjectiveTable",
    "build_objective_table",
    "count_local_optima",
    "ScheduleParams",
    "expand_schedule",
    "optimize",
    "LayerSchedule",
    "Statevector",
    "equal_superposition",
    "evolve",
    "expectation",
    "optimal_probability",
    "__version__",
]
