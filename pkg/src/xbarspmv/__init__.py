"""Sparse matrix-vector multiplication on a crossbar-connected accelerator:
edge-coloring scheduler, collision-free storage format, cycle-accurate
functional simulation, and analytic cost models for comparison designs.
"""

from .analysis import (
    EnergyModel,
    aggregate,
    bound_montecarlo,
    energy_estimate,
    expected_colors_bound,
    expected_execution_bound,
    expected_utilization,
    load_energy_model,
    required_bandwidth,
)
from .baselines import (
    compare,
    cycles_1d,
    cycles_adder_tree,
    cycles_fafnir_lower_bound,
    cycles_flex_tpu,
    unit_count,
)
from .matio import (
    MatrixMarketError,
    SparseMatrix,
    SynthSpec,
    generate,
    parse_matrix_market,
    read_vector,
    reference_spmv,
    with_values,
    write_matrix_market,
    write_vector,
)
from .scheduler import (
    NaiveSchedule,
    ScheduledMatrix,
    build_naive,
    build_window_edges,
    color_lower_bound,
    edge_color_exact,
    edge_color_greedy,
    fill_schedule,
    load_balance,
    naive_issue_trace,
    schedule,
    verify_schedule,
)
from .sim import CollisionError, SimReport, simulate, simulate_naive, utilization_of

__version__ = "0.1.0"

__all__ = [
    "CollisionError",
    "EnergyModel",
    "MatrixMarketError",
    "NaiveSchedule",
    "ScheduledMatrix",
    "SimReport",
    "SparseMatrix",
    "SynthSpec",
    "aggregate",
    "bound_montecarlo",
    "build_naive",
    "build_window_edges",
    "color_lower_bound",
    "compare",
    "cycles_1d",
    "cycles_adder_tree",
    "cycles_fafnir_lower_bound",
    "cycles_flex_tpu",
    "edge_color_exact",
    "edge_color_greedy",
    "energy_estimate",
    "expected_colors_bound",
    "expected_execution_bound",
    "expected_utilization",
    "fill_schedule",
    "generate",
    "load_balance",
    "load_energy_model",
    "naive_issue_trace",
    "parse_matrix_market",
    "read_vector",
    "reference_spmv",
    "required_bandwidth",
    "schedule",
    "simulate",
    "simulate_naive",
    "unit_count",
    "utilization_of",
    "verify_schedule",
    "with_values",
    "write_matrix_market",
    "write_vector",
    "__version__",
]
