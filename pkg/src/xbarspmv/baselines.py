"""Closed-form execution-time models for the comparison designs.

The 1-D systolic strip and the balanced adder tree pay one cycle per matrix
cell (zeros included); the reconfigurable 2-D grid pays about three cycles
per nonzero partition-wise; the near-memory reduction tree is represented
only by its cycle lower bound.  The crossbar engine itself is never modeled
analytically here; its rows come from the scheduler plus the simulator.

All cycle functions are pure integer arithmetic.  ``log2`` means tree depth
or index width, i.e. ``ceil(log2(x))``.
"""

from __future__ import annotations

import math

import numpy as np

from . import analysis
from .matio import SparseMatrix
from .scheduler import schedule
from .sim import simulate, simulate_naive, utilization_of

__all__ = [
    "cycles_1d",
    "cycles_adder_tree",
    "cycles_flex_tpu",
    "cycles_fafnir_lower_bound",
    "unit_count",
    "compare",
    "ANALYTIC_DESIGNS",
    "XBAR_DESIGNS",
    "ALL_DESIGNS",
]

ANALYTIC_DESIGNS = ("oned", "adder_tree", "flex_tpu", "fafnir_bound")
XBAR_DESIGNS = ("xbar-ec", "xbar-ec-lb", "xbar-naive")
ALL_DESIGNS = XBAR_DESIGNS + ANALYTIC_DESIGNS


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _depth(l: int) -> int:
    """Tree depth / index width of an l-way structure."""
    return math.ceil(math.log2(l)) if l > 1 else 0


def cycles_1d(m: int, n: int, l: int) -> int:
    """Strip of l PEs streaming every matrix cell: mn/l + l + 1."""
    return _ceil_div(m * n, l) + l + 1


def cycles_adder_tree(m: int, n: int, l: int) -> int:
    """l multiplier leaves over a reduction tree: mn/l + log2(l) + 1."""
    return _ceil_div(m * n, l) + _depth(l) + 1


def cycles_flex_tpu(nnz: int, l: int) -> int:
    """Reconfigurable grid, about 3 cycles per nonzero slot: 3 nnz / l.

    ``l`` is the grid side (reconfigure + compute + dump per partition).
    """
    return _ceil_div(3 * nnz, l)


def cycles_fafnir_lower_bound(nnz: int, l: int) -> int:
    """Reduction-tree cycle lower bound: nnz * log2(l) / 4.

    A bound, not an estimate; the tree's dataflow is not modeled.
    """
    return _ceil_div(nnz * _depth(l), 4)


def unit_count(design: str, l: int) -> int:
    """Arithmetic units (multipliers + adders) of a design at nominal
    length l, normalized so every design matches the crossbar engine's
    2l units except the reduction tree, which keeps its native l/2
    multiplier leaves plus per-level adder banks."""
    if design.startswith("xbar"):
        return 2 * l
    if design == "oned":
        return 2 * l  # l PEs, each one multiplier + one adder
    if design == "adder_tree":
        return 2 * l - 1  # l multiplier leaves + (l - 1) adders
    if design == "flex_tpu":
        side = math.isqrt(l)
        return 2 * side * side  # side x side PEs, each multiply + accumulate
    if design == "fafnir_bound":
        lam = max(l // 2, 2)  # half-length tree per the normalized setup
        return lam + (lam // 2) * _depth(lam)
    raise ValueError(f"unknown design id {design!r}")


def _flex_side(l: int) -> int:
    return max(math.isqrt(l), 1)


def compare(mat: SparseMatrix, designs, l: int, energy_model=None, coloring="greedy"):
    """Per-design cycles / utilization / speedup (vs the 1-D strip) /
    energy rows for one matrix.

    Crossbar rows are measured by scheduling and simulating the matrix;
    analytic rows come from the closed forms.  Energy is reported where the
    model has a dynamic-power constant for (design, l), else None.
    """
    base_cycles = cycles_1d(mat.m, mat.n, l)
    v = np.ones(mat.n)
    rows = []
    for design in designs:
        if design in ("xbar-ec", "xbar-ec-lb"):
            mode = "ec" if design == "xbar-ec" else "ec-lb"
            sched = schedule(mat, l, mode=mode, coloring=coloring)
            _, report = simulate(sched, v)
            cycles = report.total_cycles
        elif design == "xbar-naive":
            sched = schedule(mat, l, mode="naive")
            _, report = simulate_naive(sched, v)
            cycles = report.total_cycles
        elif design in ANALYTIC_DESIGNS:
            if design == "oned":
                cycles = base_cycles
            elif design == "adder_tree":
                cycles = cycles_adder_tree(mat.m, mat.n, l)
            elif design == "flex_tpu":
                cycles = cycles_flex_tpu(mat.nnz, _flex_side(l))
            else:
                cycles = cycles_fafnir_lower_bound(mat.nnz, max(l // 2, 2))
            report = analysis.analytic_report(mat, l, cycles, design)
        else:
            raise ValueError(f"unknown design id {design!r}")
        util = utilization_of(report, unit_count(design, l)) if cycles else 0.0
        energy = None
        if energy_model is not None:
            try:
                energy = analysis.energy_estimate(report, energy_model, design)["total_j"]
            except KeyError:
                energy = None
        rows.append(
            {
                "design": design,
                "cycles": int(cycles),
                "utilization": util,
                "speedup_vs_oned": base_cycles / cycles if cycles else 0.0,
                "energy_j": energy,
            }
        )
    return rows
