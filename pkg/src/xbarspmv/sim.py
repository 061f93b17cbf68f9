"""Cycle-accurate functional model of the crossbar SpMV datapath.

Three pipeline stages: at each timestep every populated lane multiplies its
streamed value with the vector element named by its column index, the
crossbar routes the product to the adder named by its local row index, and
the adders accumulate.  After a window's last timestep the dump signal
flushes the accumulators into the output vector.  Windows run back to back;
the pipeline adds 2 drain cycles at the end.

A runtime collision detector asserts that no adder receives two products in
one timestep, which a proper schedule guarantees; it firing means the
schedule is broken, not the datapath.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .scheduler import NaiveSchedule, NaiveTrace, ScheduledMatrix, naive_issue_trace

__all__ = ["SimReport", "CollisionError", "simulate", "simulate_naive", "utilization_of"]

PIPELINE_DRAIN_CYCLES = 2  # multiply, route, accumulate = 3 levels


class CollisionError(RuntimeError):
    """Two products routed to one adder in the same timestep."""


@dataclass(frozen=True)
class SimReport:
    """Outcome of one simulated run."""

    total_cycles: int
    per_window_cycles: list
    active_lane_histogram: np.ndarray  # valid lanes per cycle, len == total_cycles
    utilization: float  # nnz / (l * total_cycles)
    stall_cycles: int  # naive mode only; 0 for scheduled runs
    flops: int  # 2 * nnz (multiply + accumulate per nonzero)
    checksum: str  # sha256 of the output vector bytes
    l: int
    m: int
    n: int
    nnz: int
    mode: str

    def to_dict(self) -> dict:
        return {
            "total_cycles": self.total_cycles,
            "per_window_cycles": list(map(int, self.per_window_cycles)),
            "active_lane_histogram": [int(x) for x in self.active_lane_histogram],
            "utilization": self.utilization,
            "stall_cycles": self.stall_cycles,
            "flops": self.flops,
            "checksum": self.checksum,
            "l": self.l,
            "m": self.m,
            "n": self.n,
            "nnz": self.nnz,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d) -> "SimReport":
        return cls(
            total_cycles=int(d["total_cycles"]),
            per_window_cycles=[int(x) for x in d["per_window_cycles"]],
            active_lane_histogram=np.asarray(d["active_lane_histogram"], dtype=np.int64),
            utilization=float(d["utilization"]),
            stall_cycles=int(d["stall_cycles"]),
            flops=int(d["flops"]),
            checksum=str(d["checksum"]),
            l=int(d["l"]),
            m=int(d["m"]),
            n=int(d["n"]),
            nnz=int(d["nnz"]),
            mode=str(d["mode"]),
        )


def _checksum(y: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(y).tobytes()).hexdigest()


def _finish(y, per_window_cycles, hist_parts, stall_cycles, l, m, n, nnz, mode):
    total = int(sum(per_window_cycles)) + PIPELINE_DRAIN_CYCLES
    hist_parts.append(np.zeros(PIPELINE_DRAIN_CYCLES, dtype=np.int64))
    hist = np.concatenate(hist_parts) if hist_parts else np.zeros(total, dtype=np.int64)
    report = SimReport(
        total_cycles=total,
        per_window_cycles=list(map(int, per_window_cycles)),
        active_lane_histogram=hist,
        utilization=nnz / (l * total),
        stall_cycles=int(stall_cycles),
        flops=2 * nnz,
        checksum=_checksum(y),
        l=l,
        m=m,
        n=n,
        nnz=nnz,
        mode=mode,
    )
    return y, report


def simulate(s: ScheduledMatrix, v) -> tuple[np.ndarray, SimReport]:
    """Run a scheduled matrix through the datapath; returns (y, report).

    Products are accumulated in ascending lane order within a timestep and
    ascending timestep order within a window, so runs are deterministic.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (s.n,):
        raise ValueError(f"vector length {v.shape} does not match n={s.n}")
    v_ext = np.concatenate([v, [0.0]])  # invalid slots carry the column sentinel n

    y = np.zeros(s.m)
    nnz = 0
    per_window_cycles = []
    hist_parts = []
    for w, sw in enumerate(s.windows):
        l = s.l
        tt, lane_idx = np.nonzero(sw.valid)  # row-major: timestep, then lane
        rows = sw.row_sch[tt, lane_idx]
        key = tt * (l + 1) + rows
        uniq, first, counts = np.unique(key, return_index=True, return_counts=True)
        if (counts > 1).any():
            bad = first[np.argmax(counts > 1)]
            raise CollisionError(
                f"window {w}, timestep {tt[bad]}: adder {rows[bad]} receives two products"
            )
        products = sw.m_sch[tt, lane_idx] * v_ext[sw.col_sch[tt, lane_idx]]
        acc = np.zeros(l)
        np.add.at(acc, rows, products)
        rp = s.rows_present(w)
        y[s.row_perm[w * l: w * l + rp]] = acc[:rp]  # dump; out-of-window adders hold 0
        nnz += rows.size
        per_window_cycles.append(sw.n_colors)
        hist_parts.append(sw.valid.sum(axis=1).astype(np.int64))
    return _finish(y, per_window_cycles, hist_parts, 0, s.l, s.m, s.n, nnz, s.mode)


def simulate_naive(ns: NaiveSchedule, v, trace: NaiveTrace | None = None):
    """Run the collision-prone naive schedule; stalls come from the
    lowest-lane-first arbiter blocking same-row heads."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (ns.n,):
        raise ValueError(f"vector length {v.shape} does not match n={ns.n}")
    if trace is None:
        trace = naive_issue_trace(ns)

    y = np.zeros(ns.m)
    nnz = 0
    hist_parts = []
    for w, nw in enumerate(ns.windows):
        order = trace.issue_order[w]
        rows = nw.local_rows[order]
        products = nw.values[order] * v[nw.cols[order]]
        acc = np.zeros(ns.l)
        np.add.at(acc, rows, products)  # per-adder order equals issue order
        rp = ns.rows_present(w)
        y[w * ns.l: w * ns.l + rp] = acc[:rp]
        nnz += rows.size
        hist_parts.append(trace.cycle_counts[w])
    return _finish(
        y, trace.per_window_cycles, hist_parts, trace.stall_cycles,
        ns.l, ns.m, ns.n, nnz, "naive",
    )


def utilization_of(report: SimReport, unit_count: int) -> float:
    """Useful-operation slots over available unit-cycles.

    Each nonzero costs one multiply and one add, so useful slots are
    2 * nnz; with the crossbar engine's 2l units this reduces to
    nnz / (l * cycles), the report's own utilization field.
    """
    if unit_count <= 0:
        raise ValueError("unit_count must be positive")
    if report.total_cycles == 0:
        return 0.0
    return 2.0 * report.nnz / (unit_count * report.total_cycles)
