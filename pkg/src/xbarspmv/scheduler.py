"""Windowed bipartite edge-coloring scheduler for the crossbar SpMV engine.

A matrix is processed l permuted rows at a time (a *window*).  Within a
window each nonzero is an edge between its local row (an adder) and its lane
(the multiplier its column streams through; column ``j`` maps to lane
``j mod l`` unless load balancing installs a custom per-window assignment).
A proper edge coloring assigns every nonzero a buffer timestep such that no
adder and no multiplier sees two elements at the same timestep, which makes
the streamed format collision-free by construction.

Two colorings are provided: the round-based greedy (the production
algorithm) and an exact coloring that meets the max-degree lower bound via
alternating-chain recoloring.  The deliberately collision-prone naive
schedule (per-lane FIFOs, no coloring) is kept as a baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .matio import SparseMatrix

__all__ = [
    "WindowEdges",
    "WindowColoring",
    "ScheduledWindow",
    "ScheduledMatrix",
    "NaiveSchedule",
    "NaiveTrace",
    "VerificationReport",
    "build_window_edges",
    "color_lower_bound",
    "edge_color_greedy",
    "edge_color_exact",
    "load_balance",
    "fill_schedule",
    "build_naive",
    "naive_issue_trace",
    "schedule",
    "verify_schedule",
]

MODES = ("naive", "ec", "ec-lb")
COLORINGS = ("greedy", "exact")


@dataclass(frozen=True)
class WindowEdges:
    """Edges of one window: CSR over local rows, ascending column within a
    row.  ``lanes`` holds each edge's multiplier assignment."""

    index: int
    l: int
    rows_present: int
    row_start: np.ndarray  # (rows_present + 1,)
    local_rows: np.ndarray  # (E,)
    cols: np.ndarray  # (E,) original column indices
    values: np.ndarray  # (E,)
    lanes: np.ndarray  # (E,)

    @property
    def n_edges(self) -> int:
        return int(self.cols.size)

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.row_start)

    def lane_degrees(self) -> np.ndarray:
        return np.bincount(self.lanes, minlength=self.l)


@dataclass(frozen=True)
class WindowColoring:
    """Edge -> timestep assignment for one window (aligned with the window's
    edge arrays)."""

    colors: np.ndarray
    n_colors: int


@dataclass(frozen=True)
class ScheduledWindow:
    """One window of the scheduled storage format: C x l value / local-row /
    column matrices plus the authoritative validity mask."""

    n_colors: int
    m_sch: np.ndarray  # (C, l) float64, 0.0 in invalid slots
    row_sch: np.ndarray  # (C, l) int64, sentinel l in invalid slots
    col_sch: np.ndarray  # (C, l) int64, sentinel n in invalid slots
    valid: np.ndarray  # (C, l) bool


@dataclass(frozen=True)
class ScheduledMatrix:
    """Collision-free scheduled form of a sparse matrix.

    ``row_perm[k]`` is the source row occupying scheduled position ``k``
    (identity when load balancing is off), so window ``w`` holds source rows
    ``row_perm[w*l : w*l + rows_present]`` and local row ``i`` dumps to
    output element ``row_perm[w*l + i]``.  ``lane_maps`` is ``None`` for the
    default ``col mod l`` lane assignment, else one (n,) array per window.
    """

    l: int
    m: int
    n: int
    mode: str
    coloring: str
    row_perm: np.ndarray
    lane_maps: list | None
    windows: list = field(default_factory=list)

    @property
    def n_windows(self) -> int:
        return len(self.windows)

    @property
    def total_colors(self) -> int:
        return int(sum(w.n_colors for w in self.windows))

    def rows_present(self, w: int) -> int:
        return min(self.l, self.m - w * self.l)

    def lane_of(self, w: int, col) -> np.ndarray:
        if self.lane_maps is None:
            return np.asarray(col) % self.l
        return self.lane_maps[w][col]


@dataclass(frozen=True)
class NaiveWindow:
    lane_start: np.ndarray  # (l + 1,) CSR offsets by lane
    local_rows: np.ndarray  # (E,) FIFO order: by lane, then ascending row
    cols: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class NaiveSchedule:
    """Unscheduled per-lane FIFOs (mod-l lanes, ascending row order)."""

    l: int
    m: int
    n: int
    windows: list

    @property
    def n_windows(self) -> int:
        return len(self.windows)

    def rows_present(self, w: int) -> int:
        return min(self.l, self.m - w * self.l)


@dataclass(frozen=True)
class NaiveTrace:
    """Issue trace of a NaiveSchedule under the lowest-lane-first arbiter."""

    total_cycles: int  # includes the 2 pipeline drain cycles
    per_window_cycles: list
    stall_cycles: int
    issue_order: list  # per window: flat FIFO indices in issue order
    cycle_counts: list  # per window: issues per cycle


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    failures: list

    def __str__(self):
        if self.ok:
            return "schedule verification: pass"
        return "schedule verification: FAIL\n  " + "\n  ".join(self.failures)


def _n_windows(m: int, l: int) -> int:
    return -(-m // l) if m else 0


def build_window_edges(mat: SparseMatrix, l: int, row_perm=None, lane_maps=None):
    """Split a matrix into ceil(m/l) windows of edges.

    ``row_perm[k]`` names the source row at scheduled position ``k``; the
    last window may hold fewer than ``l`` rows.
    """
    if l < 1:
        raise ValueError("accelerator length l must be >= 1")
    m, n = mat.m, mat.n
    if row_perm is None:
        row_perm = np.arange(m, dtype=np.int64)
    else:
        row_perm = np.asarray(row_perm, dtype=np.int64)
    pos = np.empty(m, dtype=np.int64)
    pos[row_perm] = np.arange(m, dtype=np.int64)

    positions = pos[mat.rows] if mat.nnz else np.empty(0, dtype=np.int64)
    win = positions // l
    local = positions % l
    order = np.lexsort((mat.cols, local, win))
    win, local = win[order], local[order]
    cols = mat.cols[order]
    values = mat.values[order]

    windows = []
    bounds = np.searchsorted(win, np.arange(_n_windows(m, l) + 1))
    for w in range(_n_windows(m, l)):
        lo, hi = bounds[w], bounds[w + 1]
        rows_present = min(l, m - w * l)
        loc = local[lo:hi]
        c = cols[lo:hi]
        lanes = (c % l) if lane_maps is None else lane_maps[w][c]
        counts = np.bincount(loc, minlength=rows_present)
        row_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        windows.append(
            WindowEdges(
                index=w,
                l=l,
                rows_present=rows_present,
                row_start=row_start,
                local_rows=loc.astype(np.int64),
                cols=c.astype(np.int64),
                values=values[lo:hi],
                lanes=np.ascontiguousarray(lanes, dtype=np.int64),
            )
        )
    return windows


def color_lower_bound(w: WindowEdges) -> int:
    """Minimum feasible timestep count for a window: its maximum vertex
    degree (max nonzeros in any row or any lane)."""
    if w.n_edges == 0:
        return 0
    return int(max(w.row_degrees().max(), w.lane_degrees().max()))


def edge_color_greedy(w: WindowEdges) -> WindowColoring:
    """Round-based greedy coloring; may exceed the lower bound."""
    n_edges = w.n_edges
    colors = np.full(n_edges, -1, dtype=np.int64)
    if n_edges == 0:
        return WindowColoring(colors, 0)
    head = np.full(w.rows_present, -1, dtype=np.int64)
    nxt = np.full(n_edges, -1, dtype=np.int64)
    for i in range(w.rows_present):
        lo, hi = w.row_start[i], w.row_start[i + 1]
        if hi > lo:
            head[i] = lo
            nxt[lo:hi - 1] = np.arange(lo + 1, hi)
    n_colors = _kernels.greedy_color(head, nxt, w.lanes, w.rows_present, w.l, n_edges, colors)
    return WindowColoring(colors, int(n_colors))


def edge_color_exact(w: WindowEdges) -> WindowColoring:
    """Proper coloring with exactly ``color_lower_bound(w)`` colors."""
    n_edges = w.n_edges
    colors = np.full(n_edges, -1, dtype=np.int64)
    if n_edges == 0:
        return WindowColoring(colors, 0)
    n_colors = color_lower_bound(w)
    _kernels.exact_color(w.local_rows, w.lanes, w.rows_present, w.l, n_colors, colors)
    return WindowColoring(colors, n_colors)


def load_balance(mat: SparseMatrix, l: int):
    """Three-step balancing: stable-sort rows by ascending nonzero count,
    then per window stable-sort columns by descending in-window count and
    deal them to lanes in snaked groups of ``l`` (every second group
    reversed, so e.g. sorted columns 1..8 stream as 1,2,4,3,5,6,8,7 for
    l = 2).  Returns (row_perm, per-window lane maps)."""
    if l < 1:
        raise ValueError("accelerator length l must be >= 1")
    m, n = mat.m, mat.n
    row_nnz = np.bincount(mat.rows, minlength=m) if m else np.empty(0, dtype=np.int64)
    row_perm = np.argsort(row_nnz, kind="stable").astype(np.int64)
    pos = np.empty(m, dtype=np.int64)
    pos[row_perm] = np.arange(m, dtype=np.int64)

    win = (pos[mat.rows] // l) if mat.nnz else np.empty(0, dtype=np.int64)
    order = np.argsort(win, kind="stable")
    win_sorted = win[order]
    cols_sorted = mat.cols[order]
    bounds = np.searchsorted(win_sorted, np.arange(_n_windows(m, l) + 1))

    lane_maps = []
    for w in range(_n_windows(m, l)):
        counts = np.bincount(cols_sorted[bounds[w]:bounds[w + 1]], minlength=n)
        col_order = np.argsort(-counts, kind="stable")
        lane_of = np.empty(n, dtype=np.int64)
        for g in range(0, n, l):
            chunk = col_order[g:g + l]
            if (g // l) % 2 == 1:
                chunk = chunk[::-1]
            lane_of[chunk] = np.arange(chunk.size)
        lane_maps.append(lane_of)
    return row_perm, lane_maps


def fill_schedule(windows, colorings, mat: SparseMatrix, l: int, row_perm,
                  lane_maps=None, mode="ec", coloring="greedy") -> ScheduledMatrix:
    """Scatter colored edges into the C x l scheduled matrices.

    Slot (c, lane) receives the edge colored ``c`` on that lane; invalid
    slots carry value 0.0 and the sentinels row = l, col = n, with the
    validity mask authoritative.
    """
    out = []
    for w, coloring_w in zip(windows, colorings):
        c_w = coloring_w.n_colors
        m_sch = np.zeros((c_w, l))
        row_sch = np.full((c_w, l), l, dtype=np.int64)
        col_sch = np.full((c_w, l), mat.n, dtype=np.int64)
        valid = np.zeros((c_w, l), dtype=bool)
        if w.n_edges:
            flat = coloring_w.colors * l + w.lanes
            if np.unique(flat).size != flat.size:
                raise RuntimeError(
                    f"window {w.index}: two edges mapped to one slot (improper coloring)"
                )
            m_sch.reshape(-1)[flat] = w.values
            row_sch.reshape(-1)[flat] = w.local_rows
            col_sch.reshape(-1)[flat] = w.cols
            valid.reshape(-1)[flat] = True
        out.append(ScheduledWindow(c_w, m_sch, row_sch, col_sch, valid))
    return ScheduledMatrix(
        l=l, m=mat.m, n=mat.n, mode=mode, coloring=coloring,
        row_perm=np.asarray(row_perm, dtype=np.int64),
        lane_maps=lane_maps, windows=out,
    )


def build_naive(mat: SparseMatrix, l: int) -> NaiveSchedule:
    """Per-lane FIFOs (mod-l lanes) in ascending row order, no coloring."""
    if l < 1:
        raise ValueError("accelerator length l must be >= 1")
    m = mat.m
    win = mat.rows // l
    local = mat.rows % l
    lane = mat.cols % l
    order = np.lexsort((mat.cols, local, lane, win))
    bounds = np.searchsorted(win[order], np.arange(_n_windows(m, l) + 1))
    windows = []
    for w in range(_n_windows(m, l)):
        sel = order[bounds[w]:bounds[w + 1]]
        lanes_w = lane[sel]
        counts = np.bincount(lanes_w, minlength=l)
        lane_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        windows.append(
            NaiveWindow(
                lane_start=lane_start,
                local_rows=local[sel].astype(np.int64),
                cols=mat.cols[sel].astype(np.int64),
                values=mat.values[sel],
            )
        )
    return NaiveSchedule(l=l, m=mat.m, n=mat.n, windows=windows)


def naive_issue_trace(ns: NaiveSchedule) -> NaiveTrace:
    """Drain every window's FIFOs under the lock-step buffer front.

    The unscheduled buffers share one read pointer, so each front is
    processed as a unit: lanes scanned in ascending order issue iff their
    row is unclaimed this cycle, and collision-blocked elements then drain
    one per cycle before any lane advances.  Windows run back to back, plus
    2 pipeline drain cycles."""
    per_window = []
    issue_orders = []
    cycle_counts = []
    stalls = 0
    for nw in ns.windows:
        n_edges = nw.local_rows.size
        depth_max = int(np.diff(nw.lane_start).max()) if n_edges else 0
        issue_order = np.empty(n_edges, dtype=np.int64)
        counts = np.zeros(max(n_edges + depth_max, 1), dtype=np.int64)
        if n_edges:
            cycles, st = _kernels.naive_trace(
                nw.local_rows, nw.lane_start, ns.l, issue_order, counts
            )
        else:
            cycles, st = 0, 0
        per_window.append(int(cycles))
        stalls += int(st)
        issue_orders.append(issue_order)
        cycle_counts.append(counts[:cycles].copy())
    return NaiveTrace(
        total_cycles=int(sum(per_window)) + 2,
        per_window_cycles=per_window,
        stall_cycles=stalls,
        issue_order=issue_orders,
        cycle_counts=cycle_counts,
    )


def schedule(mat: SparseMatrix, l: int, mode: str = "ec", coloring: str = "greedy"):
    """Produce the scheduled (ec, ec-lb) or naive storage form of a matrix."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r} (expected one of {MODES})")
    if coloring not in COLORINGS:
        raise ValueError(f"unknown coloring {coloring!r} (expected one of {COLORINGS})")
    if mode == "naive":
        return build_naive(mat, l)
    if mode == "ec-lb":
        row_perm, lane_maps = load_balance(mat, l)
    else:
        row_perm, lane_maps = np.arange(mat.m, dtype=np.int64), None
    windows = build_window_edges(mat, l, row_perm, lane_maps)
    color = edge_color_greedy if coloring == "greedy" else edge_color_exact
    colorings = [color(w) for w in windows]
    return fill_schedule(windows, colorings, mat, l, row_perm, lane_maps, mode, coloring)


def verify_schedule(s: ScheduledMatrix, mat: SparseMatrix) -> VerificationReport:
    """Check the scheduled-format invariants against the source matrix.

    Verifies: per-timestep collision freedom, lane consistency of every
    valid slot, sentinel conventions, the bijection between valid slots and
    source nonzeros (through the row permutation and lane assignment), and
    that the total timestep count is at least the per-window degree bound.
    Failures are data, not exceptions.
    """
    failures = []
    l, m, n = s.l, s.m, s.n

    if len(s.windows) != _n_windows(m, l):
        failures.append(f"window count {len(s.windows)} != ceil(m/l)")
    if sorted(s.row_perm.tolist()) != list(range(m)):
        failures.append("row_perm is not a permutation of [0, m)")

    rec_rows, rec_cols, rec_vals = [], [], []
    lb_total = 0
    for w, sw in enumerate(s.windows):
        rows_present = s.rows_present(w)
        tt, lane_idx = np.nonzero(sw.valid)
        rows_v = sw.row_sch[tt, lane_idx]
        cols_v = sw.col_sch[tt, lane_idx]

        if rows_v.size and (rows_v.min() < 0 or rows_v.max() >= rows_present):
            bad = np.argmax((rows_v < 0) | (rows_v >= rows_present))
            failures.append(
                f"window {w}, t={tt[bad]}, lane={lane_idx[bad]}: local row "
                f"{rows_v[bad]} outside populated range [0, {rows_present})"
            )
        # collision freedom: distinct local rows per timestep
        key = tt * (l + 1) + rows_v
        uniq, first, counts = np.unique(key, return_index=True, return_counts=True)
        if (counts > 1).any():
            bad = first[np.argmax(counts > 1)]
            failures.append(
                f"window {w}, t={tt[bad]}: local row {rows_v[bad]} appears twice"
            )
        # lane consistency
        if cols_v.size:
            expect = s.lane_of(w, cols_v)
            if (expect != lane_idx).any():
                bad = np.argmax(expect != lane_idx)
                failures.append(
                    f"window {w}, t={tt[bad]}, lane={lane_idx[bad]}: column "
                    f"{cols_v[bad]} belongs to lane {expect[bad]}"
                )
        # sentinels on invalid slots
        inv = ~sw.valid
        if inv.any():
            if (sw.m_sch[inv] != 0.0).any() or (sw.row_sch[inv] != l).any() or (
                sw.col_sch[inv] != n
            ).any():
                failures.append(f"window {w}: invalid slot without sentinel values")

        ok_rows = np.clip(rows_v, 0, rows_present - 1) if rows_present else rows_v
        rec_rows.append(s.row_perm[w * l + ok_rows] if rows_v.size else rows_v)
        rec_cols.append(cols_v)
        rec_vals.append(sw.m_sch[tt, lane_idx])

        # degree bound from the recovered edges themselves
        if rows_v.size:
            lb_total += int(
                max(
                    np.bincount(rows_v).max(),
                    np.bincount(s.lane_of(w, cols_v), minlength=l).max(),
                )
            )

    rec_rows = np.concatenate(rec_rows) if rec_rows else np.empty(0, dtype=np.int64)
    rec_cols = np.concatenate(rec_cols) if rec_cols else np.empty(0, dtype=np.int64)
    rec_vals = np.concatenate(rec_vals) if rec_vals else np.empty(0)
    if rec_rows.size != mat.nnz:
        failures.append(f"valid slot count {rec_rows.size} != nnz {mat.nnz}")
    else:
        order = np.lexsort((rec_cols, rec_rows))
        if (
            not np.array_equal(rec_rows[order], mat.rows)
            or not np.array_equal(rec_cols[order], mat.cols)
            or not np.array_equal(rec_vals[order], mat.values)
        ):
            failures.append("recovered (row, col, value) multiset differs from source")

    if s.total_colors < lb_total:
        failures.append(
            f"total colors {s.total_colors} below degree lower bound {lb_total}"
        )
    return VerificationReport(ok=not failures, failures=failures)
