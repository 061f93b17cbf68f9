"""Jitted inner loops for the scheduler and the naive issue model.

These are the only hot paths that resist vectorization: the greedy coloring
scans per-vertex edge lists with a shared matching, the exact coloring walks
alternating color chains, and the naive trace arbitrates lane heads cycle by
cycle.  Everything operates on flat int64 arrays prepared by scheduler.py.
"""

import numpy as np
from numba import njit

__all__ = ["greedy_color", "exact_color", "naive_trace"]


@njit(cache=True)
def greedy_color(head, nxt, lanes, n_left, n_lanes, n_edges, colors):
    """Round-based greedy matching coloring.

    Per color: scan left vertices in ascending order; for each, take its
    first remaining edge whose lane is not yet matched this round, color it,
    and move on to the next vertex.  ``head``/``nxt`` form per-vertex singly
    linked lists over the edge arrays and are consumed in place.
    Returns the number of colors used.
    """
    stamp = np.full(n_lanes, -1, np.int64)
    remaining = n_edges
    clr = 0
    while remaining > 0:
        for i in range(n_left):
            e = head[i]
            prev = -1
            while e != -1:
                ln = lanes[e]
                if stamp[ln] != clr:
                    colors[e] = clr
                    stamp[ln] = clr
                    if prev == -1:
                        head[i] = nxt[e]
                    else:
                        nxt[prev] = nxt[e]
                    remaining -= 1
                    break
                prev = e
                e = nxt[e]
        clr += 1
    return clr


@njit(cache=True)
def exact_color(rows, lanes, n_left, n_lanes, n_colors, colors):
    """Proper edge coloring of a bipartite multigraph with exactly
    ``n_colors`` = max degree colors.

    Edges are processed in array order.  When the endpoints of an edge share
    a free color it is used directly; otherwise the alternating chain of the
    two smallest free colors, starting at the lane endpoint, is flipped
    (the chain can never reach the row endpoint in a bipartite graph), which
    frees a common color.
    """
    lcolor = np.full((n_left, n_colors), -1, np.int64)
    rcolor = np.full((n_lanes, n_colors), -1, np.int64)
    path = np.empty(rows.shape[0], np.int64)
    for e in range(rows.shape[0]):
        u = rows[e]
        w = lanes[e]
        chosen = -1
        for c in range(n_colors):
            if lcolor[u, c] == -1 and rcolor[w, c] == -1:
                chosen = c
                break
        if chosen == -1:
            alpha = -1
            beta = -1
            for c in range(n_colors):
                if alpha == -1 and lcolor[u, c] == -1:
                    alpha = c
                if beta == -1 and rcolor[w, c] == -1:
                    beta = c
                if alpha != -1 and beta != -1:
                    break
            # walk the alpha/beta chain from w: alpha into a row vertex,
            # beta back into a lane vertex, until a color is missing
            plen = 0
            on_lane_side = True
            vtx = w
            col = alpha
            while True:
                nxt_e = rcolor[vtx, col] if on_lane_side else lcolor[vtx, col]
                if nxt_e == -1:
                    break
                path[plen] = nxt_e
                plen += 1
                if on_lane_side:
                    vtx = rows[nxt_e]
                else:
                    vtx = lanes[nxt_e]
                on_lane_side = not on_lane_side
                col = beta if col == alpha else alpha
            for k in range(plen):
                pe = path[k]
                lcolor[rows[pe], colors[pe]] = -1
                rcolor[lanes[pe], colors[pe]] = -1
            for k in range(plen):
                pe = path[k]
                colors[pe] = beta if colors[pe] == alpha else alpha
                lcolor[rows[pe], colors[pe]] = pe
                rcolor[lanes[pe], colors[pe]] = pe
            chosen = alpha
        colors[e] = chosen
        lcolor[u, chosen] = e
        rcolor[w, chosen] = e


@njit(cache=True)
def naive_trace(rows, lane_start, n_lanes, issue_order, cycle_counts):
    """Drain per-lane FIFOs under the unscheduled buffers' lock-step front.

    ``rows`` holds local row indices grouped by lane (CSR offsets in
    ``lane_start``).  All lanes share one read pointer: the front (each
    populated lane's next element) is processed as a unit before any lane
    advances.  Within a front, lanes are scanned in ascending order and an
    element issues iff its row is unclaimed this cycle; elements blocked by
    a row collision then drain one per cycle through the serial recovery
    path.  Fills ``issue_order`` (flat entry indices in issue order) and
    ``cycle_counts`` (issues per cycle); returns (cycles, stall_cycles),
    where a stall is any cycle in which a collision left elements blocked.
    """
    depth_max = 0
    for ln in range(n_lanes):
        d = lane_start[ln + 1] - lane_start[ln]
        if d > depth_max:
            depth_max = d
    n_rows_max = rows.max() + 1 if rows.shape[0] > 0 else 1
    claimed = np.full(n_rows_max, -1, np.int64)
    blocked = np.empty(n_lanes, np.int64)
    pos = 0
    cycles = 0
    stalls = 0
    for k in range(depth_max):
        n_blocked = 0
        issued = 0
        for ln in range(n_lanes):
            e = lane_start[ln] + k
            if e < lane_start[ln + 1]:
                r = rows[e]
                if claimed[r] != cycles:
                    claimed[r] = cycles
                    issue_order[pos] = e
                    pos += 1
                    issued += 1
                else:
                    blocked[n_blocked] = e
                    n_blocked += 1
        cycle_counts[cycles] = issued
        if n_blocked > 0:
            stalls += 1
        cycles += 1
        for j in range(n_blocked):
            issue_order[pos] = blocked[j]
            pos += 1
            cycle_counts[cycles] = 1
            if j < n_blocked - 1:
                stalls += 1
            cycles += 1
    return cycles, stalls
