"""Statistical color/runtime bounds, bandwidth, and energy accounting.

The bounds treat a window of a uniform random N x N matrix as 2l
near-independent Binomial(N, p) degree draws (l rows, l lanes); the expected
timestep count per window is then bounded through the standard
moment-generating-function bound on the maximum of Gaussians, which is where
the natural logarithm below comes from.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .matio import SparseMatrix, SynthSpec, generate
from .scheduler import build_window_edges, color_lower_bound
from .sim import SimReport

__all__ = [
    "BoundValidityWarning",
    "expected_colors_bound",
    "expected_execution_bound",
    "expected_utilization",
    "bound_montecarlo",
    "required_bandwidth",
    "EnergyModel",
    "load_energy_model",
    "energy_estimate",
    "analytic_report",
    "aggregate",
    "ENERGY_CONFIG_ENV",
]

ENERGY_CONFIG_ENV = "XBARSPMV_ENERGY_CONFIG"


class BoundValidityWarning(UserWarning):
    """Bound evaluated outside its validity regime (mean row count < 10)."""


def _check_regime(n, p, l):
    if not (0.0 < p < 1.0):
        raise ValueError("p must be in (0, 1)")
    if n < 1 or l < 1:
        raise ValueError("n and l must be >= 1")
    if n * p < 10.0:
        warnings.warn(
            f"mean row count N*p = {n * p:.3g} < 10; the Gaussian approximation "
            "behind the bounds is unreliable here",
            BoundValidityWarning,
            stacklevel=3,
        )


def expected_colors_bound(n: int, p: float, l: int) -> float:
    """Upper bound on the expected per-window timestep count:
    N p + sqrt(2 N p (1 - p) ln(2 l))."""
    _check_regime(n, p, l)
    return n * p + math.sqrt(2.0 * n * p * (1.0 - p) * math.log(2 * l))


def expected_execution_bound(n: int, p: float, l: int) -> float:
    """Upper bound on expected total cycles: (N / l) windows of the color
    bound, plus the 2 pipeline drain cycles."""
    return (n / l) * expected_colors_bound(n, p, l) + 2.0


def expected_utilization(n: int, p: float, l: int) -> float:
    """Closed-form utilization estimate
    1 / (1 + sqrt(2 (1 - p) ln(2 l)) / (N p)); drops the +2 drain term and
    assumes optimal per-window colors, so simulated runs sit below it."""
    _check_regime(n, p, l)
    return 1.0 / (1.0 + math.sqrt(2.0 * (1.0 - p) * math.log(2 * l)) / (n * p))


def bound_montecarlo(n: int, p: float, l: int, seeds) -> dict:
    """Empirical per-window color means and total-cycle means over seeded
    uniform matrices, for checking against the closed-form bounds.

    Uses the optimal (max-degree) color count per window, which is what the
    bounds actually bound.
    """
    per_window_means = []
    totals = []
    for seed in seeds:
        mat = generate(SynthSpec("uniform", n, density=p, seed=int(seed)))
        windows = build_window_edges(mat, l)
        lbs = [color_lower_bound(w) for w in windows]
        per_window_means.append(float(np.mean(lbs)))
        totals.append(float(sum(lbs) + 2))
    colors_bound = expected_colors_bound(n, p, l)
    exe_bound = expected_execution_bound(n, p, l)
    return {
        "colors_bound": colors_bound,
        "execution_bound": exe_bound,
        "mean_window_colors": float(np.mean(per_window_means)),
        "mean_total_cycles": float(np.mean(totals)),
        "window_colors_within_bound": bool(np.mean(per_window_means) <= colors_bound),
        "total_cycles_within_bound": bool(np.mean(totals) <= exe_bound),
        "samples": len(per_window_means),
    }


def _row_index_bits(l: int) -> int:
    return max(1, math.ceil(math.log2(l)))


def required_bandwidth(l: int, f: float) -> dict:
    """Streaming bandwidth at frequency f: per lane one 64-bit value+operand
    pair, a row index of ceil(log2 l) bits, and the dump bit each cycle;
    total is l lanes' worth."""
    per_lane = (64 + _row_index_bits(l) + 1) * f
    return {
        "per_lane_bits_per_s": per_lane,
        "total_bits_per_s": l * per_lane,
        "total_gbytes_per_s": l * per_lane / 8.0 / 1e9,
    }


@dataclass(frozen=True)
class EnergyModel:
    """Per-operation energy constants (pJ per 32-bit word unless noted),
    wire distances, dynamic-power figures, and the clock frequency.

    Every constant can be overridden through a JSON config file; see
    :func:`load_energy_model`.
    """

    offchip_read_pj: float = 64.0
    onchip_read_pj: float = 11.84
    offchip_write_pj: float = 64.0
    onchip_write_pj: float = 16.0
    flop_pj: float = 10.0
    offchip_move_pj_per_mm: float = 160.0
    onchip_move_pj_per_mm: float = 0.95
    offchip_distance_mm: float = 5.0
    oned_hop_mm: float = 1.0
    xbar_distance_mm: float = 129.0  # average crossbar route
    frequency_hz: float = 96e6
    dynamic_power_w: dict = field(
        default_factory=lambda: {"oned-256": 35.3, "xbar-256": 56.9, "xbar-87": 16.8}
    )

    def power_for(self, design: str, l: int) -> float:
        key = f"{design}-{l}"
        if key not in self.dynamic_power_w:
            raise KeyError(
                f"no dynamic-power constant for {key!r}; add one via the energy config"
            )
        return self.dynamic_power_w[key]


def load_energy_model(path=None) -> EnergyModel:
    """Build an EnergyModel from defaults plus JSON overrides.

    ``path`` falls back to the XBARSPMV_ENERGY_CONFIG environment variable;
    with neither set, the defaults are returned.  ``dynamic_power_w``
    entries merge with (rather than replace) the defaults.
    """
    if path is None:
        path = os.environ.get(ENERGY_CONFIG_ENV)
    model = EnergyModel()
    if not path:
        return model
    with open(path, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    power = dict(model.dynamic_power_w)
    power.update(overrides.pop("dynamic_power_w", {}))
    unknown = set(overrides) - {f.name for f in model.__dataclass_fields__.values()}
    if unknown:
        raise ValueError(f"unknown energy config keys: {sorted(unknown)}")
    return replace(model, dynamic_power_w=power, **overrides)


def _normalize_design(design: str) -> str:
    if design.startswith("xbar"):
        return "xbar"
    if design == "oned":
        return "oned"
    raise ValueError(f"unknown design id {design!r} for energy accounting")


def energy_estimate(report: SimReport, model: EnergyModel, design: str) -> dict:
    """Itemized energy for one run, in joules.

    Counts, per streamed 32-bit word: one off-chip read, the off-to-on-chip
    movement, one on-chip buffer write and one buffer read.  The crossbar
    engine streams value + vector operand + column word + packed row bits
    per nonzero and moves each product across the average crossbar route;
    the 1-D strip streams every matrix cell plus the vector and forwards
    operands one hop per cell.  Dynamic power runs for the cycle time plus
    (crossbar only) the vector preload.
    """
    kind = _normalize_design(design)
    f = model.frequency_hz
    if kind == "xbar":
        words = report.nnz * (3.0 + _row_index_bits(report.l) / 32.0)
        move_pj = report.nnz * model.xbar_distance_mm * model.onchip_move_pj_per_mm
        flop_pj = 2.0 * report.nnz * model.flop_pj
        preload_s = report.n * 32.0 / required_bandwidth(report.l, f)["total_bits_per_s"]
    else:
        cells = report.m * report.n
        words = float(cells + report.n)
        move_pj = cells * model.oned_hop_mm * model.onchip_move_pj_per_mm
        flop_pj = 2.0 * cells * model.flop_pj
        preload_s = 0.0
    power = model.power_for(kind, report.l)
    pj = 1e-12
    breakdown = {
        "design": design,
        "dynamic_compute_j": power * report.total_cycles / f,
        "dynamic_preload_j": power * preload_s,
        "offchip_read_j": words * model.offchip_read_pj * pj,
        "offchip_move_j": words * model.offchip_distance_mm * model.offchip_move_pj_per_mm * pj,
        "onchip_write_j": words * model.onchip_write_pj * pj,
        "onchip_read_j": words * model.onchip_read_pj * pj,
        "onchip_move_j": move_pj * pj,
        "flop_j": flop_pj * pj,
    }
    breakdown["total_j"] = (
        breakdown["dynamic_compute_j"]
        + breakdown["dynamic_preload_j"]
        + breakdown["offchip_read_j"]
        + breakdown["offchip_move_j"]
        + breakdown["onchip_write_j"]
        + breakdown["onchip_read_j"]
        + breakdown["onchip_move_j"]
        + breakdown["flop_j"]
    )
    return breakdown


def analytic_report(mat: SparseMatrix, l: int, cycles: int, mode: str) -> SimReport:
    """A SimReport shell for closed-form designs (no histogram, no output)."""
    return SimReport(
        total_cycles=int(cycles),
        per_window_cycles=[],
        active_lane_histogram=np.zeros(0, dtype=np.int64),
        utilization=mat.nnz / (l * cycles) if cycles else 0.0,
        stall_cycles=0,
        flops=2 * mat.nnz,
        checksum="",
        l=l,
        m=mat.m,
        n=mat.n,
        nnz=mat.nnz,
        mode=mode,
    )


def _geomean(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if (values <= 0).any():
        return 0.0
    return float(np.exp(np.log(values).mean()))


def aggregate(rows) -> dict:
    """Geometric means of utilization and speedup over per-matrix rows."""
    rows = list(rows)
    if not rows:
        raise ValueError("aggregate needs at least one row")
    return {
        "count": len(rows),
        "geomean_utilization": _geomean([r["utilization"] for r in rows]),
        "geomean_speedup": _geomean([r["speedup_vs_oned"] for r in rows]),
        "rows": rows,
    }
