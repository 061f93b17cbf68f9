"""On-disk forms of schedules and run reports.

A scheduled matrix serializes to JSON (exact schema below) and to a packed
little-endian binary form.  JSON schema::

    {
      "kind": "schedule",            # or "naive-schedule"
      "l": int, "m": int, "n": int,
      "mode": "ec" | "ec-lb",        # "naive" for naive-schedule
      "coloring": "greedy" | "exact",
      "row_perm": [m ints],          # source row at each scheduled position
      "lane_maps": null              # null = lane(j) == j mod l
                 | [[n ints] per window],
      "windows": [
        {"n_colors": C,
         "m_sch":  [C*l floats, row-major (timestep-major)],
         "row_sch": [C*l ints, sentinel l when invalid],
         "col_sch": [C*l ints, sentinel n when invalid],
         "valid":  [C*l 0/1]}, ...]
    }

Binary layout (all little-endian): magic ``XBSCHED1``; u64 header fields
l, m, n, mode code (0 ec / 1 ec-lb), coloring code (0 greedy / 1 exact),
window count, lane-map flag (0 mod-l / 1 explicit); row_perm as m u64;
optional lane maps as (windows x n) u32; then per window a u64 timestep
count C followed by C*l float64 values, the local-row indices packed as
ceil(log2(l + 1))-bit fields per timestep (LSB first), C*l u32 column
indices, and the validity mask packed one bit per lane per timestep.
"""

from __future__ import annotations

import io
import json
import math
import struct

import numpy as np

from .scheduler import (
    NaiveSchedule,
    NaiveWindow,
    ScheduledMatrix,
    ScheduledWindow,
)
from .sim import SimReport

__all__ = [
    "schedule_to_json",
    "schedule_from_json",
    "schedule_to_binary",
    "schedule_from_binary",
    "save_schedule",
    "load_schedule",
    "save_report",
    "load_report",
    "pack_bits",
    "unpack_bits",
]

_MAGIC = b"XBSCHED1"
_MODES = {"ec": 0, "ec-lb": 1}
_MODES_INV = {v: k for k, v in _MODES.items()}
_COLORINGS = {"greedy": 0, "exact": 1}
_COLORINGS_INV = {v: k for k, v in _COLORINGS.items()}


def _row_bits(l: int) -> int:
    """Width of a packed local-row field; must hold 0..l (l = sentinel)."""
    return max(1, math.ceil(math.log2(l + 1)))


def pack_bits(values, width: int) -> bytes:
    """Pack integers into consecutive ``width``-bit fields, LSB first."""
    acc = 0
    for k, v in enumerate(values):
        acc |= int(v) << (k * width)
    nbytes = (len(values) * width + 7) // 8
    return acc.to_bytes(nbytes, "little")


def unpack_bits(data: bytes, width: int, count: int) -> list:
    acc = int.from_bytes(data, "little")
    mask = (1 << width) - 1
    return [(acc >> (k * width)) & mask for k in range(count)]


def schedule_to_json(s) -> dict:
    if isinstance(s, NaiveSchedule):
        return {
            "kind": "naive-schedule",
            "l": s.l,
            "m": s.m,
            "n": s.n,
            "mode": "naive",
            "windows": [
                {
                    "lane_start": w.lane_start.tolist(),
                    "local_rows": w.local_rows.tolist(),
                    "cols": w.cols.tolist(),
                    "values": w.values.tolist(),
                }
                for w in s.windows
            ],
        }
    return {
        "kind": "schedule",
        "l": s.l,
        "m": s.m,
        "n": s.n,
        "mode": s.mode,
        "coloring": s.coloring,
        "row_perm": s.row_perm.tolist(),
        "lane_maps": None if s.lane_maps is None else [lm.tolist() for lm in s.lane_maps],
        "windows": [
            {
                "n_colors": w.n_colors,
                "m_sch": w.m_sch.reshape(-1).tolist(),
                "row_sch": w.row_sch.reshape(-1).tolist(),
                "col_sch": w.col_sch.reshape(-1).tolist(),
                "valid": w.valid.reshape(-1).astype(int).tolist(),
            }
            for w in s.windows
        ],
    }


def schedule_from_json(d: dict):
    kind = d.get("kind")
    l = int(d["l"])
    if kind == "naive-schedule":
        windows = [
            NaiveWindow(
                lane_start=np.asarray(w["lane_start"], dtype=np.int64),
                local_rows=np.asarray(w["local_rows"], dtype=np.int64),
                cols=np.asarray(w["cols"], dtype=np.int64),
                values=np.asarray(w["values"], dtype=np.float64),
            )
            for w in d["windows"]
        ]
        return NaiveSchedule(l=l, m=int(d["m"]), n=int(d["n"]), windows=windows)
    if kind != "schedule":
        raise ValueError(f"not a schedule document (kind={kind!r})")
    windows = []
    for w in d["windows"]:
        c = int(w["n_colors"])
        windows.append(
            ScheduledWindow(
                n_colors=c,
                m_sch=np.asarray(w["m_sch"], dtype=np.float64).reshape(c, l),
                row_sch=np.asarray(w["row_sch"], dtype=np.int64).reshape(c, l),
                col_sch=np.asarray(w["col_sch"], dtype=np.int64).reshape(c, l),
                valid=np.asarray(w["valid"], dtype=bool).reshape(c, l),
            )
        )
    lane_maps = d.get("lane_maps")
    if lane_maps is not None:
        lane_maps = [np.asarray(lm, dtype=np.int64) for lm in lane_maps]
    return ScheduledMatrix(
        l=l,
        m=int(d["m"]),
        n=int(d["n"]),
        mode=d["mode"],
        coloring=d.get("coloring", "greedy"),
        row_perm=np.asarray(d["row_perm"], dtype=np.int64),
        lane_maps=lane_maps,
        windows=windows,
    )


def schedule_to_binary(s: ScheduledMatrix) -> bytes:
    if not isinstance(s, ScheduledMatrix):
        raise TypeError("binary form is defined for scheduled matrices only")
    out = io.BytesIO()
    out.write(_MAGIC)
    out.write(
        struct.pack(
            "<7Q",
            s.l,
            s.m,
            s.n,
            _MODES[s.mode],
            _COLORINGS[s.coloring],
            len(s.windows),
            0 if s.lane_maps is None else 1,
        )
    )
    out.write(s.row_perm.astype("<u8").tobytes())
    if s.lane_maps is not None:
        for lm in s.lane_maps:
            out.write(lm.astype("<u4").tobytes())
    bits = _row_bits(s.l)
    for w in s.windows:
        out.write(struct.pack("<Q", w.n_colors))
        out.write(w.m_sch.astype("<f8").tobytes())
        for t in range(w.n_colors):
            out.write(pack_bits(w.row_sch[t], bits))
        out.write(w.col_sch.astype("<u4").tobytes())
        for t in range(w.n_colors):
            out.write(pack_bits(w.valid[t].astype(int), 1))
    return out.getvalue()


def schedule_from_binary(data: bytes) -> ScheduledMatrix:
    if data[: len(_MAGIC)] != _MAGIC:
        raise ValueError("not a packed schedule (bad magic)")
    off = len(_MAGIC)
    l, m, n, mode_c, col_c, n_windows, lane_flag = struct.unpack_from("<7Q", data, off)
    off += 7 * 8
    row_perm = np.frombuffer(data, "<u8", m, off).astype(np.int64)
    off += 8 * m
    lane_maps = None
    if lane_flag:
        lane_maps = []
        for _ in range(n_windows):
            lane_maps.append(np.frombuffer(data, "<u4", n, off).astype(np.int64))
            off += 4 * n
    bits = _row_bits(l)
    row_bytes = (l * bits + 7) // 8
    valid_bytes = (l + 7) // 8
    windows = []
    for _ in range(n_windows):
        (c,) = struct.unpack_from("<Q", data, off)
        off += 8
        m_sch = np.frombuffer(data, "<f8", c * l, off).reshape(c, l).copy()
        off += 8 * c * l
        row_sch = np.empty((c, l), dtype=np.int64)
        for t in range(c):
            row_sch[t] = unpack_bits(data[off:off + row_bytes], bits, l)
            off += row_bytes
        col_sch = np.frombuffer(data, "<u4", c * l, off).reshape(c, l).astype(np.int64)
        off += 4 * c * l
        valid = np.empty((c, l), dtype=bool)
        for t in range(c):
            valid[t] = np.asarray(unpack_bits(data[off:off + valid_bytes], 1, l), dtype=bool)
            off += valid_bytes
        windows.append(ScheduledWindow(int(c), m_sch, row_sch, col_sch, valid))
    return ScheduledMatrix(
        l=int(l),
        m=int(m),
        n=int(n),
        mode=_MODES_INV[mode_c],
        coloring=_COLORINGS_INV[col_c],
        row_perm=row_perm,
        lane_maps=lane_maps,
        windows=windows,
    )


def save_schedule(s, path, fmt: str = "json") -> None:
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(schedule_to_json(s), fh, sort_keys=True)
            fh.write("\n")
    elif fmt in ("binary", "bin"):
        with open(path, "wb") as fh:
            fh.write(schedule_to_binary(s))
    else:
        raise ValueError(f"unknown schedule format {fmt!r}")


def load_schedule(path):
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
        rest = fh.read()
    if head == _MAGIC:
        return schedule_from_binary(head + rest)
    return schedule_from_json(json.loads((head + rest).decode("utf-8")))


def save_report(report: SimReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_report(path) -> SimReport:
    with open(path, "r", encoding="utf-8") as fh:
        return SimReport.from_dict(json.load(fh))
