"""Command-line front end: generate matrices, schedule them, simulate the
crossbar engine, compare designs, and evaluate the statistical bounds.

Exit codes: 0 success, 1 verification/collision failure, 2 usage error,
3 I/O or input-format error.  All JSON artifacts are deterministic for a
fixed invocation (timing is printed to stdout, never stored).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import analysis, baselines, formats, matio, scheduler, sim

_USAGE_ERROR = 2
_IO_ERROR = 3
_VERIFY_ERROR = 1


def _read_matrix(path) -> matio.SparseMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return matio.parse_matrix_market(fh)


def _cmd_gen(args) -> int:
    if args.dist == "k-regular":
        if args.k is None:
            raise SystemExit("gen: k-regular requires --k")
        spec = matio.SynthSpec(args.dist, args.n, degree=args.k, seed=args.seed)
    else:
        if args.density is None:
            raise SystemExit(f"gen: {args.dist} requires --density")
        spec = matio.SynthSpec(
            args.dist, args.n, density=args.density, seed=args.seed,
            zipf_exponent=args.zipf_exponent,
        )
    mat = matio.generate(spec)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(matio.write_matrix_market(mat))
    print(f"wrote {args.output}: {mat.m} x {mat.n}, nnz={mat.nnz}, density={mat.density:.6g}")
    return 0


def _cmd_schedule(args) -> int:
    mat = _read_matrix(args.matrix)
    t0 = time.perf_counter()
    sched = scheduler.schedule(mat, args.length, mode=args.mode, coloring=args.coloring)
    elapsed = time.perf_counter() - t0
    if args.mode != "naive":
        report = scheduler.verify_schedule(sched, mat)
        if not report.ok:
            print(str(report), file=sys.stderr)
            return _VERIFY_ERROR
        colors = [w.n_colors for w in sched.windows]
        lane_maps = sched.lane_maps
        row_perm = sched.row_perm
        windows = scheduler.build_window_edges(mat, args.length, row_perm, lane_maps)
        lb = [scheduler.color_lower_bound(w) for w in windows]
        print(f"windows: {len(colors)}")
        print(f"total timesteps: {sum(colors)}")
        print(f"max window timesteps: {max(colors) if colors else 0}")
        print(f"mean window timesteps: {float(np.mean(colors)) if colors else 0.0:.3f}")
        print(f"degree lower bound total: {sum(lb)}")
    else:
        trace = scheduler.naive_issue_trace(sched)
        print(f"windows: {sched.n_windows}")
        print(f"issue cycles: {trace.total_cycles - 2} (+2 drain)")
        print(f"stall cycles: {trace.stall_cycles}")
    print(f"preprocess seconds: {elapsed:.6f}")
    formats.save_schedule(sched, args.output, fmt=args.format)
    print(f"wrote {args.output}")
    return 0


def _cmd_simulate(args) -> int:
    sched = formats.load_schedule(args.schedule)
    v = (
        matio.read_vector(open(args.vector, "r", encoding="utf-8").read())
        if args.vector
        else np.ones(sched.n)
    )
    if isinstance(sched, scheduler.NaiveSchedule):
        y, report = sim.simulate_naive(sched, v)
    else:
        y, report = sim.simulate(sched, v)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(matio.write_vector(y))
    if args.report:
        formats.save_report(report, args.report)
    print(f"total cycles: {report.total_cycles}")
    print(f"utilization: {report.utilization:.6f}")
    if args.verify:
        if not args.matrix:
            raise SystemExit("simulate: --verify requires --matrix")
        mat = _read_matrix(args.matrix)
        expect = matio.reference_spmv(mat, v)
        scale = np.maximum(np.abs(expect), 1.0)
        err = float(np.max(np.abs(y - expect) / scale)) if expect.size else 0.0
        print(f"max relative error vs reference: {err:.3e}")
        if err > args.tolerance:
            print("verification FAILED", file=sys.stderr)
            return _VERIFY_ERROR
        print("verification passed")
    return 0


def _rows_to_csv(rows, fieldnames, stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k) for k in fieldnames})


def _emit(payload, rows, fieldnames, args) -> None:
    if args.format == "csv":
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                _rows_to_csv(rows, fieldnames, fh)
        else:
            _rows_to_csv(rows, fieldnames, sys.stdout)
    else:
        text = json.dumps(payload, sort_keys=True, indent=2)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)


def _cmd_compare(args) -> int:
    designs = [d.strip() for d in args.designs.split(",") if d.strip()]
    for d in designs:
        if d not in baselines.ALL_DESIGNS:
            raise SystemExit(
                f"compare: unknown design {d!r} (known: {', '.join(baselines.ALL_DESIGNS)})"
            )
    model = analysis.load_energy_model(args.energy_config)
    if args.sweep:
        if args.n is None:
            raise SystemExit("compare: --sweep requires --n")
        densities = np.logspace(
            np.log10(args.min_density), np.log10(args.max_density), args.points
        )
        series = []
        for i, p in enumerate(densities):
            mat = matio.generate(
                matio.SynthSpec("uniform", args.n, density=float(p), seed=args.seed + i)
            )
            rows = baselines.compare(mat, designs, args.length, model, args.coloring)
            series.append({"density": float(p), "nnz": mat.nnz, "rows": rows})
        slopes = {}
        for d in designs:
            if not d.startswith("xbar"):
                continue
            xs, ys = [], []
            for point in series:
                row = next(r for r in point["rows"] if r["design"] == d)
                if row["speedup_vs_oned"] > 0:
                    xs.append(np.log(point["density"]))
                    ys.append(np.log(row["speedup_vs_oned"]))
            if len(xs) >= 2:
                slopes[d] = float(np.polyfit(xs, ys, 1)[0])
        payload = {"sweep": series, "speedup_slopes": slopes, "n": args.n, "l": args.length}
        flat = [
            dict(density=point["density"], nnz=point["nnz"], **row)
            for point in series
            for row in point["rows"]
        ]
        _emit(payload, flat,
              ["density", "nnz", "design", "cycles", "utilization", "speedup_vs_oned", "energy_j"],
              args)
        for d, slope in slopes.items():
            print(f"log-log speedup slope [{d} vs oned]: {slope:.4f}")
    else:
        if not args.matrix:
            raise SystemExit("compare: need --matrix or --sweep")
        mat = _read_matrix(args.matrix)
        rows = baselines.compare(mat, designs, args.length, model, args.coloring)
        payload = {"matrix": args.matrix, "l": args.length, "rows": rows}
        _emit(payload, rows,
              ["design", "cycles", "utilization", "speedup_vs_oned", "energy_j"], args)
    return 0


def _cmd_bound(args) -> int:
    import warnings

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", analysis.BoundValidityWarning)
        colors = analysis.expected_colors_bound(args.n, args.p, args.length)
        exe = analysis.expected_execution_bound(args.n, args.p, args.length)
        util = analysis.expected_utilization(args.n, args.p, args.length)
    for w in caught:
        if issubclass(w.category, analysis.BoundValidityWarning):
            print(f"warning: {w.message}", file=sys.stderr)
            break
    print(f"expected colors bound:    {colors:.4f}")
    print(f"expected execution bound: {exe:.4f}")
    print(f"expected utilization:     {util:.4f}")
    if args.montecarlo:
        mc = analysis.bound_montecarlo(
            args.n, args.p, args.length,
            seeds=range(args.seed, args.seed + args.montecarlo),
        )
        ok_c = "PASS" if mc["window_colors_within_bound"] else "FAIL"
        ok_e = "PASS" if mc["total_cycles_within_bound"] else "FAIL"
        print(f"empirical mean window colors: {mc['mean_window_colors']:.4f}  [{ok_c}]")
        print(f"empirical mean total cycles:  {mc['mean_total_cycles']:.4f}  [{ok_e}]")
        if not (mc["window_colors_within_bound"] and mc["total_cycles_within_bound"]):
            return _VERIFY_ERROR
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xbarspmv",
        description="Edge-coloring SpMV scheduler and crossbar-engine simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic matrix (Matrix Market)")
    p.add_argument("--dist", choices=matio._DISTS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=float)
    p.add_argument("--k", type=int, help="per-row nonzeros (k-regular)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zipf-exponent", type=float, default=2.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("schedule", help="build the collision-free storage format")
    p.add_argument("matrix")
    p.add_argument("-l", "--length", type=int, required=True)
    p.add_argument("--mode", choices=scheduler.MODES, default="ec")
    p.add_argument("--coloring", choices=scheduler.COLORINGS, default="greedy")
    p.add_argument("--format", choices=["json", "binary"], default="json")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("simulate", help="run a schedule through the datapath")
    p.add_argument("schedule")
    p.add_argument("--vector", help="input vector file (one value per line); default all ones")
    p.add_argument("-o", "--output", help="output vector file")
    p.add_argument("--report", help="write the run report (JSON)")
    p.add_argument("--verify", action="store_true", help="check against the reference SpMV")
    p.add_argument("--matrix", help="source matrix for --verify")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="cycles/utilization/speedup/energy across designs")
    p.add_argument("--matrix")
    p.add_argument("--sweep", choices=["density"], help="sweep synthetic density instead")
    p.add_argument("--n", type=int, help="dimension for --sweep")
    p.add_argument("--min-density", type=float, default=1e-3)
    p.add_argument("--max-density", type=float, default=3e-2)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-l", "--length", type=int, required=True)
    p.add_argument("--designs", default="xbar-ec-lb,oned")
    p.add_argument("--coloring", choices=scheduler.COLORINGS, default="greedy")
    p.add_argument("--energy-config", help="JSON overrides for the energy model")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("bound", help="closed-form bounds, optionally Monte-Carlo checked")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("-l", "--length", type=int, required=True)
    p.add_argument("--montecarlo", type=int, default=0, metavar="SEEDS")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:  # argument-level errors raised by commands
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return _USAGE_ERROR
        raise
    except matio.MatrixMarketError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _IO_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return _IO_ERROR
    except sim.CollisionError as exc:
        print(f"collision: {exc}", file=sys.stderr)
        return _VERIFY_ERROR


if __name__ == "__main__":
    sys.exit(main())
