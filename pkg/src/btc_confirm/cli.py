"""Command-line front end: ``btc-confirm {estimate,undershoot,simulate}``.

Exit codes: 0 success, 1 usage or domain error, 2 input-file error,
3 numeric failure.  Tables go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import diffusion, erlang_bound, mempool, simulator, undershoot
from .model import DomainError, ModelParams, UnitScale, validate

METHODS = ("lower-bound", "diffusion", "corrected-diffusion", "monte-carlo")
NA = "n/a"

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument helpers


def parse_blocks(text: str) -> list[int]:
    """``"1..8"`` or ``"1,2,5"``."""
    try:
        if ".." in text:
            lo, hi = (int(s) for s in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"cannot parse block range {text!r}") from None
    if not values or min(values) < 1:
        raise UsageError(f"block range {text!r} must be non-empty with n >= 1")
    return values


def parse_times(text: str) -> list[float]:
    """``"start:step:stop"`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            start, step, stop = (float(s) for s in text.split(":"))
            if not step > 0 or stop < start:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"cannot parse time grid {text!r}") from None
    if not values or min(values) < 0 or any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"time grid {text!r} must be non-empty, nonnegative and increasing")
    return values


def parse_probabilities(text: str) -> list[float]:
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"cannot parse quantiles {text!r}") from None
    if any(not 0.0 < v < 1.0 for v in values):
        raise UsageError("quantiles must lie in (0, 1)")
    return values


def parse_methods(text: str) -> list[str]:
    if text == "all":
        return list(METHODS)
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"unknown method(s) {unknown or text!r}; choose from {', '.join(METHODS)} or all")
    return [m for m in METHODS if m in methods]


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v <= simulator.SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


# ---------------------------------------------------------------------------
# formatting


def fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def _json_value(value):
    if value is None:
        return None
    v = float(value)
    if math.isinf(v):
        return "inf"
    return v


def write_csv(out, header: list[str], rows: list[list]) -> None:
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def write_json(out, doc: dict) -> None:
    json.dump(doc, out, indent=2, sort_keys=False)
    out.write("\n")


# ---------------------------------------------------------------------------
# commands


def _scale(args) -> UnitScale:
    return UnitScale(block_size_bytes=args.block_size_bytes, block_interval_seconds=args.block_interval_s)


def _time_factor(unit: str, scale: UnitScale) -> float:
    """Mean block intervals per user time unit."""
    if unit == "blocks":
        return 1.0
    if unit == "minutes":
        return 60.0 / scale.block_interval_seconds
    return 1.0 / scale.block_interval_seconds


def _resolve_params(args, scale: UnitScale) -> ModelParams:
    direct = args.c is not None or args.x0 is not None
    snap = args.snapshot is not None or args.arrivals is not None
    if direct and snap:
        raise UsageError("give either --c/--x0 or --snapshot/--arrivals, not both")
    if direct:
        if args.c is None or args.x0 is None:
            raise UsageError("--c and --x0 must be given together")
        return validate(ModelParams(c=args.c, x0=args.x0))
    if not snap:
        raise UsageError("a model source is required: --c/--x0 or --snapshot/--arrivals")
    if None in (args.snapshot, args.arrivals, args.fee_density, args.own_size):
        raise UsageError("--snapshot, --arrivals, --fee-density and --own-size are all required")
    snapshot = mempool.load_snapshot(args.snapshot)
    arrivals = mempool.load_arrivals(args.arrivals)
    x0 = mempool.initial_position(snapshot, args.fee_density, args.own_size, scale)
    c = mempool.arrival_rate(arrivals, args.fee_density, scale, window_s=args.window_s)
    return validate(ModelParams(c=c, x0=x0))


def _simulate(config, grid, workers):
    """Run the simulator, reporting censoring as one line on stderr."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", simulator.CensoringWarning)
        result = simulator.simulate_confirmation(config, t_grid=grid, workers=workers)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return result


def cmd_estimate(args, out) -> int:
    scale = _scale(args)
    params = _resolve_params(args, scale)
    methods = parse_methods(args.methods)
    blocks = parse_blocks(args.blocks) if args.blocks else []
    times = parse_times(args.times) if args.times else []
    if not blocks and not times:
        blocks = list(range(1, 11))
    quantiles = parse_probabilities(args.quantiles) if args.quantiles else []
    factor = _time_factor(args.unit, scale)
    t_model = np.array(times) * factor

    # column name -> (block values, time values, block quantiles, time quantiles)
    columns: dict[str, tuple[list, list, list, list]] = {}

    if "lower-bound" in methods:
        bq = [erlang_bound.bound_quantile(params, q) for q in quantiles]
        columns["lower-bound"] = (
            [erlang_bound.lower_bound(params, n) for n in blocks],
            [None] * len(times),
            bq,
            [None] * len(quantiles),
        )

    for name, corrected in (("diffusion", False), ("corrected-diffusion", True)):
        if name not in methods:
            continue
        if not params.is_stable:
            columns[name] = ([None] * len(blocks), [None] * len(times), [None] * len(quantiles), [None] * len(quantiles))
            continue
        # the corrected start level is solved on demand by expected_undershoot
        block_values = diffusion.confirm_cdf(params, np.array(blocks, dtype=float), corrected)
        time_values = diffusion.confirm_cdf(params, t_model, corrected)
        columns[name] = (
            list(block_values),
            list(time_values),
            [None] * len(quantiles),
            [diffusion.confirm_quantile(q, params, corrected=corrected) / factor for q in quantiles],
        )

    if "monte-carlo" in methods:
        max_blocks = args.max_blocks or simulator.default_max_blocks(params)
        if blocks:
            max_blocks = max(max_blocks, max(blocks))
        config = simulator.SimulationConfig(params, runs=args.runs, seed=args.seed, max_blocks=max_blocks)
        result = _simulate(config, t_model if times else None, args.workers)
        bq = []
        for q in quantiles:
            hit = np.nonzero(result.block_cdf.p_hat >= q)[0]
            bq.append(int(hit[0]) + 1 if hit.size else None)
        columns["monte-carlo"] = (
            [result.prob_within(n)[0] for n in blocks],
            list(result.time_cdf.p_hat) if times else [],
            bq,
            [simulator.empirical_quantile(result, q) / factor for q in quantiles],
        )

    names = [m for m in METHODS if m in columns]
    rows = []
    for i, n in enumerate(blocks):
        rows.append(["block", n] + [columns[m][0][i] for m in names])
    for i, t in enumerate(times):
        rows.append(["time", t] + [columns[m][1][i] for m in names])
    for i, q in enumerate(quantiles):
        rows.append(["quantile_blocks", q] + [columns[m][2][i] for m in names])
        rows.append(["quantile_time", q] + [columns[m][3][i] for m in names])

    if args.format == "json":
        write_json(
            out,
            {
                "command": "estimate",
                "params": {"c": params.c, "x0": params.x0},
                "time_unit": args.unit,
                "seed": args.seed,
                "methods": names,
                "rows": [
                    {"kind": r[0], "point": _json_value(r[1]), "values": {m: _json_value(v) for m, v in zip(names, r[2:])}}
                    for r in rows
                ],
            },
        )
    else:
        out.write("kind,point," + ",".join(names) + "\n")
        for r in rows:
            out.write(",".join([r[0]] + [fmt(v) for v in r[1:]]) + "\n")
    return 0


def cmd_undershoot(args, out) -> int:
    c = args.c
    if not (math.isfinite(c) and 0.0 <= c <= 1.0):
        raise DomainError("c", f"must lie in [0, 1], got {c!r}")
    if args.curve:
        if args.xmax is None or args.xmax < 0 or not args.step > 0:
            raise UsageError("--curve needs --xmax >= 0 and --step > 0")
        count = int(math.floor(args.xmax / args.step + 1e-9)) + 1
        xs = [i * args.step for i in range(count)]
    elif args.x is not None:
        xs = [args.x]
    else:
        xs = []
    if not xs and args.bounds is None:
        raise UsageError("give --x, --curve or --bounds")
    if any(x < 0 for x in xs):
        raise DomainError("x", "must be >= 0")

    points = []
    if xs:
        if c == 0.0:
            points = [(x, undershoot.expected_undershoot(0.0, x)) for x in xs]
        else:
            sol = undershoot.solve(c, n_max=args.nmax, tol=args.tol, x_max=max(xs))
            points = [(x, sol(x)) for x in xs]
    bounds = None
    if args.bounds is not None:
        if c == 0.0:
            raise DomainError("c", "interval bounds need c in (0, 1]")
        lo, hi = undershoot.interval_bounds(c, args.bounds)
        bounds = (args.bounds, lo, hi)

    if args.format == "json":
        write_json(
            out,
            {
                "command": "undershoot",
                "c": c,
                "points": [{"x": x, "value": v} for x, v in points],
                "bounds": None if bounds is None else {"depth": bounds[0], "lo": bounds[1], "hi": bounds[2]},
            },
        )
        return 0
    if points:
        write_csv(out, ["x", "value"], [[x, v] for x, v in points])
    if bounds is not None:
        if points:
            out.write("\n")
        write_csv(out, ["depth", "lo", "hi"], [list(bounds)])
    return 0


def cmd_simulate(args, out) -> int:
    params = validate(ModelParams(c=args.c, x0=args.x0))
    config = simulator.SimulationConfig(
        params, runs=args.runs, seed=args.seed, max_blocks=args.max_blocks, chunk_size=args.chunk_size
    )
    scale = _scale(args)
    factor = _time_factor(args.unit, scale)
    times = parse_times(args.times) if args.times else None
    grid = None if times is None else np.array(times) * factor
    result = _simulate(config, grid, args.workers)

    block_rows = [[n, p, s] for n, p, s in result.block_cdf.rows()]
    time_rows = [] if times is None else [[t, p, s] for t, (_, p, s) in zip(times, result.time_cdf.rows())]
    if args.format == "json":
        write_json(
            out,
            {
                "command": "simulate",
                "params": {"c": params.c, "x0": params.x0},
                "runs": result.runs,
                "seed": result.seed,
                "max_blocks": result.max_blocks,
                "chunk_size": result.chunk_size,
                "censored_fraction": result.censored_fraction,
                "blocks": [{"n": n, "p_hat": p, "se": s} for n, p, s in block_rows],
                "times": [{"t": t, "p_hat": p, "se": s} for t, p, s in time_rows],
            },
        )
        return 0
    write_csv(out, ["n", "p_hat", "se"], block_rows)
    if time_rows:
        out.write("\n")
        write_csv(out, ["t", "p_hat", "se"], time_rows)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="output format (default csv)")
    p.add_argument("--seed", type=_seed, default=d(0), help="RNG seed, unsigned 64-bit (default 0)")
    p.add_argument("--block-size-bytes", type=int, default=d(1_000_000), help="bytes per block (default 1000000)")
    p.add_argument("--block-interval-s", type=float, default=d(600.0), help="mean seconds per block (default 600)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="btc-confirm", description="Bitcoin confirmation-time estimates under a Cramer-Lundberg queue model.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    est = sub.add_parser("estimate", help="confirmation-time CDF by several methods")
    _add_globals(est, suppress=True)
    est.add_argument("--c", type=float, help="traffic rate (block units per block interval)")
    est.add_argument("--x0", type=float, help="initial queue position in blocks")
    est.add_argument("--snapshot", help="mempool snapshot JSON")
    est.add_argument("--arrivals", help="arrival log JSON")
    est.add_argument("--fee-density", type=float, help="fee density of the transaction, sat/B")
    est.add_argument("--own-size", type=int, help="size of the transaction in bytes")
    est.add_argument("--window-s", type=float, default=3600.0, help="averaging window for c (default 3600 s)")
    est.add_argument("--methods", default="all", help=f"comma list of {', '.join(METHODS)}, or all")
    est.add_argument("--blocks", help="block horizon, e.g. 1..8")
    est.add_argument("--times", help="time grid, e.g. 0:0.5:50")
    est.add_argument("--unit", choices=("blocks", "minutes", "seconds"), default="blocks", help="unit of --times")
    est.add_argument("--quantiles", help="comma list of probabilities in (0, 1)")
    est.add_argument("--runs", type=int, default=100_000, help="Monte Carlo runs (default 100000)")
    est.add_argument("--max-blocks", type=int, help="Monte Carlo censoring horizon")
    est.add_argument("--workers", type=int, default=1, help="Monte Carlo worker threads")
    est.set_defaults(func=cmd_estimate)

    und = sub.add_parser("undershoot", help="expected undershoot E S_x")
    _add_globals(und, suppress=True)
    und.add_argument("--c", type=float, required=True, help="traffic rate in [0, 1]")
    und.add_argument("--x", type=float, help="start level")
    und.add_argument("--curve", action="store_true", help="emit a curve on 0, step, ..., xmax")
    und.add_argument("--xmax", type=float, help="curve end")
    und.add_argument("--step", type=float, default=0.05, help="curve step (default 0.05)")
    und.add_argument("--nmax", type=int, help="truncation depth (default: adaptive)")
    und.add_argument("--tol", type=float, default=undershoot.DEFAULT_TOL, help="knot residual tolerance")
    und.add_argument("--bounds", type=int, metavar="DEPTH", help="print a guaranteed interval for E S_0")
    und.set_defaults(func=cmd_undershoot)

    sim = sub.add_parser("simulate", help="Monte Carlo confirmation-time table")
    _add_globals(sim, suppress=True)
    sim.add_argument("--c", type=float, required=True)
    sim.add_argument("--x0", type=float, required=True)
    sim.add_argument("--runs", type=int, default=300_000, help="runs (default 300000)")
    sim.add_argument("--max-blocks", type=int, help="censoring horizon")
    sim.add_argument("--chunk-size", type=int, default=simulator.DEFAULT_CHUNK, help="runs per random stream")
    sim.add_argument("--workers", type=int, default=1, help="worker threads (output does not depend on it)")
    sim.add_argument("--times", help="also tabulate the time CDF on this grid, e.g. 0:1:40")
    sim.add_argument("--unit", choices=("blocks", "minutes", "seconds"), default="blocks", help="unit of --times")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, DomainError) as exc:
        print(f"btc-confirm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, mempool.MempoolParseError) as exc:
        print(f"btc-confirm: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"btc-confirm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
