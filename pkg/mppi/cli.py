"""
Command-line front end: solve, generate, bench, oracle-check.

Exit codes: 0 success, 1 unreadable or malformed input, 2 solver failure
(iteration cap, convergence, invariant), 3 cycle detected in naive mode,
4 oracle disagreement.
"""
import argparse
import csv
import json
import os
import sys
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config import settings
from .exceptions import CapExceeded, ConvergenceError, CycleDetected, GameFormatError, MppiError
from .game_model import read_game, write_game
from .generators import (EXAMPLE5_SIGMA0, example_5node, example_5node_trace, gen_catmouse,
                         gen_richman, random_small_game, read_coords, write_coords)
from .logger import logger, set_level
from .models import BenchRow, CatMouseConfig, RichmanConfig, SolveOptions, SolveReport
from .oracles import brute_force_value, value_iteration_slope
from .two_player_solver import solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_CYCLE = 3
EXIT_MISMATCH = 4


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text!r}")


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--eps-g", type=float, help="global residual threshold")
    group.add_argument("--eps-eta", type=float, help="slope comparison tolerance")
    group.add_argument("--eps-v", type=float, help="bias comparison tolerance")
    group.add_argument("--max-outer", type=int, help="MIN iteration cap")
    group.add_argument("--max-inner", type=int, help="MAX iteration cap")
    group.add_argument("--solver", choices=["lu", "sor"], help="linear solver backend")
    group.add_argument("--sor-omega", type=float, help="SOR relaxation in (0, 2)")
    group.add_argument("--final-method", choices=["auto", "A", "B"],
                       help="final class solve: stationary distribution (A) or bordered system (B)")
    group.add_argument("--warm-start", choices=["on", "off"], help="reuse the MAX strategy across MIN iterations")
    group.add_argument("--naive", action="store_true", help="skip the projection at degenerate iterations")
    group.add_argument("--strict-trace", action="store_true",
                       help="no warm start and no single-SCC shortcut")
    group.add_argument("--check-invariants", action="store_true", help="raise on property violations")


def options_from_args(args: argparse.Namespace) -> SolveOptions:
    warm = getattr(args, "warm_start", None)
    return SolveOptions.from_settings(
        eps_g=args.eps_g,
        eps_eta=args.eps_eta,
        eps_v=args.eps_v,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        solver=args.solver,
        sor_omega=args.sor_omega,
        final_method=args.final_method,
        warm_start=None if warm is None else warm == "on",
        naive=args.naive or None,
        strict_trace=args.strict_trace or None,
        check_invariants=args.check_invariants or None,
    )


# solve

def load_trace(path: str):
    """Read ``{"sigma0": [...], "biases": [{"sigma": [...], "v": [...]}, ...]}``."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    biases = {tuple(entry["sigma"]): entry["v"] for entry in data.get("biases", [])}
    return data.get("sigma0"), biases


def dump_trace(path: str, sigma0: Sequence[int], biases) -> None:
    data = {
        "sigma0": list(sigma0),
        "biases": [{"sigma": list(sigma), "v": np.asarray(v).tolist()} for sigma, v in biases.items()],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def format_report(report: SolveReport, dt: Optional[float] = None) -> str:
    eta = report.eta / dt if dt else report.eta
    lines = [
        f"states:               {report.halfline.n}",
        f"converged:            {report.converged}",
        f"cycle:                {report.cycle}",
        f"outer iterations:     {report.iterations_outer}",
        f"inner iterations:     {report.iterations_inner_total}",
        f"degenerate:           {report.degenerate}",
        f"strongly degenerate:  {report.strongly_degenerate}",
        f"residual:             {report.residual:.3e}",
        f"wall seconds:         {report.wall_seconds:.4f}",
        f"eta range:            [{eta.min():.12g}, {eta.max():.12g}]" if eta.size else "eta range: -",
    ]
    if report.halfline.n <= 20:
        lines.append(f"eta:                  {np.array2string(eta, precision=12)}")
        lines.append(f"v:                    {np.array2string(report.v, precision=12)}")
        lines.append(f"sigma:                {report.sigma.actions.tolist()}")
    return "\n".join(lines)


def write_fields(report: SolveReport, path: str, coords: Optional[np.ndarray], dt: Optional[float]) -> None:
    """One ``state_index x y eta v sigma delta`` line per state."""
    eta = report.eta / dt if dt else report.eta
    with open(path, "w", encoding="utf-8") as f:
        for i in range(report.halfline.n):
            x, y = coords[i] if coords is not None else (float("nan"), float("nan"))
            f.write(f"{i} {x:.17g} {y:.17g} {eta[i]:.17g} {report.v[i]:.17g} "
                    f"{int(report.sigma.actions[i])} {int(report.delta.actions[i])}\n")


def _print_report(report: SolveReport, args: argparse.Namespace) -> None:
    if args.json:
        data = report.to_json_dict()
        if args.dt:
            data["eta_per_time"] = (report.eta / args.dt).tolist()
        print(json.dumps(data, indent=2))
    else:
        print(format_report(report, args.dt))


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        game = read_game(args.input)
        sigma0, biases = load_trace(args.trace_biases) if args.trace_biases else (None, None)
        coords = read_coords(args.coords) if args.coords else None
    except (OSError, GameFormatError, ValueError, KeyError) as e:
        logger.error(f"cannot read input: {e}", exc_info=True)
        return EXIT_INPUT
    if args.sigma0 is not None:
        sigma0 = args.sigma0

    opts = options_from_args(args)
    try:
        report = solve(game, sigma0, opts, trace_biases=biases)
    except CycleDetected as e:
        logger.warning(f"cycle detected: {e}")
        if e.report is not None:
            _print_report(e.report, args)
        return EXIT_CYCLE
    except (ConvergenceError, CapExceeded) as e:
        logger.error(f"solver failed: {e}", exc_info=True)
        if getattr(e, "report", None) is not None:
            _print_report(e.report, args)
        return EXIT_SOLVER
    except MppiError as e:
        logger.error(f"solver failed: {e}", exc_info=True)
        return EXIT_SOLVER

    _print_report(report, args)
    if args.fields_out:
        write_fields(report, args.fields_out, coords, args.dt)
    return EXIT_OK


# generate

def cmd_generate(args: argparse.Namespace) -> int:
    if args.kind == "richman":
        game = gen_richman(RichmanConfig(n=args.nodes, out_degree=args.degree, seed=args.seed))
        write_game(game, args.out)
    elif args.kind == "catmouse":
        game, dt, coords = gen_catmouse(CatMouseConfig(grid=args.grid, speed=args.speed))
        write_game(game, args.out)
        coords_path = args.coords or f"{args.out}.coords"
        write_coords(coords, coords_path)
        print(f"dt {dt:.17g}")
        logger.info(f"coordinates written to {coords_path}")
    else:
        game = example_5node()
        write_game(game, args.out)
        if args.trace_out:
            dump_trace(args.trace_out, EXAMPLE5_SIGMA0, example_5node_trace())
    logger.info(f"wrote {game!r} to {args.out}")
    return EXIT_OK


# bench

def bench_one(size: int, seed: int, degree: int, opts: dict) -> BenchRow:
    """Generate and solve one Richman instance; failures go into the row."""
    started = time.perf_counter()
    try:
        game = gen_richman(RichmanConfig(n=size, out_degree=degree, seed=seed))
        report = solve(game, opts=SolveOptions(**opts))
    except MppiError as e:
        logger.error(f"bench size={size} seed={seed} failed: {e}")
        return BenchRow(size=size, seed=seed, seconds=time.perf_counter() - started, error=str(e))
    return BenchRow(
        size=size,
        seed=seed,
        iter_outer=report.iterations_outer,
        iter_inner=report.iterations_inner_total,
        degenerate=report.degenerate,
        strongly_degenerate=report.strongly_degenerate,
        residual=report.residual,
        seconds=report.wall_seconds,
    )


def bench_threads(requested: Optional[int]) -> int:
    if "MPPI_THREADS" in os.environ:
        return settings.threads
    return requested or settings.threads


def summarize(rows: List[BenchRow]) -> str:
    lines = ["size  n  outer(min/avg/max)  inner(min/avg/max)  with_strong  "
             "sec_strong  sec_plain"]
    by_size = defaultdict(list)
    for row in rows:
        if row.error is None:
            by_size[row.size].append(row)
    for size in sorted(by_size):
        group = by_size[size]
        outer = np.array([r.iter_outer for r in group])
        inner = np.array([r.iter_inner for r in group])
        strong = [r.seconds for r in group if r.strongly_degenerate > 0]
        plain = [r.seconds for r in group if r.strongly_degenerate == 0]
        lines.append(
            f"{size}  {len(group)}  {outer.min()}/{outer.mean():.2f}/{outer.max()}  "
            f"{inner.min()}/{inner.mean():.2f}/{inner.max()}  {len(strong)}  "
            f"{np.mean(strong) if strong else float('nan'):.4f}  "
            f"{np.mean(plain) if plain else float('nan'):.4f}"
        )
    histogram = Counter(r.strongly_degenerate for r in rows if r.error is None)
    lines.append("strongly degenerate iterations -> tests")
    lines.extend(f"{count} -> {histogram[count]}" for count in sorted(histogram))
    failed = sum(1 for r in rows if r.error is not None)
    if failed:
        lines.append(f"failed instances: {failed}")
    return "\n".join(lines)


def cmd_bench(args: argparse.Namespace) -> int:
    opts = options_from_args(args).model_dump()
    jobs = [(size, seed) for size in args.sizes for seed in range(args.seed, args.seed + args.seeds)]
    threads = bench_threads(args.threads)
    logger.info(f"bench: {len(jobs)} instances on {threads} workers")

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(bench_one, [s for s, _ in jobs], [k for _, k in jobs],
                                 [args.degree] * len(jobs), [opts] * len(jobs)))
    else:
        rows = [bench_one(size, seed, args.degree, opts) for size, seed in jobs]

    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(BenchRow.csv_fields)
        for row in rows:
            writer.writerow(row.to_csv_row())
    finally:
        if args.out:
            out.close()
    if args.summary:
        print(summarize(rows), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


# oracle-check

def cmd_oracle_check(args: argparse.Namespace) -> int:
    opts = options_from_args(args)
    vi_tol = args.vi_tol if args.vi_tol is not None else 5.0 / args.vi_iterations
    children = np.random.SeedSequence(args.seed).spawn(args.count)
    failures = 0
    for k, child in enumerate(children):
        game = random_small_game(np.random.Generator(np.random.PCG64(child)))
        try:
            eta = solve(game, opts=opts).eta.copy()
        except MppiError as e:
            logger.error(f"instance {k}: solver failed: {e}")
            failures += 1
            continue
        if args.inject_wrong_eta and k == 0:
            eta = eta + 1e-3
        exact = brute_force_value(game)
        approx = value_iteration_slope(game, args.vi_iterations)
        exact_gap = float(np.max(np.abs(eta - exact))) if game.n else 0.0
        vi_gap = float(np.max(np.abs(eta - approx))) if game.n else 0.0
        if exact_gap > 1e-9 or vi_gap > vi_tol:
            failures += 1
            print(f"instance {k}: FAIL n={game.n} brute-force gap {exact_gap:.3e}, "
                  f"value-iteration gap {vi_gap:.3e}")
    print(f"oracle-check: {args.count - failures}/{args.count} passed")
    return EXIT_OK if failures == 0 else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mppi", description="Mean-payoff stochastic game solver")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="console log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a ZSG v1 game")
    p.add_argument("--input", required=True, help="game file")
    p.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    p.add_argument("--sigma0", type=_int_list, help="initial MIN strategy, 0-based, comma-separated")
    p.add_argument("--trace-biases", help="JSON file of biases to inject per MIN strategy")
    p.add_argument("--fields-out", help="write state_index x y eta v sigma delta rows")
    p.add_argument("--coords", help="coordinates sidecar for --fields-out")
    p.add_argument("--dt", type=float, help="time step; eta is reported per unit time")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="write a benchmark instance")
    kinds = p.add_subparsers(dest="kind", required=True)
    k = kinds.add_parser("richman", help="Richman game on a random graph")
    k.add_argument("--nodes", type=int, required=True)
    k.add_argument("--degree", type=int, default=10)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out", required=True)
    k = kinds.add_parser("catmouse", help="cat-and-mouse pursuit game")
    k.add_argument("--grid", type=int, required=True, help="odd number of points per axis")
    k.add_argument("--speed", type=float, required=True, help="cat speed")
    k.add_argument("--out", required=True)
    k.add_argument("--coords", help="sidecar path (default OUT.coords)")
    k = kinds.add_parser("example5", help="the 5-node game")
    k.add_argument("--out", required=True)
    k.add_argument("--trace-out", help="also write the reference trace biases as JSON")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="solve Richman instances and write CSV statistics")
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--seeds", type=int, default=10, help="instances per size")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--degree", type=int, default=10)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--summary", action="store_true", help="print per-size statistics")
    p.add_argument("--threads", type=int, help="worker processes (env MPPI_THREADS wins)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="cross-check the solver on random small games")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--vi-iterations", type=int, default=100000)
    p.add_argument("--vi-tol", type=float, help="value-iteration tolerance (default 5/T)")
    p.add_argument("--inject-wrong-eta", action="store_true", help=argparse.SUPPRESS)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        logger.error(f"{args.command}: {e}", exc_info=True)
        return EXIT_INPUT
