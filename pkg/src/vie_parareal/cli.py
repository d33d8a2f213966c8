"""Command-line front end: single solves, convergence experiments, cost model."""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv

from .collocation import Partition, SweepStats, linf_error, sequential_solve
from .configuration import PararealConfig
from .cost import speedup_estimate
from .errors import ConfigurationError, SpecError, UnknownProblemError, VieParaRealError
from .experiments import (
    FAMILIES,
    MODES,
    PRESETS,
    ExperimentSpec,
    fine_floor,
    fit_coarse_slopes,
    parse_sweep,
    preset,
    run_experiment,
)
from .gauss_legendre import compute_rule
from .graph import run
from .problem import available_problems, builtin

logger = logging.getLogger(__name__)

USAGE_ERRORS = (SpecError, ConfigurationError, UnknownProblemError)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _sweep(text: str) -> List[int]:
    try:
        return parse_sweep(text)
    except (SpecError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with its three subcommands."""
    parser = argparse.ArgumentParser(
        prog="vie-parareal",
        description="Parareal spectral collocation for Volterra integral equations",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log every parareal sweep")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Single solve
    solve_parser = subparsers.add_parser("solve", help="Solve one problem and report its error")
    solve_parser.add_argument("--problem", required=True, choices=available_problems())
    solve_parser.add_argument("--T", type=float, required=True, help="Horizon")
    solve_parser.add_argument("--N", type=int, required=True, help="Number of subintervals")
    solve_parser.add_argument("--M", type=int, required=True, help="Fine degree")
    solve_parser.add_argument("--Mc", type=int, required=True, help="Coarse degree")
    solve_parser.add_argument("--iters", type=int, default=10, help="Parareal iteration cap")
    solve_parser.add_argument("--tol", type=float, default=1e-12, help="Increment stopping tolerance")
    solve_parser.add_argument("--mode", choices=MODES, default="parareal")
    solve_parser.add_argument("--parallel", type=_bool, default=False, metavar="<bool>")

    # Experiments
    experiment_parser = subparsers.add_parser("experiment", help="Run a convergence study")
    experiment_parser.add_argument("family", nargs="?", choices=FAMILIES)
    experiment_parser.add_argument("--preset", choices=sorted(PRESETS))
    experiment_parser.add_argument("--problem")
    experiment_parser.add_argument("--T", type=float)
    experiment_parser.add_argument("--N", type=int)
    experiment_parser.add_argument("--M", type=_sweep, help="Fine degrees: 14,16 or 14:26:2")
    experiment_parser.add_argument("--Mc", type=_sweep, help="Coarse degrees")
    experiment_parser.add_argument("--k", type=_sweep, help="Iteration counts (error-vs-Mc)")
    experiment_parser.add_argument("--iters", type=int)
    experiment_parser.add_argument("--tol", type=float)
    experiment_parser.add_argument("--mode", choices=MODES)
    experiment_parser.add_argument("--parallel", type=_bool, metavar="<bool>")
    experiment_parser.add_argument("--name", help="Experiment id written to the CSV")
    experiment_parser.add_argument("--out", type=Path, help="CSV output path")
    experiment_parser.add_argument("--plot", type=Path, help="SVG chart output path")

    # Cost model
    speedup_parser = subparsers.add_parser("speedup", help="Evaluate the parareal cost model")
    for name, help_text in (("N", "Subintervals"), ("M", "Fine degree"), ("Mc", "Coarse degree"), ("K", "Iterations")):
        speedup_parser.add_argument(f"--{name}", type=int, required=True, help=help_text)
    return parser


def _solve(args: argparse.Namespace) -> None:
    problem = builtin(args.problem, args.T)
    partition = Partition(N=args.N, T=args.T)
    if args.mode == "parareal":
        config = PararealConfig(
            N=args.N, M=args.M, Mc=args.Mc, max_iters=args.iters, stop_tol=args.tol, parallel=args.parallel
        )
        start = time.perf_counter()
        solution, report = run(problem, partition, config)
        wall = (time.perf_counter() - start) * 1e3
        print(f"iterations: {report.iterations} (converged: {report.converged})")
        if report.increments:
            print(f"last increment: {report.increments[-1]:.6e}")
        print(f"sweeps: fine {report.fine_sweeps}, coarse {report.coarse_sweeps}, fallbacks {report.fallbacks}")
    else:
        if args.Mc >= args.M:
            raise ConfigurationError(f"coarse degree Mc={args.Mc} must be below M={args.M}")
        degree = args.M if args.mode == "sequential-fine" else args.Mc
        stats = SweepStats()
        start = time.perf_counter()
        solution = sequential_solve(problem, partition, compute_rule(degree), stats=stats)
        wall = (time.perf_counter() - start) * 1e3
        print(f"{args.mode} at degree {degree}: {stats.sweeps} sweeps, {stats.fallbacks} fallbacks")
    print(f"wall time: {wall:.1f} ms")
    print(f"final error: {linf_error(solution, problem.exact):.6e}")


def _experiment_spec(args: argparse.Namespace) -> ExperimentSpec:
    overrides = {
        key: getattr(args, key)
        for key in ("problem", "T", "N", "M", "Mc", "k", "iters", "tol", "mode", "parallel", "name", "out", "plot")
        if getattr(args, key) is not None
    }
    if args.preset:
        if args.family and args.family != PRESETS[args.preset]["family"]:
            raise SpecError(f"preset {args.preset} is an {PRESETS[args.preset]['family']} study, not {args.family}")
        return preset(args.preset, **overrides)
    if args.family is None:
        raise SpecError("give an experiment family or --preset")
    return ExperimentSpec.create(family=args.family, **overrides)


def _experiment(args: argparse.Namespace) -> None:
    spec = _experiment_spec(args)
    records = run_experiment(spec)
    print(f"{spec.experiment_id}: {len(records)} records")
    for record in records:
        print(
            f"  M={record.M:<3d} Mc={record.Mc:<3d} k={record.k:<3d} "
            f"error={record.linf_error:.3e} wall={record.wall_ms:.1f} ms"
        )
    if spec.family == "error-vs-Mc":
        floor = fine_floor(builtin(spec.problem, spec.T), Partition(N=spec.N, T=spec.T), spec.M[0])
        for k, fit in sorted(fit_coarse_slopes(records, floor).items()):
            print(f"  k={k}: slope {fit.slope:.4f} per degree, c = {fit.c:.3f} ({fit.points} points)")
    if spec.out is not None:
        print(f"CSV: {spec.out}")
    if spec.plot is not None:
        print(f"chart: {spec.plot}")


def _speedup(args: argparse.Namespace) -> None:
    estimate = speedup_estimate(args.N, args.M, args.Mc, args.K)
    print(f"N={estimate.N} M={estimate.M} Mc={estimate.Mc} K={estimate.K}")
    print(f"sequential cost: {estimate.sequential_cost:.6g} model units")
    print(f"parareal cost: {estimate.parareal_cost:.6g} model units")
    print(f"model speedup: {estimate.speedup:.4f}")
    print(f"asymptotic bound: {estimate.asymptotic_bound:.4f}")
    print(f"reference speedups: M/K = {estimate.reference_speedup:.4f}, N*M/K = {estimate.ideal_speedup:.4f}")


COMMANDS = {"solve": _solve, "experiment": _experiment, "speedup": _speedup}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit status.

    0 on success, 2 on a usage error, 1 when the computation fails.
    """
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except USAGE_ERRORS as exc:
        parser.print_usage(sys.stderr)
        logger.error(f"{args.command}: {exc}")
        return 2
    except (VieParaRealError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        return 1
    return 0


def main() -> None:
    """Console-script entry point."""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
