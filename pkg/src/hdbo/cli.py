"""Command-line entry point.

``hdbo run`` executes one benchmark cell (several seeds) and ``hdbo
suite`` a file of cells; both write runs.csv and summary.csv into the
output directory.
"""

import argparse
import sys

from .bench import (
    PROBLEM_NAMES,
    SuiteCell,
    export_csv,
    parse_seed_list,
    parse_suite_file,
    run_suite,
)
from .driver import METHODS

QUICK_BUDGET = 200
QUICK_SEEDS = 5


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hdbo",
        description=(
            "High-dimensional Bayesian optimization benchmarks: subspace "
            "GP-UCB methods against baselines on embedded test problems."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    runner = commands.add_parser("run", help="run one benchmark cell")
    runner.add_argument("--problem", choices=PROBLEM_NAMES, required=True)
    runner.add_argument("--D", type=int, required=True, help="ambient dimension")
    runner.add_argument("--d", type=int, default=10, help="subspace dimension")
    runner.add_argument("--method", choices=METHODS, required=True)
    runner.add_argument("--budget", type=int, default=500)
    runner.add_argument("--init", type=int, default=50)
    runner.add_argument(
        "--seeds", default="20", help="seed count or comma-separated list"
    )
    runner.add_argument("--beta", type=float, default=4.0)
    runner.add_argument("--out", required=True, help="output directory")
    runner.add_argument(
        "--quick",
        action="store_true",
        help=f"CI profile: budget {QUICK_BUDGET}, {QUICK_SEEDS} seeds",
    )
    runner.add_argument("--jobs", type=int, default=1)

    suite = commands.add_parser("suite", help="run a suite description file")
    suite.add_argument("--spec", required=True, help="suite description file")
    suite.add_argument("--out", required=True, help="output directory")
    suite.add_argument("--quick", action="store_true")
    suite.add_argument("--jobs", type=int, default=1)
    return parser


def _apply_quick(cell):
    return SuiteCell(
        problem=cell.problem,
        method=cell.method,
        dim_D=cell.dim_D,
        target_dim_d=cell.target_dim_d,
        budget_T=QUICK_BUDGET,
        init_n=min(cell.init_n, QUICK_BUDGET - 1),
        seeds=tuple(range(QUICK_SEEDS)),
        beta=cell.beta,
    )


def _report(report, out_dir):
    runs_path, summary_path = export_csv(report, out_dir)
    failed = 0
    for result in report.cells:
        cell = result.cell
        label = (
            f"{cell.problem} D={cell.dim_D} d={cell.target_dim_d} "
            f"{cell.method} T={cell.budget_T} seeds={len(cell.seeds)}"
        )
        if result.errors:
            failed += 1
            for seed, error in sorted(result.errors.items()):
                print(f"FAILED {label} seed={seed}: {error}", file=sys.stderr)
        else:
            final = result.mean_regret[-1]
            spread = result.stderr_regret[-1]
            print(
                f"{label}: final mean regret {final:.6g} "
                f"(stderr {spread:.6g}, {result.wall_seconds:.1f} s)"
            )
    print(f"wrote {runs_path} and {summary_path}")
    return failed


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        try:
            seeds = parse_seed_list(args.seeds)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        cell = SuiteCell(
            problem=args.problem,
            method=args.method,
            dim_D=args.D,
            target_dim_d=args.d,
            budget_T=args.budget,
            init_n=args.init,
            seeds=seeds,
            beta=args.beta,
        )
        cells = [_apply_quick(cell) if args.quick else cell]
    else:
        try:
            cells = parse_suite_file(args.spec)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if args.quick:
            cells = [_apply_quick(cell) for cell in cells]

    report = run_suite(cells, jobs=args.jobs)
    failed = _report(report, args.out)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
