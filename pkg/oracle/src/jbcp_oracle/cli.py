"""Command-line front end: ``oracle solve`` and ``oracle compare``."""

import argparse
import sys

from .compare import compare
from .model import oracle_solve, save_result


def _cmd_solve(args) -> int:
    result = oracle_solve(args.instance, solver=args.solver)
    if args.out:
        save_result(result, args.out)
    if result.solved:
        print(f"solved  objective={result.objective:.9g}  max_ratio={result.max_ratio:.3e}")
        return 0
    print(f"{result.status}  solver={result.solver}")
    return 1


def _cmd_compare(args) -> int:
    report = compare(args.primary, args.oracle, rtol=args.rtol)
    print(f"{'PASS' if report.passed else 'FAIL'}  {report.reason}")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oracle",
        description="Re-solve beamforming-with-compression instances with an "
        "independent convex-modeling stack and cross-check result files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance JSON file")
    p_solve.add_argument("instance", help="instance JSON path")
    p_solve.add_argument("--out", help="write the oracle result JSON here")
    p_solve.add_argument("--solver", default="CLARABEL", help="cvxpy backend name")
    p_solve.set_defaults(func=_cmd_solve)

    p_cmp = sub.add_parser("compare", help="cross-check a solver result against an oracle result")
    p_cmp.add_argument("primary", help="solver result JSON path")
    p_cmp.add_argument("oracle", help="oracle result JSON path")
    p_cmp.add_argument("--rtol", type=float, default=1e-3, help="relative objective tolerance")
    p_cmp.set_defaults(func=_cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
