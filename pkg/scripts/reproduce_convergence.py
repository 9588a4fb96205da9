#!/usr/bin/env python3
"""Dual-value convergence on one reference-protocol instance.

Runs the three dual-ascent variants on a single M=8, K=10 instance at the
highest SINR target and writes per-iteration traces plus the tight direct
solve's objective, so f(mu^i) - f* can be plotted per variant.

Usage: python scripts/reproduce_convergence.py [--out OUTDIR] [--seed N]
       [--gamma G] [--max-outer N]
"""

import argparse
import json
import time
from pathlib import Path

from jbcp.bench import generate_instance, reference_config, write_trace
from jbcp.dual import OptimizerSettings, run_dual_ascent
from jbcp.frontend import build_sdr_program
from jbcp.solver import SolverSettings, Workspace

VARIANTS = ("exact", "inexact", "subgradient")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/convergence")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gamma", type=float, default=0.06)
    parser.add_argument("--max-outer", type=int, default=200)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = reference_config()
    instance = generate_instance(config, args.seed, args.gamma)

    # Reference objective from the direct solve of the lifted problem.  The
    # starved antenna leaves this program with a nearly degenerate face, so
    # the dual residual plateaus around 1e-5; 3e-5 with a pinned dual scale
    # is the reliably reachable setting and is accurate far beyond the 1e-2
    # band the convergence plots care about.
    t0 = time.perf_counter()
    program = build_sdr_program(instance)
    workspace = Workspace(program)
    direct = workspace.solve(
        SolverSettings(tolerance=3e-5, max_iterations=60_000, sigma=1000.0,
                       auto_scale=False, polish=False)
    )
    f_star = float(program.objective @ direct.x)
    print(f"direct solve: {direct.status}, objective {f_star:.8f} "
          f"({time.perf_counter() - t0:.1f}s)")

    summary = {"f_star": f_star, "gamma": args.gamma, "seed": args.seed}
    settings = OptimizerSettings(max_outer=args.max_outer)
    for variant in VARIANTS:
        t0 = time.perf_counter()
        outcome = run_dual_ascent(instance, variant, settings)
        elapsed = time.perf_counter() - t0
        write_trace(outcome.trace, out / f"trace-{variant}.csv")
        gap = abs(outcome.value - f_star)
        print(f"{variant:11s}: {outcome.status} after {outcome.iterations} outer / "
              f"{outcome.total_inner_iterations} inner iterations, "
              f"|f - f*| = {gap:.2e} ({elapsed:.1f}s)")
        summary[variant] = {
            "status": outcome.status,
            "outer_iterations": outcome.iterations,
            "total_inner_iterations": outcome.total_inner_iterations,
            "final_value": outcome.value,
            "gap_to_direct": gap,
            "wall_seconds": elapsed,
        }
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    print(f"traces and summary under {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
