"""Command-line front door.

Subcommands:
  solve      one instance file, one algorithm, print the outcome
  sweep      full experiment from a config file; writes CSV/JSON records
  check      certify a saved design against an instance
  dump-cone  emit the lifted cone program as JSON for external tooling
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import (
    ALGORITHM_NAMES,
    SDR,
    load_config,
    reference_config,
    run_one,
    run_sweep,
    save_result,
)
from .dual import OptimizerSettings
from .frontend import build_inner_program, build_sdr_program, program_to_json_dict
from .network import (
    check_feasibility,
    design_from_dict,
    design_objective,
    load_instance,
)

_WORKERS_HELP = "worker processes (default: JBCP_WORKERS env var, then CPU count)"


def _optimizer_overrides(args, base: OptimizerSettings | None = None) -> OptimizerSettings:
    settings = base or OptimizerSettings()
    fields = {}
    if getattr(args, "eps_out", None) is not None:
        fields["eps_out"] = args.eps_out
    if getattr(args, "max_outer", None) is not None:
        fields["max_outer"] = args.max_outer
    return replace(settings, **fields) if fields else settings


def _cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    instance_id = Path(args.instance).stem
    gamma = float(instance.sinr_targets[0])
    optimizer = _optimizer_overrides(args)
    record, _ = run_one(instance, instance_id, gamma, args.algo, optimizer)
    print(f"instance    : {record.instance_id} (M={instance.num_antennas}, K={instance.num_users})")
    print(f"algorithm   : {record.algorithm}")
    print(f"objective   : {record.objective:.9g}")
    print(f"outer/inner : {record.outer_iterations} / {record.total_inner_iterations}")
    print(f"verdict     : {record.feasibility_verdict}")
    print(f"tightness   : {record.tightness_ratio:.3g}")
    active = ";".join(str(m) for m in record.active_papc) or "-"
    print(f"active papc : {active}")
    if args.out:
        save_result(record, args.out)
        print(f"wrote {args.out}")
    return 0 if record.feasible else 1


def _cmd_sweep(args) -> int:
    config = load_config(args.config) if args.config else reference_config()
    fields = {}
    if args.out:
        fields["output_dir"] = args.out
    if args.seed is not None:
        fields["channel_seed"] = args.seed
    if args.algo:
        fields["algorithms"] = (args.algo,)
    optimizer = _optimizer_overrides(args, config.optimizer)
    if optimizer != config.optimizer:
        fields["optimizer"] = optimizer
    if fields:
        config = replace(config, **fields)

    cells = config.runs * len(config.gamma_sweep) * len(config.algorithms)
    print(f"sweep: {config.runs} runs x {len(config.gamma_sweep)} targets x "
          f"{len(config.algorithms)} algorithms = {cells} solves")
    result = run_sweep(config, workers=args.workers)
    for algorithm, per_gamma in result.aggregates.items():
        for gamma, entry in per_gamma.items():
            print(f"{algorithm:5s} gamma={gamma}: mean objective "
                  f"{entry['mean_objective']:.6g} over {entry['feasible_count']}"
                  f"/{entry['count']} feasible, "
                  f"{entry['mean_wall_seconds']:.3g}s avg")
    if config.output_dir:
        print(f"records under {config.output_dir}")
    return 0


def _cmd_check(args) -> int:
    instance = load_instance(args.instance)
    design = design_from_dict(json.loads(Path(args.design).read_text()))
    report = check_feasibility(instance, design, args.tol)
    print(f"objective       : {design_objective(design):.9g}")
    print(f"min sinr slack  : {report.sinr_slack.min():.3e}")
    print(f"min rate slack  : {report.fronthaul_slack.min():.3e}")
    print(f"min power slack : {report.power_slack.min():.3e}")
    print(f"worst violation : {report.worst_violation:.3e} (tol {report.tolerance:g})")
    print(f"verdict         : {'feasible' if report.feasible else 'infeasible'}")
    return 0 if report.feasible else 1


def _cmd_dump_cone(args) -> int:
    instance = load_instance(args.instance)
    if args.mu is not None:
        mu = np.array([float(v) for v in args.mu.split(",")])
        program = build_inner_program(instance, mu)
    else:
        program = build_sdr_program(instance)
    payload = json.dumps(program_to_json_dict(program), indent=1)
    if args.out:
        Path(args.out).write_text(payload)
        print(f"wrote {args.out}")
    else:
        print(payload)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jbcp", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one algorithm on one instance file")
    p_solve.add_argument("instance", help="instance JSON path")
    p_solve.add_argument("--algo", choices=ALGORITHM_NAMES, default=SDR)
    p_solve.add_argument("--eps-out", type=float, default=None)
    p_solve.add_argument("--max-outer", type=int, default=None)
    p_solve.add_argument("--out", default=None, help="write result JSON here")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep from a config file")
    p_sweep.add_argument("--config", default=None, help="config JSON (default: reference protocol)")
    p_sweep.add_argument("--algo", choices=ALGORITHM_NAMES, default=None,
                         help="restrict to one algorithm")
    p_sweep.add_argument("--seed", type=int, default=None, help="override the base channel seed")
    p_sweep.add_argument("--workers", type=int, default=None, help=_WORKERS_HELP)
    p_sweep.add_argument("--out", default=None, help="output directory override")
    p_sweep.add_argument("--eps-out", type=float, default=None)
    p_sweep.add_argument("--max-outer", type=int, default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_check = sub.add_parser("check", help="certify a saved design against an instance")
    p_check.add_argument("instance", help="instance JSON path")
    p_check.add_argument("design", help="design JSON path")
    p_check.add_argument("--tol", type=float, default=1e-6)
    p_check.set_defaults(func=_cmd_check)

    p_dump = sub.add_parser("dump-cone", help="emit the lifted cone program as JSON")
    p_dump.add_argument("instance", help="instance JSON path")
    p_dump.add_argument("--mu", default=None,
                        help="comma-separated multipliers: dump the reweighted inner program instead")
    p_dump.add_argument("--out", default=None, help="write here instead of stdout")
    p_dump.set_defaults(func=_cmd_dump_cone)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
