"""Experiment harness: random instances, algorithm sweeps, result records.

One sweep crosses Monte-Carlo channel draws with a SINR-target list and runs
every requested algorithm on each instance: the three dual-ascent variants
plus the direct conic solve of the lifted problem.  Each (instance, algorithm)
pair yields one ``ResultRecord``; per-iteration traces, instance files and
aggregate tables are written under the configured output directory in plain
CSV/JSON so plotting needs no code from this package.

Instances are embarrassingly parallel: workers own their solver state
exclusively and records are merged and sorted afterwards, so the output is
independent of scheduling (wall-clock columns aside).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .dual import (
    EXACT,
    INEXACT,
    SUBGRADIENT,
    DualOutcome,
    OptimizerSettings,
    run_dual_ascent,
)
from .errors import (
    DegenerateUserError,
    InstanceInfeasibleError,
    LineSearchError,
    SolveFailedError,
)
from .frontend import build_sdr_program, extract_solution
from .network import NetworkInstance, check_feasibility, save_instance
from .recovery import extract_beamformers
from .solver import INFEASIBLE, OPTIMAL, SolverSettings, Workspace

__all__ = [
    "ALGORITHM_NAMES",
    "ExperimentConfig",
    "ResultRecord",
    "SweepResult",
    "reference_config",
    "generate_instance",
    "run_one",
    "run_sweep",
    "config_to_dict",
    "config_from_dict",
    "record_to_dict",
    "save_result",
]

RESULT_SCHEMA = "jbcp-result-v1"

# command-line algorithm names; the first three are dual-ascent variants
PEGA, PIGA, PSGA, SDR = "pega", "piga", "psga", "sdr"
ALGORITHM_NAMES = (PEGA, PIGA, PSGA, SDR)
_VARIANTS = {PEGA: EXACT, PIGA: INEXACT, PSGA: SUBGRADIENT}

WORKERS_ENV = "JBCP_WORKERS"

TRACE_COLUMNS = (
    "iteration",
    "f",
    "projected_residual",
    "lambda",
    "alpha",
    "inner_iterations",
    "cumulative_seconds",
)
RECORD_COLUMNS = (
    "instance_id",
    "algorithm",
    "gamma",
    "objective",
    "outer_iterations",
    "total_inner_iterations",
    "wall_seconds",
    "feasibility_verdict",
    "tightness_ratio",
    "active_papc",
)

FEASIBLE = "feasible"

#: a power constraint counts as active when its multiplier clears this floor
ACTIVE_MULTIPLIER_FLOOR = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol for one sweep.

    num_antennas/num_users  network size (M, K)
    channel_seed            base seed; Monte-Carlo run r draws from seed + r
    gamma_sweep             SINR targets to sweep (applied to every user)
    fronthaul_caps          per-antenna link caps in bits (length M)
    noise_powers            per-user noise variances (length K)
    power_budgets           per-antenna power caps (length M)
    algorithms              subset of ALGORITHM_NAMES to run
    optimizer               dual-ascent settings shared by all variants
    runs                    Monte-Carlo repetition count
    output_dir              where instances/traces/results land; None = no files
    """

    num_antennas: int
    num_users: int
    channel_seed: int
    gamma_sweep: tuple
    fronthaul_caps: tuple
    noise_powers: tuple
    power_budgets: tuple
    algorithms: tuple = ALGORITHM_NAMES
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    runs: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        if self.num_antennas < 1 or self.num_users < 1:
            raise ValueError("network size must be positive")
        if len(self.gamma_sweep) == 0:
            raise ValueError("gamma_sweep must be nonempty")
        if min(self.gamma_sweep) <= 0:
            raise ValueError("SINR targets must be positive")
        for name, vec, n in (
            ("fronthaul_caps", self.fronthaul_caps, self.num_antennas),
            ("noise_powers", self.noise_powers, self.num_users),
            ("power_budgets", self.power_budgets, self.num_antennas),
        ):
            if len(vec) != n:
                raise ValueError(f"{name} must have length {n}, got {len(vec)}")
            if min(vec) <= 0:
                raise ValueError(f"{name} entries must be positive")
        unknown = set(self.algorithms) - set(ALGORITHM_NAMES)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")


def reference_config(output_dir: str | None = None) -> ExperimentConfig:
    """Reference protocol: 8 antennas, 10 users, one starved antenna.

    Fronthaul caps of log2(1.1) bits force heavy compression, and antenna 1's
    budget sits three orders of magnitude below the others so at least one
    power constraint is always active.  200 Monte-Carlo draws per target.
    """
    return ExperimentConfig(
        num_antennas=8,
        num_users=10,
        channel_seed=0,
        gamma_sweep=(0.03, 0.04, 0.05, 0.06),
        fronthaul_caps=(math.log2(1.1),) * 8,
        noise_powers=(1.0,) * 10,
        power_budgets=(8.5e-3,) + (8.5,) * 7,
        algorithms=ALGORITHM_NAMES,
        optimizer=OptimizerSettings(),
        runs=200,
        output_dir=output_dir,
    )


def generate_instance(config: ExperimentConfig, seed: int, gamma: float | None = None) -> NetworkInstance:
    """Rayleigh-fading instance: h entries i.i.d. complex normal, unit variance.

    Deterministic in ``seed``; the channel draw does not depend on ``gamma``,
    so sweeping the target reuses the same fading realization.
    """
    gamma = float(config.gamma_sweep[0] if gamma is None else gamma)
    rng = np.random.default_rng(seed)
    shape = (config.num_users, config.num_antennas)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return NetworkInstance(
        channels=h,
        noise_powers=np.asarray(config.noise_powers, dtype=np.float64),
        sinr_targets=np.full(config.num_users, gamma),
        fronthaul_caps=np.asarray(config.fronthaul_caps, dtype=np.float64),
        power_budgets=np.asarray(config.power_budgets, dtype=np.float64),
    )


@dataclass(frozen=True)
class ResultRecord:
    """One (instance, algorithm) outcome; columns match RECORD_COLUMNS."""

    instance_id: str
    algorithm: str
    gamma: float
    objective: float
    outer_iterations: int
    total_inner_iterations: int
    wall_seconds: float
    feasibility_verdict: str
    tightness_ratio: float
    active_papc: tuple

    @property
    def feasible(self) -> bool:
        return self.feasibility_verdict == FEASIBLE


def record_to_dict(record: ResultRecord) -> dict:
    return {
        "instance_id": record.instance_id,
        "algorithm": record.algorithm,
        "gamma": record.gamma,
        "objective": record.objective,
        "outer_iterations": record.outer_iterations,
        "total_inner_iterations": record.total_inner_iterations,
        "wall_seconds": record.wall_seconds,
        "feasibility_verdict": record.feasibility_verdict,
        "tightness_ratio": record.tightness_ratio,
        "active_papc": list(record.active_papc),
    }


def _record_to_row(record: ResultRecord) -> list:
    row = record_to_dict(record)
    row["active_papc"] = ";".join(str(m) for m in record.active_papc)
    return [row[c] for c in RECORD_COLUMNS]


def _verdict_tolerance(optimizer: OptimizerSettings) -> float:
    # an active budget can be missed by up to the outer residual, so the
    # deployable-design check cannot be stricter than eps_out
    return max(1e-6, optimizer.eps_out)


def run_one(
    instance: NetworkInstance,
    instance_id: str,
    gamma: float,
    algorithm: str,
    optimizer: OptimizerSettings | None = None,
    direct_tolerance: float = 1e-8,
) -> tuple[ResultRecord, tuple | None]:
    """Run one algorithm on one instance; never raises on solver trouble.

    Returns the record plus the per-iteration trace (dual-ascent variants
    only).  Failures land in ``feasibility_verdict``: "infeasible" when the
    instance admits no design, otherwise a short failure tag.
    """
    if algorithm not in ALGORITHM_NAMES:
        raise ValueError(f"algorithm must be one of {ALGORITHM_NAMES}, got {algorithm!r}")
    optimizer = optimizer or OptimizerSettings()
    t0 = time.perf_counter()
    failure = None
    outcome: DualOutcome | None = None
    trace = None
    try:
        if algorithm == SDR:
            program = build_sdr_program(instance)
            workspace = Workspace(program)
            workspace.set_objective(program.objective)
            result = workspace.solve(SolverSettings(tolerance=direct_tolerance))
            if result.status == INFEASIBLE:
                failure = "infeasible"
            elif result.status != OPTIMAL:
                failure = f"solve-failed:{result.status}"
            else:
                extract = extract_solution(program, result)
                design = extract.design
                multipliers = np.array(
                    [extract.dual_multipliers[f"papc:{m}"] for m in range(instance.num_antennas)]
                )
                outer, inner = 0, result.iterations
        else:
            outcome = run_dual_ascent(instance, _VARIANTS[algorithm], optimizer)
            design = outcome.design
            multipliers = outcome.mu
            outer, inner = outcome.iterations, outcome.total_inner_iterations
            trace = outcome.trace
    except InstanceInfeasibleError:
        failure = "infeasible"
    except LineSearchError:
        failure = "line-search-failed"
    except SolveFailedError as err:
        failure = f"solve-failed:{err.status}" if err.status else "solve-failed"

    wall = time.perf_counter() - t0
    if failure is not None:
        record = ResultRecord(
            instance_id=instance_id,
            algorithm=algorithm,
            gamma=gamma,
            objective=math.nan,
            outer_iterations=0,
            total_inner_iterations=0,
            wall_seconds=wall,
            feasibility_verdict=failure,
            tightness_ratio=math.nan,
            active_papc=(),
        )
        return record, trace

    try:
        beams, diagnostics = extract_beamformers(design, instance)
    except DegenerateUserError as err:
        record = ResultRecord(
            instance_id=instance_id,
            algorithm=algorithm,
            gamma=gamma,
            objective=math.nan,
            outer_iterations=outer,
            total_inner_iterations=inner,
            wall_seconds=time.perf_counter() - t0,
            feasibility_verdict=f"degenerate-user:{err.user}",
            tightness_ratio=math.nan,
            active_papc=(),
        )
        return record, trace

    report = check_feasibility(instance, beams, _verdict_tolerance(optimizer))
    objective = float(
        np.sum(np.abs(beams.beamformers) ** 2) + np.real(np.trace(beams.compression_cov))
    )
    active = tuple(int(m) for m in np.flatnonzero(multipliers > ACTIVE_MULTIPLIER_FLOOR))
    record = ResultRecord(
        instance_id=instance_id,
        algorithm=algorithm,
        gamma=gamma,
        objective=objective,
        outer_iterations=outer,
        total_inner_iterations=inner,
        wall_seconds=time.perf_counter() - t0,
        feasibility_verdict=FEASIBLE if report.feasible else "violated",
        tightness_ratio=diagnostics.max_ratio,
        active_papc=active,
    )
    return record, trace


@dataclass(frozen=True)
class SweepResult:
    """All records of a sweep plus per-(algorithm, gamma) aggregates."""

    records: tuple
    aggregates: dict


def _instance_id(config: ExperimentConfig, run: int, gamma: float) -> str:
    return f"m{config.num_antennas}k{config.num_users}-r{run:04d}-g{gamma:g}"


def _run_cell(args) -> list:
    """One (run, gamma) cell: every algorithm on one instance."""
    config, run, gamma = args
    seed = config.channel_seed + run
    instance = generate_instance(config, seed, gamma)
    instance_id = _instance_id(config, run, gamma)
    out = []
    for algorithm in config.algorithms:
        record, trace = run_one(instance, instance_id, gamma, algorithm, config.optimizer)
        out.append((record, trace))
    return out


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "0")) or (os.cpu_count() or 1)
    return max(1, workers)


def run_sweep(config: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """Cross runs x gamma_sweep x algorithms; never aborts on one bad cell.

    ``workers`` defaults to the JBCP_WORKERS environment variable, then the
    CPU count.  Records come back sorted by (instance id, algorithm) so the
    output is reproducible whatever the scheduling; reruns of the same config
    differ only in wall-clock columns.
    """
    tasks = [(config, run, float(g)) for run in range(config.runs) for g in config.gamma_sweep]
    workers = _resolve_workers(workers)
    if workers > 1 and len(tasks) > 1:
        with get_context("spawn").Pool(workers) as pool:
            cells = pool.map(_run_cell, tasks)
    else:
        cells = [_run_cell(t) for t in tasks]

    pairs = [pair for cell in cells for pair in cell]
    pairs.sort(key=lambda pair: (pair[0].instance_id, pair[0].algorithm))
    records = tuple(record for record, _ in pairs)
    aggregates = _aggregate(records)

    if config.output_dir is not None:
        _write_outputs(config, pairs, aggregates)
    return SweepResult(records=records, aggregates=aggregates)


def _aggregate(records) -> dict:
    """Mean objective/wall seconds and feasibility rate per (algorithm, gamma)."""
    cells: dict = {}
    for rec in records:
        cells.setdefault((rec.algorithm, rec.gamma), []).append(rec)
    out: dict = {}
    for (algorithm, gamma), recs in sorted(cells.items()):
        feasible = [r for r in recs if r.feasible]
        entry = {
            "count": len(recs),
            "feasible_count": len(feasible),
            "feasibility_rate": len(feasible) / len(recs),
            "mean_objective": (
                float(np.mean([r.objective for r in feasible])) if feasible else math.nan
            ),
            "mean_wall_seconds": float(np.mean([r.wall_seconds for r in recs])),
            "mean_outer_iterations": (
                float(np.mean([r.outer_iterations for r in feasible])) if feasible else math.nan
            ),
            "mean_inner_iterations": (
                float(np.mean([r.total_inner_iterations for r in feasible])) if feasible else math.nan
            ),
        }
        out.setdefault(algorithm, {})[f"{gamma:g}"] = entry
    return out


def _write_outputs(config: ExperimentConfig, pairs, aggregates) -> None:
    root = Path(config.output_dir)
    for sub in ("instances", "traces", "results"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    seen: set = set()
    for record, trace in pairs:
        if record.instance_id not in seen:
            seen.add(record.instance_id)
            run = int(record.instance_id.split("-r")[1].split("-")[0])
            instance = generate_instance(config, config.channel_seed + run, record.gamma)
            save_instance(instance, root / "instances" / f"{record.instance_id}.json")
        if trace is not None:
            write_trace(trace, root / "traces" / f"{record.instance_id}-{record.algorithm}.csv")

    records = [record for record, _ in pairs]
    with open(root / "results" / "records.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        writer.writerows(_record_to_row(r) for r in records)
    payload = {"schema": RESULT_SCHEMA, "records": [record_to_dict(r) for r in records]}
    (root / "results" / "records.json").write_text(json.dumps(payload, indent=1))
    (root / "results" / "aggregates.json").write_text(json.dumps(aggregates, indent=1))


def write_trace(trace, path) -> None:
    """Per-iteration CSV with TRACE_COLUMNS; row 0 is the initial evaluation."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace:
            writer.writerow(
                [
                    row.iteration,
                    repr(row.value),
                    repr(row.projected_residual),
                    repr(row.lam),
                    repr(row.alpha),
                    row.inner_iterations,
                    repr(row.cumulative_seconds),
                ]
            )


def save_result(record: ResultRecord, path, tightness_ratios=None) -> None:
    """Single-solve result JSON for cross-toolchain comparison."""
    payload = {"schema": RESULT_SCHEMA, **record_to_dict(record)}
    if tightness_ratios is not None:
        payload["tightness_ratios"] = [float(r) for r in tightness_ratios]
    Path(path).write_text(json.dumps(payload, indent=1))


# --- config serialization ----------------------------------------------------


def config_to_dict(config: ExperimentConfig) -> dict:
    opt = config.optimizer
    return {
        "num_antennas": config.num_antennas,
        "num_users": config.num_users,
        "channel_seed": config.channel_seed,
        "gamma_sweep": list(config.gamma_sweep),
        "fronthaul_caps": list(config.fronthaul_caps),
        "noise_powers": list(config.noise_powers),
        "power_budgets": list(config.power_budgets),
        "algorithms": list(config.algorithms),
        "optimizer": {f: getattr(opt, f) for f in opt.__dataclass_fields__},
        "runs": config.runs,
        "output_dir": config.output_dir,
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    fields = dict(data)
    optimizer = OptimizerSettings(**fields.pop("optimizer", {}))
    for key in ("gamma_sweep", "fronthaul_caps", "noise_powers", "power_budgets", "algorithms"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return ExperimentConfig(optimizer=optimizer, **fields)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=1))


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
