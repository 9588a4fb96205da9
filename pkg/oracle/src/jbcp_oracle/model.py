"""Independent re-solver for the lifted beamforming-with-compression program.

Builds the lifted program directly in cvxpy from a shared instance file: one
Hermitian PSD covariance per user plus one compression covariance, SINR rows
as linear trace constraints, per-link rate caps as LMIs on trailing principal
blocks of the compression covariance, and per-antenna power caps.  Nothing is
imported from the main toolkit -- only the JSON file formats are shared -- so
agreement between the two is meaningful evidence that both models are right.
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path

import cvxpy as cp
import numpy as np

RESULT_SCHEMA = "jbcp-oracle-result-v1"

SOLVED = "solved"
INFEASIBLE = "infeasible"
FAILED = "failed"

_SOLVED_STATUSES = frozenset({cp.OPTIMAL, cp.OPTIMAL_INACCURATE})
_INFEASIBLE_STATUSES = frozenset({cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE})


@dataclass(frozen=True)
class OracleInstance:
    """Network instance decoded from the shared JSON layout."""

    num_antennas: int
    num_users: int
    channels: np.ndarray
    noise_powers: np.ndarray
    sinr_targets: np.ndarray
    fronthaul_caps: np.ndarray
    power_budgets: np.ndarray


@dataclass(frozen=True)
class OracleResult:
    """Outcome of one oracle solve.

    ``objective`` is None unless ``status`` is "solved".  ``tightness_ratios``
    holds, per user, the ratio of the second-largest to largest eigenvalue of
    the recovered transmit covariance; values near zero certify that a
    rank-one beamformer can be read off the lifted solution.
    """

    status: str
    objective: float | None
    tightness_ratios: tuple[float, ...]
    solver: str
    wall_seconds: float

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    @property
    def max_ratio(self) -> float:
        return max(self.tightness_ratios, default=0.0)


def load_instance(path) -> OracleInstance:
    """Read an instance JSON file (complex entries stored as [re, im] pairs)."""
    data = json.loads(Path(path).read_text())
    m = int(data["num_antennas"])
    k = int(data["num_users"])
    pairs = np.asarray(data["channels"], dtype=float)
    if pairs.shape != (k, m, 2):
        raise ValueError(f"channels must have shape ({k}, {m}, 2), got {pairs.shape}")
    inst = OracleInstance(
        num_antennas=m,
        num_users=k,
        channels=pairs[..., 0] + 1j * pairs[..., 1],
        noise_powers=np.asarray(data["noise_powers"], dtype=float),
        sinr_targets=np.asarray(data["sinr_targets"], dtype=float),
        fronthaul_caps=np.asarray(data["fronthaul_caps"], dtype=float),
        power_budgets=np.asarray(data["power_budgets"], dtype=float),
    )
    for name, size in (
        ("noise_powers", k),
        ("sinr_targets", k),
        ("fronthaul_caps", m),
        ("power_budgets", m),
    ):
        if getattr(inst, name).shape != (size,):
            raise ValueError(f"{name} must have length {size}")
    if np.any(inst.sinr_targets <= 0):
        raise ValueError("SINR targets must be positive")
    return inst


def build_model(inst: OracleInstance):
    """Assemble the cvxpy problem; returns (problem, user_covariances, compression)."""
    m, k = inst.num_antennas, inst.num_users
    vs = [cp.Variable((m, m), hermitian=True, name=f"V{i}") for i in range(k)]
    q = cp.Variable((m, m), hermitian=True, name="Q")
    total = q
    for v in vs:
        total = total + v

    constraints = [v >> 0 for v in vs]
    constraints.append(q >> 0)

    for i in range(k):
        h = inst.channels[i]
        outer = np.outer(h, h.conj())
        signal = cp.real(cp.trace(vs[i] @ outer))
        received = cp.real(cp.trace(total @ outer))
        # (1 + 1/target)*signal - received >= noise  <=>  SINR >= target
        constraints.append(
            (1.0 + 1.0 / inst.sinr_targets[i]) * signal
            - received
            - inst.noise_powers[i]
            >= 0
        )

    antenna_powers = [cp.real(total[mm, mm]) for mm in range(m)]
    for mm in range(m):
        scale = 2.0 ** inst.fronthaul_caps[mm]
        if mm == m - 1:
            # trailing block is scalar: the LMI reduces to a linear row
            constraints.append(scale * cp.real(q[mm, mm]) - antenna_powers[mm] >= 0)
        else:
            e = np.zeros((m - mm, m - mm))
            e[0, 0] = 1.0
            constraints.append(scale * q[mm:, mm:] - antenna_powers[mm] * e >> 0)
        constraints.append(antenna_powers[mm] <= inst.power_budgets[mm])

    objective = cp.Minimize(sum(cp.real(cp.trace(v)) for v in vs) + cp.real(cp.trace(q)))
    return cp.Problem(objective, constraints), vs, q


def _eigen_ratio(matrix: np.ndarray) -> float:
    w = np.linalg.eigvalsh(matrix)
    top = max(w[-1], 1e-300)
    second = max(w[-2], 0.0) if w.size > 1 else 0.0
    return float(second / top)


def oracle_solve(instance_path, solver: str = "CLARABEL") -> OracleResult:
    """Solve one instance file and report status, objective, and tightness.

    Falls back to SCS if the preferred interior-point backend errors out.
    A backend failure on both is reported as status "failed", never raised.
    """
    inst = load_instance(instance_path)
    problem, vs, _ = build_model(inst)

    start = time.perf_counter()
    used = solver
    try:
        problem.solve(solver=solver)
    except cp.SolverError:
        used = "SCS"
        try:
            problem.solve(solver="SCS")
        except cp.SolverError:
            return OracleResult(FAILED, None, (), used, time.perf_counter() - start)
    wall = time.perf_counter() - start

    if problem.status in _SOLVED_STATUSES:
        ratios = tuple(_eigen_ratio(v.value) for v in vs)
        return OracleResult(SOLVED, float(problem.value), ratios, used, wall)
    if problem.status in _INFEASIBLE_STATUSES:
        return OracleResult(INFEASIBLE, None, (), used, wall)
    return OracleResult(FAILED, None, (), used, wall)


def result_to_dict(result: OracleResult) -> dict:
    return {
        "schema": RESULT_SCHEMA,
        "status": result.status,
        "objective": result.objective,
        "tightness_ratios": list(result.tightness_ratios),
        "solver": result.solver,
        "wall_seconds": result.wall_seconds,
    }


def save_result(result: OracleResult, path) -> None:
    Path(path).write_text(json.dumps(result_to_dict(result), indent=2) + "\n")


def load_result(path) -> OracleResult:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != RESULT_SCHEMA:
        raise ValueError(f"not an oracle result file: {data.get('schema')!r}")
    objective = data["objective"]
    return OracleResult(
        status=str(data["status"]),
        objective=None if objective is None else float(objective),
        tightness_ratios=tuple(float(r) for r in data["tightness_ratios"]),
        solver=str(data["solver"]),
        wall_seconds=float(data["wall_seconds"]),
    )
