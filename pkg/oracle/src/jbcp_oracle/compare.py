"""Cross-validation of a main-toolkit result against an oracle result.

Both sides are plain JSON files, so agreement can be checked long after the
solves ran, on another machine, or between mismatched package versions.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .model import INFEASIBLE, SOLVED, load_result

PRIMARY_SCHEMA = "jbcp-result-v1"

# lifted covariances must be numerically rank one before the objectives are
# comparable design-for-design
RATIO_BOUND = 1e-4


@dataclass(frozen=True)
class ComparisonReport:
    passed: bool
    reason: str
    primary_verdict: str
    oracle_status: str
    primary_objective: float | None
    oracle_objective: float | None
    relative_gap: float | None
    oracle_max_ratio: float | None


def _load_primary(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != PRIMARY_SCHEMA:
        raise ValueError(f"not a solver result file: {data.get('schema')!r}")
    return data


def compare(primary_path, oracle_path, rtol: float = 1e-3) -> ComparisonReport:
    """Check that two result files tell the same story about one instance.

    Passes when both sides report infeasible, or when both solved and the
    objectives agree to ``rtol`` (relative to the oracle value) with the
    oracle's covariances numerically rank one.  Any status disagreement or a
    failed oracle solve fails the comparison.
    """
    primary = _load_primary(primary_path)
    oracle = load_result(oracle_path)
    verdict = str(primary["feasibility_verdict"])

    if verdict == "infeasible" and oracle.status == INFEASIBLE:
        return ComparisonReport(
            True, "both report infeasible", verdict, oracle.status, None, None, None, None
        )
    if verdict != "feasible":
        return ComparisonReport(
            False,
            f"solver verdict {verdict!r} vs oracle status {oracle.status!r}",
            verdict,
            oracle.status,
            None,
            oracle.objective,
            None,
            None,
        )
    if oracle.status != SOLVED:
        return ComparisonReport(
            False,
            f"oracle status {oracle.status!r} on an instance the solver handled",
            verdict,
            oracle.status,
            float(primary["objective"]),
            oracle.objective,
            None,
            None,
        )

    p_obj = float(primary["objective"])
    o_obj = float(oracle.objective)
    gap = abs(p_obj - o_obj) / max(1.0, abs(o_obj))
    max_ratio = oracle.max_ratio

    if gap > rtol:
        reason = f"objective gap {gap:.3e} exceeds rtol {rtol:.1e}"
        passed = False
    elif max_ratio > RATIO_BOUND:
        reason = f"oracle covariance not rank one (ratio {max_ratio:.3e})"
        passed = False
    else:
        reason = f"objectives agree (gap {gap:.3e}, ratio {max_ratio:.3e})"
        passed = True
    return ComparisonReport(
        passed, reason, verdict, oracle.status, p_obj, o_obj, gap, max_ratio
    )
