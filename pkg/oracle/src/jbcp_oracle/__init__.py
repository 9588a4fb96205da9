"""Independent re-solver and cross-checker for beamforming-with-compression results."""

from .compare import ComparisonReport, compare
from .model import (
    FAILED,
    INFEASIBLE,
    SOLVED,
    OracleInstance,
    OracleResult,
    build_model,
    load_instance,
    load_result,
    oracle_solve,
    save_result,
)

__all__ = [
    "FAILED",
    "INFEASIBLE",
    "SOLVED",
    "ComparisonReport",
    "OracleInstance",
    "OracleResult",
    "build_model",
    "compare",
    "load_instance",
    "load_result",
    "oracle_solve",
    "save_result",
]
