"""Joint beamforming and fronthaul compression under per-antenna power caps.

The toolkit minimizes total transmit power subject to per-user SINR floors,
per-link fronthaul rate caps and per-antenna power budgets.  It builds the
lifted (semidefinite) form of the problem, solves it either directly with an
operator-splitting cone solver or by projected gradient ascent on the partial
Lagrangian dual, recovers rank-one beamformers, and ships a Monte-Carlo
harness for algorithm comparison.
"""

from .bench import (
    ALGORITHM_NAMES,
    ExperimentConfig,
    ResultRecord,
    SweepResult,
    generate_instance,
    reference_config,
    run_one,
    run_sweep,
)
from .dual import (
    DualOutcome,
    OptimizerSettings,
    evaluate_dual,
    run_dual_ascent,
)
from .errors import (
    DegenerateUserError,
    InstanceInfeasibleError,
    LineSearchError,
    SolveFailedError,
)
from .frontend import (
    ConeProgram,
    SolutionExtract,
    build_inner_program,
    build_sdr_program,
    extract_solution,
    reweight_inner,
)
from .network import (
    BeamformingDesign,
    CovarianceDesign,
    FeasibilityReport,
    NetworkInstance,
    antenna_power,
    check_feasibility,
    design_objective,
    fronthaul_rate,
    lift_design,
    load_instance,
    save_instance,
    sinr,
    total_power,
)
from .recovery import (
    Certification,
    TightnessDiagnostics,
    certify,
    extract_beamformers,
)
from .solver import (
    SolveResult,
    SolverSettings,
    Workspace,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHM_NAMES",
    "BeamformingDesign",
    "Certification",
    "ConeProgram",
    "CovarianceDesign",
    "DegenerateUserError",
    "DualOutcome",
    "ExperimentConfig",
    "FeasibilityReport",
    "InstanceInfeasibleError",
    "LineSearchError",
    "NetworkInstance",
    "OptimizerSettings",
    "ResultRecord",
    "SolutionExtract",
    "SolveFailedError",
    "SolveResult",
    "SolverSettings",
    "SweepResult",
    "TightnessDiagnostics",
    "Workspace",
    "antenna_power",
    "build_inner_program",
    "build_sdr_program",
    "certify",
    "check_feasibility",
    "design_objective",
    "evaluate_dual",
    "extract_beamformers",
    "extract_solution",
    "fronthaul_rate",
    "generate_instance",
    "lift_design",
    "load_instance",
    "reference_config",
    "reweight_inner",
    "run_dual_ascent",
    "run_one",
    "run_sweep",
    "save_instance",
    "sinr",
    "total_power",
    "__version__",
]
