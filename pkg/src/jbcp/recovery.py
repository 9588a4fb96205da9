"""Rank-one beamformer recovery from a lifted covariance design.

The relaxation optimizes covariances V_k; the deployed design needs vectors
v_k with V_k = v_k v_k^H.  For this problem class the relaxation is tight, so
the principal eigenpair recovers the beamformer exactly up to solver noise.
Tightness is measured, not assumed: ``extract_beamformers`` reports per-user
eigenvalue ratios and extraction residuals, and ``certify`` re-evaluates every
constraint of the original problem on the extracted vectors.  Non-tight blocks
are surfaced as diagnostics rather than silently repaired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateUserError
from .network import (
    BeamformingDesign,
    CovarianceDesign,
    FeasibilityReport,
    NetworkInstance,
    check_feasibility,
    design_objective,
)

__all__ = [
    "TightnessDiagnostics",
    "Certification",
    "extract_beamformers",
    "certify",
]

#: a covariance block counts as rank-one when lambda_2/lambda_1 is below this
TIGHTNESS_THRESHOLD = 1e-4


@dataclass(frozen=True)
class TightnessDiagnostics:
    """How close each covariance block is to rank one.

    eigenvalue_ratios     (K,) lambda_2/lambda_1 of each V_k, in [0, 1]
    extraction_residuals  (K,) ||V_k - v_k v_k^H||_F / ||V_k||_F
    """

    eigenvalue_ratios: np.ndarray
    extraction_residuals: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(self.eigenvalue_ratios.max())

    def is_tight(self, threshold: float = TIGHTNESS_THRESHOLD) -> bool:
        return self.max_ratio <= threshold


@dataclass(frozen=True)
class Certification:
    """Independent check of an extracted design against the reference value.

    report               constraint slacks of the extracted design
    objective_value      sum_k ||v_k||^2 + tr(Q) of the extracted design
    reference_objective  objective the relaxation reported
    relative_gap         |objective_value - reference| / max(1, |reference|)
    """

    report: FeasibilityReport
    objective_value: float
    reference_objective: float
    relative_gap: float

    @property
    def passed(self) -> bool:
        return self.report.feasible and self.relative_gap <= self.report.tolerance


def _normalize_phase(v: np.ndarray, h: np.ndarray | None) -> np.ndarray:
    """Rotate v by a unit-modulus scalar; norms and |h^H v| are unchanged."""
    if h is not None:
        ip = complex(np.vdot(h, v))  # h^H v
        if abs(ip) > 1e-12 * float(np.linalg.norm(h) * np.linalg.norm(v)):
            return v * (ip.conjugate() / abs(ip))
    nz = np.flatnonzero(np.abs(v) > 0)
    lead = complex(v[nz[0]])
    return v * (lead.conjugate() / abs(lead))


def extract_beamformers(
    design: CovarianceDesign,
    instance: NetworkInstance | None = None,
) -> tuple[BeamformingDesign, TightnessDiagnostics]:
    """Principal-eigenpair beamformers v_k = sqrt(lambda_1) u_1 from each V_k.

    With ``instance`` given, each v_k is rotated so h_k^H v_k is real and
    nonnegative (the receiver-aligned convention); otherwise — or when the
    inner product vanishes — the first nonzero entry is made real positive.
    Q is passed through untouched.  Raises DegenerateUserError when some V_k
    has no positive eigenvalue: a vanishing covariance cannot meet a positive
    SINR target.
    """
    covs = design.covariances
    k_users, m = covs.shape[0], covs.shape[1]
    w, u = np.linalg.eigh(covs)  # ascending eigenvalues per block
    lam1 = w[:, -1]
    lam2 = w[:, -2] if m > 1 else np.zeros(k_users)

    beams = np.zeros((k_users, m), dtype=np.complex128)
    ratios = np.zeros(k_users)
    residuals = np.zeros(k_users)
    for k in range(k_users):
        if lam1[k] <= 0.0:
            raise DegenerateUserError(
                f"covariance of user {k} has no positive eigenvalue "
                f"(lambda_1 = {lam1[k]:.3e}); its SINR target is unreachable",
                user=k,
            )
        v = np.sqrt(lam1[k]) * u[k, :, -1]
        h = instance.channels[k] if instance is not None else None
        beams[k] = _normalize_phase(v, h)
        ratios[k] = min(max(lam2[k] / lam1[k], 0.0), 1.0)
        residuals[k] = np.linalg.norm(covs[k] - np.outer(beams[k], beams[k].conj())) / np.linalg.norm(covs[k])

    lifted = BeamformingDesign(beamformers=beams, compression_cov=design.compression_cov)
    return lifted, TightnessDiagnostics(eigenvalue_ratios=ratios, extraction_residuals=residuals)


def certify(
    instance: NetworkInstance,
    design: BeamformingDesign,
    reference_objective: float,
    tolerance: float = 1e-6,
) -> Certification:
    """Re-evaluate all constraints on the extracted vectors and compare cost.

    The check is independent of the solver: slacks come from the network
    model evaluated at the point design, and the objective gap is measured
    against the value the relaxation reported.
    """
    report = check_feasibility(instance, design, tolerance)
    value = design_objective(design)
    gap = abs(value - reference_objective) / max(1.0, abs(reference_objective))
    return Certification(
        report=report,
        objective_value=value,
        reference_objective=reference_objective,
        relative_gap=gap,
    )
