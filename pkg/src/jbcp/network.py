"""Problem data and exact performance evaluators for the cooperative downlink.

A central processor serves K single-antenna users through M single-antenna
transmitters connected by rate-limited fronthaul links.  A design consists of
per-user beamformers (or their covariance surrogates) plus one compression
noise covariance Q; the evaluators below measure SINR, fronthaul rate and
per-antenna power exactly as the optimization modules model them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import check_hermitian, schur_complement_info

__all__ = [
    "NetworkInstance",
    "BeamformingDesign",
    "CovarianceDesign",
    "FeasibilityReport",
    "lift_design",
    "sinr",
    "fronthaul_rate",
    "antenna_power",
    "total_power",
    "design_objective",
    "check_feasibility",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
    "design_to_dict",
    "design_from_dict",
]


def _as_positive_vector(x, n: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError(f"{name} entries must be finite and positive")
    return x


@dataclass(frozen=True)
class NetworkInstance:
    """Static problem data: channels, targets, caps and budgets.

    channels        (K, M) complex, row k is user k's channel h_k
    noise_powers    (K,) receiver noise variances sigma_k^2
    sinr_targets    (K,) required SINR levels (linear scale)
    fronthaul_caps  (M,) per-link rate caps in bits
    power_budgets   (M,) per-antenna transmit power caps
    """

    channels: np.ndarray
    noise_powers: np.ndarray
    sinr_targets: np.ndarray
    fronthaul_caps: np.ndarray
    power_budgets: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.channels, dtype=np.complex128)
        if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
            raise ValueError(f"channels must be a (K, M) matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channels have non-finite entries")
        k, m = h.shape
        object.__setattr__(self, "channels", h)
        object.__setattr__(self, "noise_powers", _as_positive_vector(self.noise_powers, k, "noise_powers"))
        object.__setattr__(self, "sinr_targets", _as_positive_vector(self.sinr_targets, k, "sinr_targets"))
        object.__setattr__(self, "fronthaul_caps", _as_positive_vector(self.fronthaul_caps, m, "fronthaul_caps"))
        object.__setattr__(self, "power_budgets", _as_positive_vector(self.power_budgets, m, "power_budgets"))

    @property
    def num_users(self) -> int:
        return self.channels.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class BeamformingDesign:
    """Point design: one beamformer per user plus a compression covariance.

    beamformers      (K, M) complex, row k is v_k
    compression_cov  (M, M) Hermitian PSD within 1e-9
    """

    beamformers: np.ndarray
    compression_cov: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.beamformers, dtype=np.complex128)
        if v.ndim != 2:
            raise ValueError(f"beamformers must be a (K, M) matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("beamformers have non-finite entries")
        q = _check_psd(self.compression_cov, v.shape[1], "compression_cov")
        object.__setattr__(self, "beamformers", v)
        object.__setattr__(self, "compression_cov", q)

    @property
    def num_users(self) -> int:
        return self.beamformers.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.beamformers.shape[1]


@dataclass(frozen=True)
class CovarianceDesign:
    """Lifted design: one transmit covariance per user plus a compression covariance.

    covariances      (K, M, M) stack of Hermitian PSD matrices
    compression_cov  (M, M) Hermitian PSD within 1e-9
    """

    covariances: np.ndarray
    compression_cov: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.covariances, dtype=np.complex128)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError(f"covariances must be a (K, M, M) stack, got shape {v.shape}")
        m = v.shape[1]
        for k in range(v.shape[0]):
            v[k] = _check_psd(v[k], m, f"covariances[{k}]")
        q = _check_psd(self.compression_cov, m, "compression_cov")
        object.__setattr__(self, "covariances", v)
        object.__setattr__(self, "compression_cov", q)

    @property
    def num_users(self) -> int:
        return self.covariances.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.covariances.shape[1]


def _check_psd(a, n: int, name: str) -> np.ndarray:
    a = check_hermitian(a, name=name)
    if a.shape != (n, n):
        raise ValueError(f"{name} must have shape ({n}, {n}), got {a.shape}")
    w = np.linalg.eigvalsh(a)
    tol = 1e-9 * max(1.0, float(w[-1]) if a.size else 0.0)
    if a.size and w[0] < -tol:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return a


def lift_design(design: BeamformingDesign) -> CovarianceDesign:
    """Lift beamformers v_k to rank-one covariances v_k v_k^H."""
    v = design.beamformers
    covs = np.einsum("km,kn->kmn", v, v.conj())
    return CovarianceDesign(covariances=covs, compression_cov=design.compression_cov)


def _covariances(design) -> tuple[np.ndarray, np.ndarray]:
    """Normalize either design flavor to (stack of user covariances, Q)."""
    if isinstance(design, BeamformingDesign):
        design = lift_design(design)
    if not isinstance(design, CovarianceDesign):
        raise TypeError(f"expected a design, got {type(design).__name__}")
    return design.covariances, design.compression_cov


def _check_compatible(instance: NetworkInstance, covs: np.ndarray) -> None:
    if covs.shape[0] != instance.num_users or covs.shape[1] != instance.num_antennas:
        raise ValueError(
            f"design shape {covs.shape[:2]} does not match instance "
            f"(K={instance.num_users}, M={instance.num_antennas})"
        )


def sinr(instance: NetworkInstance, design, k: int) -> float:
    """Received SINR of user ``k`` (0-based) under the design."""
    covs, q = _covariances(design)
    _check_compatible(instance, covs)
    if not 0 <= k < instance.num_users:
        raise IndexError(f"user index {k} out of range for K={instance.num_users}")
    h = instance.channels[k]
    # real quadratic forms h^H X h for every user covariance at once
    quad = np.real(np.einsum("m,kmn,n->k", h.conj(), covs, h))
    signal = quad[k]
    interference = float(quad.sum() - signal)
    compression = float(np.real(h.conj() @ q @ h))
    return signal / (interference + compression + float(instance.noise_powers[k]))


def antenna_power(instance: NetworkInstance, design, m: int) -> float:
    """Transmit power of antenna ``m`` (0-based): sum_k V_k[m,m] + Q[m,m]."""
    covs, q = _covariances(design)
    _check_compatible(instance, covs)
    if not 0 <= m < instance.num_antennas:
        raise IndexError(f"antenna index {m} out of range for M={instance.num_antennas}")
    return float(np.real(covs[:, m, m].sum() + q[m, m]))


def fronthaul_rate(instance: NetworkInstance, design, m: int) -> float:
    """Rate of fronthaul link ``m`` (0-based) in bits.

    The link carries the antenna's total signal-plus-compression power on top
    of the conditional compression noise power, which is the Schur complement
    of the trailing block of Q (the last link sees Q[M-1, M-1] itself).
    """
    covs, q = _covariances(design)
    _check_compatible(instance, covs)
    if not 0 <= m < instance.num_antennas:
        raise IndexError(f"antenna index {m} out of range for M={instance.num_antennas}")
    num = float(np.real(covs[:, m, m].sum() + q[m, m]))
    den = schur_complement_info(q, m).value
    if num <= 0.0:
        return 0.0
    if den <= 0.0:
        return float("inf")
    return float(np.log2(num / den))


def total_power(instance: NetworkInstance, design) -> float:
    """Total transmit power across antennas."""
    covs, q = _covariances(design)
    _check_compatible(instance, covs)
    return float(np.real(np.trace(covs.sum(axis=0)) + np.trace(q)))


def design_objective(design) -> float:
    """Design cost sum_k tr(V_k) + tr(Q) (= sum_k ||v_k||^2 + tr(Q))."""
    covs, q = _covariances(design)
    return float(np.real(np.trace(covs.sum(axis=0)) + np.trace(q)))


@dataclass(frozen=True)
class FeasibilityReport:
    """Constraint slacks of a design; nonnegative slack means satisfied.

    sinr_slack      (K,) sinr_k - target_k
    fronthaul_slack (M,) cap_m - rate_m (bits)
    power_slack     (M,) budget_m - power_m
    tolerance       slack floor used for the verdict
    """

    sinr_slack: np.ndarray
    fronthaul_slack: np.ndarray
    power_slack: np.ndarray
    tolerance: float
    worst_violation: float = field(init=False)

    def __post_init__(self):
        worst = -min(
            float(self.sinr_slack.min()),
            float(self.fronthaul_slack.min()),
            float(self.power_slack.min()),
        )
        object.__setattr__(self, "worst_violation", max(worst, 0.0))

    @property
    def feasible(self) -> bool:
        return self.worst_violation <= self.tolerance


def check_feasibility(instance: NetworkInstance, design, tolerance: float = 1e-6) -> FeasibilityReport:
    """Evaluate every constraint of the design problem and report slacks."""
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")
    covs, _ = _covariances(design)
    _check_compatible(instance, covs)
    k_range = range(instance.num_users)
    m_range = range(instance.num_antennas)
    sinr_slack = np.array([sinr(instance, design, k) - instance.sinr_targets[k] for k in k_range])
    rate_slack = np.array([instance.fronthaul_caps[m] - fronthaul_rate(instance, design, m) for m in m_range])
    power_slack = np.array([instance.power_budgets[m] - antenna_power(instance, design, m) for m in m_range])
    return FeasibilityReport(
        sinr_slack=sinr_slack,
        fronthaul_slack=rate_slack,
        power_slack=power_slack,
        tolerance=tolerance,
    )


# --- JSON serialization -----------------------------------------------------
#
# Complex arrays are stored as nested lists of [re, im] pairs so instances are
# portable across toolchains.


def _complex_to_pairs(a: np.ndarray):
    out = np.stack([a.real, a.imag], axis=-1)
    return out.tolist()


def _pairs_to_complex(data) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    if a.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def instance_to_dict(instance: NetworkInstance) -> dict:
    return {
        "num_antennas": instance.num_antennas,
        "num_users": instance.num_users,
        "channels": _complex_to_pairs(instance.channels),
        "noise_powers": instance.noise_powers.tolist(),
        "sinr_targets": instance.sinr_targets.tolist(),
        "fronthaul_caps": instance.fronthaul_caps.tolist(),
        "power_budgets": instance.power_budgets.tolist(),
    }


def instance_from_dict(data: dict) -> NetworkInstance:
    instance = NetworkInstance(
        channels=_pairs_to_complex(data["channels"]),
        noise_powers=data["noise_powers"],
        sinr_targets=data["sinr_targets"],
        fronthaul_caps=data["fronthaul_caps"],
        power_budgets=data["power_budgets"],
    )
    for key, have in (("num_antennas", instance.num_antennas), ("num_users", instance.num_users)):
        if key in data and int(data[key]) != have:
            raise ValueError(f"{key} field ({data[key]}) disagrees with array shapes ({have})")
    return instance


def save_instance(instance: NetworkInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))


def load_instance(path) -> NetworkInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def design_to_dict(design) -> dict:
    if isinstance(design, BeamformingDesign):
        return {
            "beamformers": _complex_to_pairs(design.beamformers),
            "compression_cov": _complex_to_pairs(design.compression_cov),
        }
    covs, q = _covariances(design)
    return {
        "covariances": _complex_to_pairs(covs),
        "compression_cov": _complex_to_pairs(q),
    }


def design_from_dict(data: dict):
    if "beamformers" in data:
        return BeamformingDesign(
            beamformers=_pairs_to_complex(data["beamformers"]),
            compression_cov=_pairs_to_complex(data["compression_cov"]),
        )
    return CovarianceDesign(
        covariances=_pairs_to_complex(data["covariances"]),
        compression_cov=_pairs_to_complex(data["compression_cov"]),
    )
