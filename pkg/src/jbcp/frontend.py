"""Assembly of the lifted network design problem as a standard cone program.

The lifted problem replaces each beamformer v_k by a Hermitian PSD matrix
V_k, after which every constraint is conic in the stacked real vector
x = (hvec(V_0), ..., hvec(V_{K-1}), hvec(Q)):

  * SINR row per user (scalar, nonnegative slack),
  * one linear matrix inequality per fronthaul link in the trailing
    principal block of Q (the last link degenerates to a scalar row),
  * per-antenna power rows (scalar; omitted from the inner, dualized form),
  * PSD cone membership of every matrix variable.

Rows are normalized per constraint block so the solver sees O(1) data, and
dual multipliers are rescaled back to the original units on extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SolveFailedError
from .linalg import hermitian_unvec, hermitian_vec, hermitianize, hvec_dim
from .network import CovarianceDesign, NetworkInstance

__all__ = [
    "ConeBlock",
    "VariableBlock",
    "ConeProgram",
    "SolutionExtract",
    "build_sdr_program",
    "build_inner_program",
    "reweight_inner",
    "extract_solution",
    "design_to_x",
    "constraint_slacks",
    "program_to_json_dict",
]


@dataclass(frozen=True)
class ConeBlock:
    """One slice of the slack vector together with its cone.

    kind   "nonneg" (size scalar rows) or "psd" (hvec of an order-`order` block)
    label  stable name, e.g. "var:V0", "sinr:2", "fronthaul:0", "papc:3"
    """

    kind: str
    label: str
    offset: int
    size: int
    order: int = 0


@dataclass(frozen=True)
class VariableBlock:
    """Position of one Hermitian matrix variable inside the x vector."""

    name: str
    offset: int
    order: int


@dataclass
class ConeProgram:
    """Standard-form cone program: min c.x  s.t.  A x + s = b, s in K."""

    kind: str  # "sdr" (full problem) or "inner" (power rows dualized away)
    num_vars: int
    objective: np.ndarray
    a_matrix: sp.csr_matrix
    b: np.ndarray
    blocks: list[ConeBlock]
    variables: list[VariableBlock]
    row_scales: np.ndarray
    num_users: int
    num_antennas: int
    _by_label: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_label = {blk.label: blk for blk in self.blocks}

    @property
    def num_rows(self) -> int:
        return self.b.shape[0]

    def block(self, label: str) -> ConeBlock:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"no constraint block labeled {label!r}") from None

    def block_slice(self, label: str) -> slice:
        blk = self.block(label)
        return slice(blk.offset, blk.offset + blk.size)

    def variable_slice(self, name: str) -> slice:
        for vb in self.variables:
            if vb.name == name:
                return slice(vb.offset, vb.offset + hvec_dim(vb.order))
        raise KeyError(f"no variable named {name!r}")


def _pair_index(i: int, j: int, n: int) -> int:
    # row-major position of (i, j), i < j, in the strict upper triangle
    return i * (n - 1) - i * (i - 1) // 2 + (j - i - 1)


def _weighted_trace_objective(num_vars: int, variables: list[VariableBlock], weights: np.ndarray) -> np.ndarray:
    c = np.zeros(num_vars)
    for vb in variables:
        c[vb.offset : vb.offset + vb.order] = weights
    return c


def _check_weights(instance: NetworkInstance, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    if mu.shape != (instance.num_antennas,):
        raise ValueError(f"mu must have length {instance.num_antennas}, got {mu.shape}")
    if not np.all(np.isfinite(mu)) or np.any(mu < 0.0):
        raise ValueError("mu entries must be finite and nonnegative")
    return mu


def _build(instance: NetworkInstance, weights: np.ndarray, include_power_rows: bool, kind: str) -> ConeProgram:
    m_ant, k_users = instance.num_antennas, instance.num_users
    d = hvec_dim(m_ant)
    npairs = m_ant * (m_ant - 1) // 2
    variables = [VariableBlock(f"V{k}", k * d, m_ant) for k in range(k_users)]
    variables.append(VariableBlock("Q", k_users * d, m_ant))
    q_off = k_users * d
    num_vars = (k_users + 1) * d
    diag_cols = [vb.offset for vb in variables]  # diag entry m lives at offset + m

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b_parts: list[np.ndarray] = []
    scale_parts: list[np.ndarray] = []
    blocks: list[ConeBlock] = []
    cursor = 0

    def add_block(kind_, label, order, entries, bvec):
        nonlocal cursor
        size = len(bvec)
        scale = max(abs(v) for (_, _, v) in entries)
        for (r, cidx, v) in entries:
            rows.append(cursor + r)
            cols.append(cidx)
            vals.append(v / scale)
        b_parts.append(np.asarray(bvec, dtype=np.float64) / scale)
        scale_parts.append(np.full(size, scale))
        blocks.append(ConeBlock(kind=kind_, label=label, offset=cursor, size=size, order=order))
        cursor += size

    # PSD membership of every matrix variable:  s = x_block  >=_psd 0
    for vb in variables:
        entries = [(t, vb.offset + t, -1.0) for t in range(d)]
        add_block("psd", f"var:{vb.name}", m_ant, entries, np.zeros(d))

    # SINR rows:  (1/gamma_k) <H_k, V_k> - sum_{j!=k} <H_k, V_j> - <H_k, Q> >= sigma_k^2
    for k in range(k_users):
        h = instance.channels[k]
        hv = hermitian_vec(np.outer(h, h.conj()))
        coef = np.zeros(num_vars)
        for j in range(k_users):
            w = 1.0 / float(instance.sinr_targets[k]) if j == k else -1.0
            coef[j * d : (j + 1) * d] += w * hv
        coef[q_off : q_off + d] -= hv
        entries = [(0, int(c), -float(coef[c])) for c in np.nonzero(coef)[0]]
        add_block("nonneg", f"sinr:{k}", 0, entries, [-float(instance.noise_powers[k])])

    # Fronthaul link m:  2^cap * Q[m:, m:]  >=_psd  (sum_k V_k[m,m] + Q[m,m]) * E00
    # (last link collapses to a scalar row on Q[M-1, M-1])
    for m in range(m_ant):
        order = m_ant - m
        factor = float(2.0 ** instance.fronthaul_caps[m])
        if order == 1:
            entries = [(0, c + m, 1.0) for c in diag_cols]
            entries.append((0, q_off + m, -factor))
            add_block("nonneg", f"fronthaul:{m}", 0, entries, [0.0])
            continue
        entries = []
        for dl in range(order):  # diagonal of the trailing block
            entries.append((dl, q_off + m + dl, -factor))
        for c in diag_cols:  # total antenna-m power hits the (0, 0) slot
            entries.append((0, c + m, 1.0))
        base_re = order
        base_im = order + order * (order - 1) // 2
        for p in range(order):
            for q in range(p + 1, order):
                loc = _pair_index(p, q, order)
                glob = _pair_index(m + p, m + q, m_ant)
                entries.append((base_re + loc, q_off + m_ant + glob, -factor))
                entries.append((base_im + loc, q_off + m_ant + npairs + glob, -factor))
        add_block("psd", f"fronthaul:{m}", order, entries, np.zeros(order * order))

    # Per-antenna power rows:  sum_k V_k[m,m] + Q[m,m] <= budget_m
    if include_power_rows:
        for m in range(m_ant):
            entries = [(0, c + m, 1.0) for c in diag_cols]
            add_block("nonneg", f"papc:{m}", 0, entries, [float(instance.power_budgets[m])])

    a = sp.coo_matrix((vals, (rows, cols)), shape=(cursor, num_vars)).tocsr()
    return ConeProgram(
        kind=kind,
        num_vars=num_vars,
        objective=_weighted_trace_objective(num_vars, variables, weights),
        a_matrix=a,
        b=np.concatenate(b_parts),
        blocks=blocks,
        variables=variables,
        row_scales=np.concatenate(scale_parts),
        num_users=k_users,
        num_antennas=m_ant,
    )


def build_sdr_program(instance: NetworkInstance) -> ConeProgram:
    """Lifted form of the full design problem (power rows included)."""
    return _build(instance, np.ones(instance.num_antennas), True, "sdr")


def build_inner_program(instance: NetworkInstance, mu) -> ConeProgram:
    """Lifted inner problem: power rows dualized into the weighted objective.

    The objective is sum_m (1 + mu_m) * (sum_k V_k[m,m] + Q[m,m]).
    """
    mu = _check_weights(instance, mu)
    return _build(instance, 1.0 + mu, False, "inner")


def reweight_inner(program: ConeProgram, mu) -> None:
    """Swap the multiplier vector of an inner program in place.

    Only the objective changes, so solver factorizations tied to the
    constraint matrix stay valid.
    """
    if program.kind != "inner":
        raise ValueError("reweighting applies to inner programs only")
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    if mu.shape != (program.num_antennas,):
        raise ValueError(f"mu must have length {program.num_antennas}, got {mu.shape}")
    if not np.all(np.isfinite(mu)) or np.any(mu < 0.0):
        raise ValueError("mu entries must be finite and nonnegative")
    program.objective = _weighted_trace_objective(program.num_vars, program.variables, 1.0 + mu)


@dataclass(frozen=True)
class SolutionExtract:
    """Matrices, objective and per-constraint dual multipliers of a solve."""

    design: CovarianceDesign
    objective_value: float
    dual_multipliers: dict


def _clip_psd(a: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(a)
    if w[0] >= -1e-9:
        return a
    w = np.where(w < -1e-9, 0.0, w)
    return hermitianize((u * w) @ u.conj().T)


def extract_solution(program: ConeProgram, result) -> SolutionExtract:
    """Reassemble matrices from a solved program and unscale the duals.

    Eigenvalues of the matrix variables below -1e-9 are clipped to zero so the
    returned design passes PSD validation.  Non-optimal solver statuses are
    propagated as :class:`SolveFailedError`.
    """
    if result.status != "optimal-to-tolerance":
        raise SolveFailedError(f"cannot extract from solver status {result.status!r}", status=result.status)
    x = np.asarray(result.x, dtype=np.float64)
    if x.shape != (program.num_vars,):
        raise ValueError(f"solution length {x.shape} does not match program ({program.num_vars})")
    mats = []
    for vb in program.variables:
        a = hermitian_unvec(x[vb.offset : vb.offset + hvec_dim(vb.order)], vb.order)
        mats.append(_clip_psd(hermitianize(a)))
    design = CovarianceDesign(covariances=np.stack(mats[:-1]), compression_cov=mats[-1])

    y = np.asarray(result.y, dtype=np.float64)
    duals: dict = {}
    for blk in program.blocks:
        seg = y[blk.offset : blk.offset + blk.size] / program.row_scales[blk.offset : blk.offset + blk.size]
        if blk.kind == "psd":
            duals[blk.label] = hermitian_unvec(seg, blk.order)
        else:
            duals[blk.label] = float(seg[0]) if blk.size == 1 else seg
    return SolutionExtract(
        design=design,
        objective_value=float(program.objective @ x),
        dual_multipliers=duals,
    )


def design_to_x(program: ConeProgram, design: CovarianceDesign) -> np.ndarray:
    """Vectorize a design into the program's variable layout."""
    if design.num_users != program.num_users or design.num_antennas != program.num_antennas:
        raise ValueError("design shape does not match program")
    parts = [hermitian_vec(design.covariances[k]) for k in range(design.num_users)]
    parts.append(hermitian_vec(design.compression_cov))
    return np.concatenate(parts)


def constraint_slacks(program: ConeProgram, x: np.ndarray) -> dict:
    """Slack b - A x per block, rescaled to original constraint units.

    Scalar blocks map to floats, PSD blocks to Hermitian slack matrices.
    """
    x = np.asarray(x, dtype=np.float64)
    s = (program.b - program.a_matrix @ x) * program.row_scales
    out: dict = {}
    for blk in program.blocks:
        seg = s[blk.offset : blk.offset + blk.size]
        if blk.kind == "psd":
            out[blk.label] = hermitian_unvec(seg, blk.order)
        else:
            out[blk.label] = float(seg[0]) if blk.size == 1 else seg
    return out


def program_to_json_dict(program: ConeProgram) -> dict:
    """JSON-portable dump of the cone data (COO triplets for A)."""
    coo = program.a_matrix.tocoo()
    return {
        "schema": "jbcp-cone-v1",
        "kind": program.kind,
        "num_vars": program.num_vars,
        "num_rows": program.num_rows,
        "objective": program.objective.tolist(),
        "b": program.b.tolist(),
        "a_matrix": {
            "shape": [int(coo.shape[0]), int(coo.shape[1])],
            "rows": coo.row.tolist(),
            "cols": coo.col.tolist(),
            "values": coo.data.tolist(),
        },
        "blocks": [
            {"kind": blk.kind, "label": blk.label, "offset": blk.offset, "size": blk.size, "order": blk.order}
            for blk in program.blocks
        ],
        "variables": [{"name": vb.name, "offset": vb.offset, "order": vb.order} for vb in program.variables],
        "row_scales": program.row_scales.tolist(),
    }
