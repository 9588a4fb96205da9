"""Rank-one extraction and independent certification."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jbcp.errors import DegenerateUserError
from jbcp.frontend import build_sdr_program, extract_solution
from jbcp.network import (
    CovarianceDesign,
    antenna_power,
    design_objective,
    fronthaul_rate,
    sinr,
)
from jbcp.recovery import certify, extract_beamformers
from jbcp.solver import SolverSettings, solve
from conftest import make_instance, unit_instance


def rank_one_design(rng, k, m, q_scale=0.5):
    """Exactly rank-one covariances with a random PSD compression block."""
    vs = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2)
    covs = np.einsum("ki,kj->kij", vs, vs.conj())
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    q = q_scale * (g @ g.conj().T) / m + 1e-6 * np.eye(m)
    return vs, CovarianceDesign(covariances=covs, compression_cov=q)


@given(seed=st.integers(0, 10_000), k=st.integers(1, 4), m=st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_exact_rank_one_blocks_recover_exactly(seed, k, m):
    rng = np.random.default_rng(seed)
    vs, design = rank_one_design(rng, k, m)
    lifted, diag = extract_beamformers(design)
    assert diag.max_ratio <= 1e-12
    assert diag.extraction_residuals.max() <= 1e-7
    assert diag.is_tight()
    # recovery is exact up to a global phase per user
    for j in range(k):
        assert abs(abs(np.vdot(vs[j], lifted.beamformers[j])) - np.vdot(vs[j], vs[j]).real) <= 1e-9
    assert lifted.compression_cov is design.compression_cov


def test_phase_convention_aligns_with_channel():
    inst = make_instance(seed=21, m=3, k=2)
    rng = np.random.default_rng(21)
    _, design = rank_one_design(rng, 2, 3)
    lifted, _ = extract_beamformers(design, inst)
    for k in range(2):
        ip = complex(np.vdot(inst.channels[k], lifted.beamformers[k]))
        assert ip.imag == pytest.approx(0.0, abs=1e-10)
        assert ip.real >= 0.0


def test_phase_convention_without_instance_leads_real_positive():
    rng = np.random.default_rng(3)
    _, design = rank_one_design(rng, 2, 3)
    lifted, _ = extract_beamformers(design)
    for v in lifted.beamformers:
        lead = v[np.flatnonzero(np.abs(v) > 0)[0]]
        assert lead.imag == pytest.approx(0.0, abs=1e-12)
        assert lead.real > 0.0


def test_mixed_rank_noise_is_measured_not_hidden():
    rng = np.random.default_rng(4)
    vs, design = rank_one_design(rng, 2, 4)
    noisy = design.covariances.copy()
    noise = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    noisy[1] += 0.05 * (noise @ noise.conj().T) / 4
    bumped = CovarianceDesign(covariances=noisy, compression_cov=design.compression_cov)
    _, diag = extract_beamformers(bumped)
    assert diag.eigenvalue_ratios[0] <= 1e-12
    assert diag.eigenvalue_ratios[1] > 1e-3
    assert not diag.is_tight()
    assert diag.extraction_residuals[1] > 1e-3


def test_degenerate_user_raises():
    rng = np.random.default_rng(5)
    _, design = rank_one_design(rng, 2, 3)
    dead = design.covariances.copy()
    dead[1] = 0.0
    with pytest.raises(DegenerateUserError) as exc:
        extract_beamformers(
            CovarianceDesign(covariances=dead, compression_cov=design.compression_cov)
        )
    assert exc.value.user == 1


def test_lifting_preserves_network_metrics():
    # metrics of the extracted vectors equal those of their rank-one lift
    inst = make_instance(seed=6, m=3, k=2)
    rng = np.random.default_rng(6)
    _, design = rank_one_design(rng, 2, 3)
    lifted, _ = extract_beamformers(design, inst)
    for k in range(2):
        assert sinr(inst, lifted, k) == pytest.approx(sinr(inst, design, k), rel=1e-9)
    for m in range(3):
        assert antenna_power(inst, lifted, m) == pytest.approx(
            antenna_power(inst, design, m), rel=1e-9
        )
        assert fronthaul_rate(inst, lifted, m) == pytest.approx(
            fronthaul_rate(inst, design, m), rel=1e-9, abs=1e-12
        )


# --- certification ------------------------------------------------------------------


def test_certify_unit_instance_closed_form():
    prog = build_sdr_program(unit_instance(budget=3.0))
    res = solve(prog, SolverSettings(tolerance=1e-10))
    ex = extract_solution(prog, res)
    lifted, diag = extract_beamformers(ex.design, unit_instance(budget=3.0))
    assert diag.is_tight()
    cert = certify(unit_instance(budget=3.0), lifted, ex.objective_value)
    assert cert.passed
    assert cert.objective_value == pytest.approx(2.0, abs=1e-6)
    assert abs(lifted.beamformers[0, 0]) == pytest.approx(1.0, abs=1e-6)


def test_certify_flags_infeasible_extraction():
    inst = unit_instance(budget=3.0)
    bad = extract_beamformers(
        CovarianceDesign(
            covariances=np.array([[[0.5 + 0j]]]),  # too weak for the SINR target
            compression_cov=np.array([[1.0 + 0j]]),
        )
    )[0]
    cert = certify(inst, bad, reference_objective=2.0)
    assert not cert.report.feasible
    assert not cert.passed


def test_certify_flags_objective_drift():
    inst = unit_instance(budget=3.0)
    prog = build_sdr_program(inst)
    res = solve(prog, SolverSettings(tolerance=1e-10))
    ex = extract_solution(prog, res)
    lifted, _ = extract_beamformers(ex.design, inst)
    cert = certify(inst, lifted, reference_objective=1.0)  # wrong reference
    assert cert.report.feasible
    assert cert.relative_gap == pytest.approx(1.0, abs=1e-3)
    assert not cert.passed


def test_solver_designs_certify_end_to_end():
    for seed, m, k in [(31, 2, 2), (32, 3, 2), (33, 4, 3)]:
        inst = make_instance(seed=seed, m=m, k=k)
        prog = build_sdr_program(inst)
        res = solve(prog, SolverSettings(tolerance=1e-9))
        ex = extract_solution(prog, res)
        lifted, diag = extract_beamformers(ex.design, inst)
        assert diag.is_tight(), (seed, diag.eigenvalue_ratios)
        cert = certify(inst, lifted, ex.objective_value)
        assert cert.passed, (seed, cert.report.worst_violation, cert.relative_gap)
        assert design_objective(lifted) == pytest.approx(ex.objective_value, rel=1e-5)
