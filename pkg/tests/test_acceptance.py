"""End-to-end acceptance runs binding the whole toolkit together.

Every test here exercises a full pipeline (instance -> cone program -> solve
-> dual ascent -> extraction -> certification) at desk scale and gates a
quantitative property: oracle agreement between the ascent and a direct tight
solve, tightness of the relaxation, gradient correctness against finite
differences, convergence-band entry at the reference scale, activity of a
starved power budget, algorithm-variant agreement, the expected slowness of
the fixed-schedule subgradient baseline, duality invariants, and a single-link
closed form.  Each test prints one summary line with the measured quantities;
run with ``-v`` to get one pass/fail line per property.

The small-instance families use loose targets and generous caps so strict
feasibility is guaranteed with a wide margin; the starved families pin one
antenna's budget below its unconstrained power so the dual has a nontrivial
maximizer.  All seeds are fixed: every number below is reproducible bit for
bit on one machine.
"""

import time

import numpy as np
import pytest

from jbcp.bench import generate_instance, reference_config
from jbcp.dual import (
    EXACT,
    INEXACT,
    SUBGRADIENT,
    OptimizerSettings,
    evaluate_dual,
    run_dual_ascent,
)
from jbcp.frontend import build_inner_program, build_sdr_program, extract_solution
from jbcp.network import NetworkInstance, antenna_power
from jbcp.recovery import certify, extract_beamformers
from jbcp.solver import OPTIMAL, SolverSettings, solve
from conftest import make_instance, unit_instance

# (M, K) cycle for the randomized small-instance families
COMBOS = [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (4, 3)]


def small_family(seed0, count, **kw):
    return [
        make_instance(seed=seed0 + i, m=COMBOS[i % 6][0], k=COMBOS[i % 6][1], **kw)
        for i in range(count)
    ]


def starved_family(seed0, count, frac=0.25):
    # antenna 0 capped at a fraction of its unconstrained power, so mu*_0 > 0
    # on every draw and the curvature the ascent sees is comparable across
    # seeds; the loose second budget keeps every instance strictly feasible
    # (power can always shift to the other antenna)
    out = []
    for i in range(count):
        loose = make_instance(seed=seed0 + i, m=2, k=2, gamma=0.5, cap=2.5, budget=50.0)
        _, _, design = evaluate_dual(loose, np.zeros(2), inner_tolerance=1e-8)
        starved_budget = frac * antenna_power(loose, design, 0)
        out.append(
            NetworkInstance(
                channels=loose.channels,
                noise_powers=loose.noise_powers,
                sinr_targets=loose.sinr_targets,
                fronthaul_caps=loose.fronthaul_caps,
                power_budgets=np.array([starved_budget, 50.0]),
            )
        )
    return out


def band_entry(trace, f_star):
    """First outer iteration whose dual value is within 1% of f_star."""
    band = 1e-2 * max(1.0, abs(f_star))
    for row in trace:
        if abs(row.value - f_star) <= band:
            return row.iteration
    return None


# --- small-scale oracle agreement and tightness -----------------------------------


@pytest.fixture(scope="module")
def small_batch():
    """Fifty loose instances: exact ascent, direct tight solve, extraction."""
    rows = []
    t0 = time.perf_counter()
    for inst in small_family(200, 50, gamma=0.3, cap=2.5, budget=6.0):
        out = run_dual_ascent(inst, EXACT, OptimizerSettings(max_outer=200))
        prog = build_sdr_program(inst)
        res = solve(prog, SolverSettings(tolerance=1e-9))
        assert res.status == OPTIMAL
        ext = extract_solution(prog, res)
        beams, diag = extract_beamformers(ext.design, inst)
        rows.append((inst, out, ext, beams, diag))
    return rows, time.perf_counter() - t0


def test_ascent_agrees_with_direct_solve_on_small_instances(small_batch):
    rows, elapsed = small_batch
    gaps = [
        abs(out.value - ext.objective_value) / max(1.0, abs(ext.objective_value))
        for _, out, ext, _, _ in rows
    ]
    assert all(out.converged for _, out, _, _, _ in rows)
    assert max(gaps) <= 1e-3
    assert elapsed < 120.0
    print(f"acceptance: ascent vs direct on {len(rows)} instances: "
          f"worst rel gap {max(gaps):.2e}, {elapsed:.1f}s")


def test_direct_solutions_extract_rank_one_and_refeasible(small_batch):
    rows, _ = small_batch
    ratios = [diag.max_ratio for _, _, _, _, diag in rows]
    for inst, _, ext, beams, _ in rows:
        cert = certify(inst, beams, ext.objective_value, tolerance=1e-6)
        assert cert.report.feasible
        assert cert.passed
    assert max(ratios) <= 1e-4
    print(f"acceptance: extraction on {len(rows)} instances: "
          f"worst eigenvalue ratio {max(ratios):.2e}, all certified at 1e-6")


# --- gradient correctness -----------------------------------------------------------


def test_gradient_matches_central_differences():
    # ten strictly interior multipliers spread over five instances; the
    # analytic gradient is the power-budget slack of the inner minimizer
    rng = np.random.default_rng(7)
    worst = 0.0
    checked = 0
    for j in range(5):
        m, k = COMBOS[j % 6]
        inst = make_instance(seed=300 + j, m=m, k=k, gamma=0.3, cap=2.5, budget=6.0)
        for _ in range(2):
            mu = rng.uniform(0.05, 0.5, size=m)
            _, grad, _ = evaluate_dual(inst, mu, inner_tolerance=1e-8)
            step = 1e-4
            for mm in range(m):
                bump = np.zeros(m)
                bump[mm] = step
                up, _, _ = evaluate_dual(inst, mu + bump, inner_tolerance=1e-8)
                down, _, _ = evaluate_dual(inst, mu - bump, inner_tolerance=1e-8)
                fd = (up - down) / (2.0 * step)
                worst = max(worst, abs(grad[mm] - fd) / max(1e-8, abs(fd)))
                checked += 1
    assert worst <= 1e-2
    print(f"acceptance: gradient vs central differences, {checked} components: "
          f"worst rel err {worst:.2e}")


# --- reference-scale convergence ----------------------------------------------------


@pytest.fixture(scope="module")
def reference_runs():
    """One 8-antenna 10-user draw: tight direct solve, exact and inexact ascent."""
    inst = generate_instance(reference_config(), seed=0, gamma=0.06)
    t0 = time.perf_counter()
    prog = build_sdr_program(inst)
    direct = solve(prog, SolverSettings(
        tolerance=3e-5, max_iterations=60_000, sigma=1000.0,
        auto_scale=False, polish=False,
    ))
    assert direct.status == OPTIMAL
    f_star = float(prog.objective @ direct.x)
    exact = run_dual_ascent(inst, EXACT, OptimizerSettings(eps_out=1e-5, max_outer=100))
    inexact = run_dual_ascent(inst, INEXACT, OptimizerSettings(max_outer=200))
    return inst, f_star, exact, inexact, time.perf_counter() - t0


def test_reference_scale_ascent_enters_the_band(reference_runs):
    _, f_star, exact, inexact, elapsed = reference_runs
    hit_exact = band_entry(exact.trace, f_star)
    hit_inexact = band_entry(inexact.trace, f_star)
    assert hit_exact is not None and hit_exact <= 20
    assert hit_inexact is not None and hit_inexact <= 60
    assert elapsed < 600.0
    print(f"acceptance: reference-scale band entry: exact at outer {hit_exact} "
          f"(<=20), inexact at outer {hit_inexact} (<=60), f*={f_star:.6f}, "
          f"{elapsed:.0f}s total")


def test_starved_antenna_budget_is_active_at_reference_scale(reference_runs):
    inst, _, exact, _, _ = reference_runs
    cap = float(inst.power_budgets[0])
    power = antenna_power(inst, exact.design, 0)
    assert exact.mu[0] > 0.0
    assert abs(power - cap) <= 1e-5
    print(f"acceptance: starved budget active: antenna-0 power {power:.7f} vs "
          f"budget {cap:.7f} (|diff| {abs(power - cap):.2e}), mu_0 = {exact.mu[0]:.2f}")


# --- exact/inexact agreement across reference-scale draws --------------------------


def test_exact_and_inexact_reach_the_same_value_across_draws():
    # twenty fading draws at the reference scale; the inexact schedule should
    # match the exact optimum while spending fewer inner iterations most of
    # the time
    config = reference_config()
    settings = OptimizerSettings(max_outer=200)
    gaps, cheaper = [], 0
    t0 = time.perf_counter()
    for seed in range(1, 21):
        inst = generate_instance(config, seed=seed, gamma=0.04)
        exact = run_dual_ascent(inst, EXACT, settings)
        inexact = run_dual_ascent(inst, INEXACT, settings)
        gaps.append(abs(exact.value - inexact.value) / max(1.0, abs(exact.value)))
        cheaper += inexact.total_inner_iterations <= exact.total_inner_iterations
    assert max(gaps) <= 1e-3
    assert cheaper >= 14  # at least 70% of the draws
    print(f"acceptance: exact vs inexact over 20 draws: worst rel gap "
          f"{max(gaps):.2e}, inexact cheaper on {cheaper}/20, "
          f"{time.perf_counter() - t0:.0f}s")


# --- subgradient baseline ordering --------------------------------------------------


def test_subgradient_baseline_needs_twice_the_outer_iterations():
    # the fixed diminishing schedule has no curvature adaptation, so it should
    # be at least 2x slower in outer iterations than the spectral-step variant
    # while agreeing on the value
    settings = OptimizerSettings(alpha0=30.0, eps_out=1e-3, max_outer=500)
    outer_exact, outer_sub, gaps = [], [], []
    for inst in starved_family(101, 20):
        exact = run_dual_ascent(inst, EXACT, settings)
        sub = run_dual_ascent(inst, SUBGRADIENT, settings)
        assert exact.converged and sub.converged
        outer_exact.append(exact.iterations)
        outer_sub.append(sub.iterations)
        gaps.append(abs(exact.value - sub.value) / max(1.0, abs(exact.value)))
    med_exact = float(np.median(outer_exact))
    med_sub = float(np.median(outer_sub))
    assert max(gaps) <= 1e-3
    assert med_sub >= 2.0 * med_exact
    print(f"acceptance: subgradient ordering: median outers {med_sub:.0f} vs "
          f"{med_exact:.0f} (ratio {med_sub / med_exact:.1f}x), worst rel gap "
          f"{max(gaps):.2e}")


# --- duality invariants --------------------------------------------------------------


def test_weak_duality_and_complementary_slackness():
    worst_excess, worst_cs = -np.inf, 0.0
    for inst in starved_family(101, 5):
        prog = build_sdr_program(inst)
        res = solve(prog, SolverSettings(tolerance=1e-10))
        assert res.status == OPTIMAL
        p_star = float(prog.objective @ res.x)
        out = run_dual_ascent(
            inst, EXACT, OptimizerSettings(alpha0=30.0, eps_out=1e-6, max_outer=500)
        )
        assert out.converged
        # every dual value along the ascent lies below the primal optimum
        worst_excess = max(worst_excess, max(row.value - p_star for row in out.trace))
        # at convergence each multiplier vanishes unless its budget is tight
        for m in range(inst.num_antennas):
            slack = abs(inst.power_budgets[m] - antenna_power(inst, out.design, m))
            worst_cs = max(worst_cs, out.mu[m] * slack / inst.power_budgets[m])
    assert worst_excess <= 1e-6
    assert worst_cs <= 1e-3
    print(f"acceptance: duality invariants on 5 starved instances: worst trace "
          f"excess {worst_excess:+.2e} (<=1e-6), worst scaled CS product "
          f"{worst_cs:.2e} (<=1e-3)")


# --- single-link closed form ---------------------------------------------------------


def test_single_link_closed_form_roundtrip():
    # h = 1, noise 1, target 0.5, cap 1: both constraints active at p = q = 1,
    # objective 2; the lone multiplier stays at zero for budget 2
    inst = unit_instance(budget=2.0, gamma=0.5, cap=1.0)

    prog = build_inner_program(inst, np.zeros(1))
    res = solve(prog, SolverSettings(tolerance=1e-10))
    assert res.status == OPTIMAL
    ext = extract_solution(prog, res)
    p = float(np.real(ext.design.covariances[0, 0, 0]))
    q = float(np.real(ext.design.compression_cov[0, 0]))
    assert p == pytest.approx(1.0, abs=1e-6)
    assert q == pytest.approx(1.0, abs=1e-6)
    assert ext.objective_value == pytest.approx(2.0, abs=1e-6)

    beams, diag = extract_beamformers(ext.design, inst)
    assert abs(beams.beamformers[0, 0]) == pytest.approx(1.0, abs=1e-6)
    assert diag.max_ratio == 0.0
    cert = certify(inst, beams, 2.0, tolerance=1e-6)
    assert cert.passed

    full = run_dual_ascent(inst, EXACT, OptimizerSettings(eps_out=1e-8))
    assert full.converged
    assert full.value == pytest.approx(2.0, abs=1e-6)
    assert full.mu[0] == 0.0
    print(f"acceptance: single-link closed form: p={p:.8f} q={q:.8f} "
          f"objective {ext.objective_value:.8f} (target 2), extraction exact")
