"""Oracle solver and cross-check tests.

The last test is the point of the package: it hands the same 20 instance
files to the main toolkit (through its command line only) and to the oracle,
then requires every comparison to pass at the shipping tolerance.
"""

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from jbcp_oracle import (
    INFEASIBLE,
    SOLVED,
    OracleResult,
    compare,
    load_result,
    oracle_solve,
    save_result,
)
from jbcp_oracle.cli import main as oracle_main


def write_instance(path, channels, noise, targets, caps, budgets):
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    k, m = channels.shape
    payload = {
        "num_antennas": m,
        "num_users": k,
        "channels": np.stack([channels.real, channels.imag], axis=-1).tolist(),
        "noise_powers": list(noise),
        "sinr_targets": list(targets),
        "fronthaul_caps": list(caps),
        "power_budgets": list(budgets),
    }
    Path(path).write_text(json.dumps(payload))


def random_instance_file(path, seed, m, k, gamma=0.3, cap=2.5, budget=6.0):
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2.0)
    write_instance(path, h, [1.0] * k, [gamma] * k, [cap] * m, [budget] * m)


def write_primary_result(path, verdict, objective):
    Path(path).write_text(
        json.dumps(
            {
                "schema": "jbcp-result-v1",
                "instance_id": "t",
                "algorithm": "sdr",
                "gamma": 0.3,
                "objective": objective,
                "outer_iterations": 0,
                "total_inner_iterations": 0,
                "wall_seconds": 0.0,
                "feasibility_verdict": verdict,
                "tightness_ratio": 0.0,
                "active_papc": [],
            }
        )
    )


def test_single_link_closed_form(tmp_path):
    # h = 1, sigma^2 = 1, gamma = 0.5, cap = 1: both constraints tighten to
    # p = q = 1, objective exactly 2
    inst = tmp_path / "unit.json"
    write_instance(inst, [[1.0]], [1.0], [0.5], [1.0], [2.0])
    result = oracle_solve(inst)
    assert result.status == SOLVED
    assert result.objective == pytest.approx(2.0, abs=1e-6)
    assert result.max_ratio <= 1e-9


def test_unreachable_sinr_is_infeasible(tmp_path):
    # rate cap admits at most (2^cap - 1) = 0.4 units of signal per unit of
    # compression noise, far below the target of 3
    inst = tmp_path / "unreachable.json"
    write_instance(inst, [[1.0]], [1.0], [3.0], [math.log2(1.4)], [100.0])
    result = oracle_solve(inst)
    assert result.status == INFEASIBLE
    assert result.objective is None


def test_result_round_trip(tmp_path):
    out = tmp_path / "result.json"
    original = OracleResult(SOLVED, 2.5, (1e-9, 3e-8), "CLARABEL", 0.125)
    save_result(original, out)
    assert load_result(out) == original


def test_compare_passes_on_agreement(tmp_path):
    p, o = tmp_path / "p.json", tmp_path / "o.json"
    write_primary_result(p, "feasible", 2.0000004)
    save_result(OracleResult(SOLVED, 2.0, (1e-8,), "CLARABEL", 0.1), o)
    report = compare(p, o)
    assert report.passed
    assert report.relative_gap <= 1e-3


def test_compare_fails_on_objective_gap(tmp_path):
    p, o = tmp_path / "p.json", tmp_path / "o.json"
    write_primary_result(p, "feasible", 2.1)
    save_result(OracleResult(SOLVED, 2.0, (1e-8,), "CLARABEL", 0.1), o)
    report = compare(p, o)
    assert not report.passed
    assert "gap" in report.reason


def test_compare_fails_when_covariance_not_rank_one(tmp_path):
    p, o = tmp_path / "p.json", tmp_path / "o.json"
    write_primary_result(p, "feasible", 2.0)
    save_result(OracleResult(SOLVED, 2.0, (0.5,), "CLARABEL", 0.1), o)
    report = compare(p, o)
    assert not report.passed
    assert "rank one" in report.reason


def test_compare_passes_when_both_infeasible(tmp_path):
    p, o = tmp_path / "p.json", tmp_path / "o.json"
    write_primary_result(p, "infeasible", float("nan"))
    save_result(OracleResult(INFEASIBLE, None, (), "CLARABEL", 0.1), o)
    assert compare(p, o).passed


def test_compare_fails_on_status_mismatch(tmp_path):
    p, o = tmp_path / "p.json", tmp_path / "o.json"
    write_primary_result(p, "feasible", 2.0)
    save_result(OracleResult(INFEASIBLE, None, (), "CLARABEL", 0.1), o)
    assert not compare(p, o).passed

    write_primary_result(p, "infeasible", float("nan"))
    save_result(OracleResult(SOLVED, 2.0, (1e-8,), "CLARABEL", 0.1), o)
    assert not compare(p, o).passed


def test_cli_solve_and_compare(tmp_path, capsys):
    inst = tmp_path / "unit.json"
    write_instance(inst, [[1.0]], [1.0], [0.5], [1.0], [2.0])
    out = tmp_path / "oracle.json"
    assert oracle_main(["solve", str(inst), "--out", str(out)]) == 0
    assert "solved" in capsys.readouterr().out
    assert load_result(out).status == SOLVED

    primary = tmp_path / "primary.json"
    write_primary_result(primary, "feasible", 2.0)
    assert oracle_main(["compare", str(primary), str(out)]) == 0
    assert "PASS" in capsys.readouterr().out

    bad = tmp_path / "bad.json"
    write_primary_result(bad, "feasible", 3.0)
    assert oracle_main(["compare", str(bad), str(out)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_solve_reports_infeasible_with_nonzero_exit(tmp_path, capsys):
    inst = tmp_path / "unreachable.json"
    write_instance(inst, [[1.0]], [1.0], [3.0], [math.log2(1.4)], [100.0])
    assert oracle_main(["solve", str(inst)]) == 1
    assert "infeasible" in capsys.readouterr().out


def test_cross_validation_against_main_toolkit(tmp_path):
    """Twenty shared instances; every solver-vs-oracle comparison must pass.

    The main toolkit is exercised strictly through its command line and the
    shared JSON files, the way an external consumer would drive it.
    """
    combos = [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (4, 3)]
    gaps, ratios = [], []
    for i in range(20):
        m, k = combos[i % len(combos)]
        inst = tmp_path / f"inst{i:02d}.json"
        random_instance_file(inst, seed=200 + i, m=m, k=k)

        primary = tmp_path / f"primary{i:02d}.json"
        proc = subprocess.run(
            [sys.executable, "-m", "jbcp.cli", "solve", str(inst), "--algo", "sdr",
             "--out", str(primary)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, f"solver CLI failed on instance {i}: {proc.stderr}"

        oracle_out = tmp_path / f"oracle{i:02d}.json"
        save_result(oracle_solve(inst), oracle_out)

        report = compare(primary, oracle_out, rtol=1e-3)
        assert report.passed, f"instance {i}: {report.reason}"
        gaps.append(report.relative_gap)
        ratios.append(report.oracle_max_ratio)
    print(
        f"\ncross-validation: 20/20 comparisons passed, "
        f"max gap {max(gaps):.3e} (rtol 1e-3), max oracle ratio {max(ratios):.3e}"
    )
