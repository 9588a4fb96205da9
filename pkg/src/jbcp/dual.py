"""Projected gradient ascent on the partial Lagrangian dual.

Dualizing only the per-antenna power constraints leaves an inner problem
with SINR and fronthaul constraints whose optimal antenna powers give the
exact dual gradient (Danskin).  The outer loop maximizes the concave dual
with alternating Barzilai-Borwein stepsizes, a Grippo-Lampariello-Lucidi
nonmonotone acceptance test, and projection onto the nonnegative orthant.

Three variants share the loop: "exact" solves every inner problem to a fixed
tight tolerance, "inexact" follows a polynomially tightening tolerance
schedule with warm starts, and "subgradient" takes diminishing steps without
any line search (the classic baseline the other two are measured against).
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InstanceInfeasibleError, LineSearchError, SolveFailedError
from .frontend import (
    SolutionExtract,
    build_inner_program,
    extract_solution,
    reweight_inner,
)
from .network import CovarianceDesign, NetworkInstance
from .solver import INFEASIBLE, OPTIMAL, SolverSettings, SolveResult, Workspace

__all__ = [
    "EXACT",
    "INEXACT",
    "SUBGRADIENT",
    "ALGORITHMS",
    "OptimizerSettings",
    "DualState",
    "TraceRow",
    "DualOutcome",
    "DualEvaluator",
    "project_step",
    "abb_stepsize",
    "gll_accepts",
    "terminated",
    "evaluate_dual",
    "run_dual_ascent",
]

EXACT = "exact"
INEXACT = "inexact"
SUBGRADIENT = "subgradient"
ALGORITHMS = (EXACT, INEXACT, SUBGRADIENT)

CONVERGED = "converged"
MAX_OUTER = "max-outer-iterations"


@dataclass(frozen=True)
class OptimizerSettings:
    """Outer-loop knobs.

    eps_out            termination: unit-step projected gradient residual
    window             nonmonotone reference window length N
    armijo             sufficient-increase fraction theta
    backtrack          stepsize shrink factor rho per rejected trial
    alpha0             first-iteration stepsize (no spectral memory yet)
    alpha_min/max      clipping range for the spectral stepsize
    max_outer          accepted-step budget
    max_backtracks     trial budget per step before giving up
    inner_tolerance    inner KKT tolerance for exact/subgradient variants
    inner_max_iterations  per-evaluation iteration budget; an overshooting
                       line-search trial that cannot certify its value within
                       the budget is rejected rather than solved to the bitter
                       end (reweighting can park the inner problem on a
                       degenerate face where the splitting tails off)
    inexact_a/b        inexact schedule eps_in(i) = a * (i+1)**(-b)
    subgradient_decay  diminishing-step exponent for the baseline
    mu_cap             divergence guard: a committed multiplier reaching this
                       bound means the dual is climbing without limit, i.e.
                       some power budget is unattainable and the primal is
                       infeasible; line-search trials beyond it are skipped
    """

    eps_out: float = 1e-3
    window: int = 10
    armijo: float = 1e-4
    backtrack: float = 0.25
    alpha0: float = 300.0
    alpha_min: float = 1e-4
    alpha_max: float = 1e12
    max_outer: int = 500
    max_backtracks: int = 60
    inner_tolerance: float = 1e-8
    inner_max_iterations: int = 20_000
    inexact_a: float = 1e-3
    inexact_b: float = 2.0
    subgradient_decay: float = 0.1
    mu_cap: float = 1e7

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("need 0 < alpha_min < alpha_max")
        if self.eps_out <= 0 or self.inner_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.inner_max_iterations < 1:
            raise ValueError("inner_max_iterations must be at least 1")


@dataclass
class DualState:
    """One-step memory of the ascent: current point plus spectral history."""

    mu: np.ndarray
    value: float
    gradient: np.ndarray
    value_window: Sequence[float]
    prev_mu: np.ndarray | None = None
    prev_gradient: np.ndarray | None = None
    alpha: float = 0.0
    iteration: int = 0


@dataclass(frozen=True)
class TraceRow:
    """One outer iteration of the ascent; row 0 is the initial evaluation."""

    iteration: int
    value: float
    projected_residual: float
    lam: float
    alpha: float
    inner_iterations: int
    cumulative_seconds: float


@dataclass(frozen=True)
class DualOutcome:
    """Final point, per-iteration trace, and the recovered covariance design."""

    algorithm: str
    status: str
    mu: np.ndarray
    value: float
    gradient: np.ndarray
    projected_residual: float
    iterations: int
    total_inner_iterations: int
    trace: tuple[TraceRow, ...]
    design: CovarianceDesign
    extract: SolutionExtract

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def project_step(mu: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Componentwise [mu + direction]_+ ."""
    return np.maximum(np.asarray(mu, dtype=np.float64) + direction, 0.0)


def terminated(mu: np.ndarray, gradient: np.ndarray, eps_out: float) -> bool:
    """Unit-step projected gradient residual test.

    Negative gradient components at an active bound are screened out by the
    projection, so boundary points with inward-pointing gradients count as
    stationary.
    """
    return projected_residual(mu, gradient) <= eps_out


def projected_residual(mu: np.ndarray, gradient: np.ndarray) -> float:
    return float(np.linalg.norm(project_step(mu, gradient) - mu))


def abb_stepsize(state: DualState, alpha_min: float, alpha_max: float) -> float:
    """Alternating Barzilai-Borwein stepsize with safeguard clipping.

    Even iterations use |dmu|^2 / |dmu.dg|, odd ones |dmu.dg| / |dg|^2, with
    dg = g_prev - g_current (positive curvature pairing for a concave
    objective).  A vanishing denominator means the BB step is unbounded;
    return alpha_max and let the clip handle it.
    """
    if state.prev_mu is None or state.prev_gradient is None:
        raise ValueError("spectral stepsize needs one accepted step of memory")
    dmu = state.mu - state.prev_mu
    dg = state.prev_gradient - state.gradient
    cross = abs(float(dmu @ dg))
    if state.iteration % 2 == 0:
        alpha = float(dmu @ dmu) / cross if cross > 0 else alpha_max
    else:
        norm_dg = float(dg @ dg)
        alpha = cross / norm_dg if norm_dg > 0 else alpha_max
    return float(min(max(alpha, alpha_min), alpha_max))


def gll_accepts(
    f_new: float,
    value_window: Sequence[float],
    gradient: np.ndarray,
    step: np.ndarray,
    armijo: float,
) -> bool:
    """Nonmonotone sufficient-increase test against the worst recent value."""
    reference = min(value_window)
    return f_new >= reference + armijo * float(gradient @ step)


class _Evaluation:
    """One inner solve: dual value, gradient, and the raw solve result."""

    __slots__ = ("mu", "value", "gradient", "powers", "result")

    def __init__(self, mu, value, gradient, powers, result):
        self.mu = mu
        self.value = value
        self.gradient = gradient
        self.powers = powers
        self.result = result


class DualEvaluator:
    """Caches the inner cone program and warm starts across evaluations.

    The constraint matrix never changes with mu, so one workspace
    (factorization, cone maps) serves every evaluation; only the objective is
    reweighted.  Warm starts always come from the last *committed* solution,
    so rejected line-search trials cannot degrade the base point.
    """

    def __init__(self, instance: NetworkInstance, max_iterations: int = 100_000):
        self.instance = instance
        self.program = build_inner_program(instance, np.zeros(instance.num_antennas))
        self.workspace = Workspace(self.program)
        self.max_iterations = max_iterations
        self.total_inner_iterations = 0
        self._base: tuple | None = None
        m, k = instance.num_antennas, instance.num_users
        power_map = np.zeros((m, self.program.num_vars))
        for user in range(k):
            sl = self.program.variable_slice(f"V{user}")
            power_map[np.arange(m), sl.start + np.arange(m)] = 1.0
        sl = self.program.variable_slice("Q")
        power_map[np.arange(m), sl.start + np.arange(m)] = 1.0
        self._power_map = power_map

    def evaluate(self, mu: np.ndarray, tolerance: float) -> _Evaluation:
        mu = np.asarray(mu, dtype=np.float64)
        reweight_inner(self.program, mu)
        self.workspace.set_objective(self.program.objective)
        result = self.workspace.solve(
            SolverSettings(
                tolerance=tolerance,
                max_iterations=self.max_iterations,
                warm_start=self._base,
            )
        )
        self.total_inner_iterations += result.iterations
        if result.status == INFEASIBLE:
            raise InstanceInfeasibleError(
                "inner problem infeasible: no design meets the SINR and "
                "fronthaul constraints regardless of power budgets"
            )
        if result.status != OPTIMAL:
            raise SolveFailedError(
                f"inner solve did not reach tolerance {tolerance:g}",
                status=result.status,
            )
        powers = self._power_map @ result.x
        budgets = self.instance.power_budgets
        value = float(self.program.objective @ result.x) - float(mu @ budgets)
        gradient = powers - budgets
        return _Evaluation(mu, value, gradient, powers, result)

    def commit(self, evaluation: _Evaluation) -> None:
        res = evaluation.result
        self._base = (res.x, res.y, res.s)


def evaluate_dual(
    instance: NetworkInstance, mu, inner_tolerance: float = 1e-8
) -> tuple[float, np.ndarray, CovarianceDesign]:
    """Dual value f(mu), gradient, and the inner minimizer's design."""
    evaluator = DualEvaluator(instance)
    ev = evaluator.evaluate(np.asarray(mu, dtype=np.float64), inner_tolerance)
    extract = extract_solution(evaluator.program, ev.result)
    return ev.value, ev.gradient, extract.design


def _inner_tolerance(settings: OptimizerSettings, algorithm: str, iteration: int) -> float:
    if algorithm == INEXACT:
        sched = settings.inexact_a * (iteration + 1) ** (-settings.inexact_b)
        return max(sched, 1e-9)
    return settings.inner_tolerance




def run_dual_ascent(
    instance: NetworkInstance,
    algorithm: str = EXACT,
    settings: OptimizerSettings | None = None,
) -> DualOutcome:
    """Maximize the partial dual from mu = 0; see the module docstring."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    settings = settings or OptimizerSettings()
    evaluator = DualEvaluator(instance, settings.inner_max_iterations)
    t0 = time.perf_counter()

    current = evaluator.evaluate(np.zeros(instance.num_antennas), _inner_tolerance(settings, algorithm, 0))
    evaluator.commit(current)
    window: deque[float] = deque([current.value], maxlen=settings.window)
    residual = projected_residual(current.mu, current.gradient)
    trace: list[TraceRow] = [
        TraceRow(0, current.value, residual, 1.0, 0.0,
                 current.result.iterations, time.perf_counter() - t0)
    ]
    prev_mu: np.ndarray | None = None
    prev_gradient: np.ndarray | None = None
    status = MAX_OUTER
    steps = 0

    for i in range(settings.max_outer):
        if residual <= settings.eps_out:
            status = CONVERGED
            break
        if float(np.max(current.mu, initial=0.0)) >= 0.999 * settings.mu_cap:
            raise InstanceInfeasibleError(
                "dual ascent diverged: a multiplier reached the guard value "
                f"{settings.mu_cap:g} without stationarity, so some power "
                "budget is unattainable"
            )
        tolerance = _inner_tolerance(settings, algorithm, i)

        spent_before = evaluator.total_inner_iterations
        if algorithm == SUBGRADIENT:
            alpha = settings.alpha0 * (i + 1) ** (-settings.subgradient_decay)
            lam = 1.0
            trial_mu = project_step(current.mu, alpha * current.gradient)
            accepted = evaluator.evaluate(trial_mu, tolerance)
        else:
            if i == 0:
                alpha = settings.alpha0
            else:
                state = DualState(
                    mu=current.mu, value=current.value, gradient=current.gradient,
                    value_window=tuple(window), prev_mu=prev_mu,
                    prev_gradient=prev_gradient, iteration=i,
                )
                alpha = abb_stepsize(state, settings.alpha_min, settings.alpha_max)
            accepted = None
            for attempt in range(2):
                lam = 1.0
                for _ in range(settings.max_backtracks + 1):
                    trial_mu = project_step(current.mu, lam * alpha * current.gradient)
                    if float(np.max(trial_mu, initial=0.0)) > settings.mu_cap:
                        lam *= settings.backtrack  # out of bounds, skip the solve
                        continue
                    try:
                        trial = evaluator.evaluate(trial_mu, tolerance)
                    except SolveFailedError:
                        # value not certified within the budget -> unusable for
                        # the acceptance test; shrink the step instead of failing
                        lam *= settings.backtrack
                        continue
                    if gll_accepts(trial.value, window, current.gradient,
                                   trial_mu - current.mu, settings.armijo):
                        accepted = trial
                        break
                    lam *= settings.backtrack
                if accepted is not None or attempt == 1:
                    break
                # window entries were certified at earlier (looser) tolerances,
                # so the acceptance threshold can sit above the true dual value
                # and no step beats it; re-certify the incumbent two decades
                # tighter, restart the window from that value, and retry once
                tolerance = max(0.01 * tolerance, 1e-9)
                try:
                    current = evaluator.evaluate(current.mu, tolerance)
                except SolveFailedError:
                    break
                evaluator.commit(current)
                window.clear()
                window.append(current.value)
            if accepted is None:
                raise LineSearchError(
                    f"no acceptable step after {settings.max_backtracks} "
                    "backtracks; gradient may be stale relative to the inner "
                    "tolerance",
                    trace=tuple(trace),
                    mu=current.mu.copy(),
                )
        spent = evaluator.total_inner_iterations - spent_before

        evaluator.commit(accepted)
        prev_mu, prev_gradient = current.mu, current.gradient
        current = accepted
        steps += 1
        window.append(current.value)
        residual = projected_residual(current.mu, current.gradient)
        trace.append(
            TraceRow(steps, current.value, residual, lam, alpha, spent,
                     time.perf_counter() - t0)
        )
    else:
        if residual <= settings.eps_out:
            status = CONVERGED

    if algorithm == INEXACT:
        # the schedule may leave the final inner solve loose; refine at the
        # final multiplier so the returned design is deploy-quality
        try:
            refined = evaluator.evaluate(current.mu, settings.inner_tolerance)
        except SolveFailedError:
            refined = None  # keep the coarse evaluation
        if refined is not None:
            evaluator.commit(refined)
            current = refined
            residual = projected_residual(current.mu, current.gradient)

    reweight_inner(evaluator.program, current.mu)
    extract = extract_solution(evaluator.program, current.result)
    return DualOutcome(
        algorithm=algorithm,
        status=status,
        mu=current.mu,
        value=current.value,
        gradient=current.gradient,
        projected_residual=residual,
        iterations=steps,
        total_inner_iterations=evaluator.total_inner_iterations,
        trace=tuple(trace),
        design=extract.design,
        extract=extract,
    )
