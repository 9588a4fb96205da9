"""Shared instance factories for the test suite."""

import numpy as np
import pytest

from jbcp.network import NetworkInstance


def rayleigh_channels(rng, k, m):
    return (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2.0)


def make_instance(seed=0, m=2, k=2, gamma=0.5, cap=1.0, budget=4.0, noise=1.0):
    """Random instance with loose parameters (strictly feasible w.h.p.).

    budget may be a scalar (uniform) or a length-m vector, e.g. to starve one
    antenna so its power constraint binds.
    """
    rng = np.random.default_rng(seed)
    budgets = np.broadcast_to(np.asarray(budget, dtype=np.float64), (m,)).copy()
    return NetworkInstance(
        channels=rayleigh_channels(rng, k, m),
        noise_powers=np.full(k, float(noise)),
        sinr_targets=np.full(k, float(gamma)),
        fronthaul_caps=np.full(m, float(cap)),
        power_budgets=budgets,
    )


def unit_instance(budget=2.0, gamma=0.5, cap=1.0):
    """Single-antenna single-user instance with h = 1, sigma^2 = 1.

    For gamma = 0.5, cap = 1 the optimum is p = q = 1 with objective 2:
    the active SINR constraint gives p = gamma * (1 + q) and the active
    fronthaul constraint gives p = (2^cap - 1) * q, so p = q = 1 exactly.
    """
    return NetworkInstance(
        channels=np.array([[1.0 + 0.0j]]),
        noise_powers=np.array([1.0]),
        sinr_targets=np.array([float(gamma)]),
        fronthaul_caps=np.array([float(cap)]),
        power_budgets=np.array([float(budget)]),
    )


@pytest.fixture
def small_instance():
    return make_instance(seed=7, m=2, k=2)
