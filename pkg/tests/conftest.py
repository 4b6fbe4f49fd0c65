"""Shared fixtures: the reference run and its linear twin, built once.

The reference configuration (gaussian bump, amplitude 2, width 1, p = 3,
dx = 0.02, cfl = 0.5, symmetric span [-64, 64]) backs the ray-flux,
pointwise-inequality, parallelogram, and decay acceptance tests.
"""

import time

import numpy as np
import pytest

from nlwave.fields import ModelParams, Profile
from nlwave.harness import ExperimentConfig, simulate
from nlwave.kernels import BACKEND

REFERENCE_PROFILE = Profile("gaussian", amplitude=2.0, center=0.0, width=1.0)

REFERENCE_CONFIG = ExperimentConfig(
    profile=REFERENCE_PROFILE,
    model=ModelParams(p=3.0),
    dx=0.02,
    cfl=0.5,
    record_stride=16,
    t_final=64.0,
    symmetric=True,
    par_v_list=(0.0, 0.5, 0.9, 0.99, 1.0, 1.01),
    par_r_list=(1.0, 2.0, 4.0, 8.0),
    par_t_list=(8.0, 16.0, 32.0, 64.0),
)


def pytest_report_header(config):
    return f"nlwave kernels backend: {BACKEND}"


@pytest.fixture(scope="session")
def reference_run():
    """Nonlinear reference trajectory plus its wall-clock build time."""
    t0 = time.perf_counter()
    traj = simulate(REFERENCE_CONFIG)
    return {"traj": traj, "build_seconds": time.perf_counter() - t0,
            "config": REFERENCE_CONFIG}


@pytest.fixture(scope="session")
def reference_linear_run():
    """Same initial data evolved with the nonlinearity switched off."""
    cfg = ExperimentConfig(
        profile=REFERENCE_PROFILE,
        model=ModelParams(p=3.0, defocusing_on=False),
        dx=REFERENCE_CONFIG.dx,
        cfl=REFERENCE_CONFIG.cfl,
        record_stride=REFERENCE_CONFIG.record_stride,
        t_final=REFERENCE_CONFIG.t_final,
        symmetric=True,
        par_v_list=REFERENCE_CONFIG.par_v_list,
        par_r_list=REFERENCE_CONFIG.par_r_list,
        par_t_list=REFERENCE_CONFIG.par_t_list,
    )
    t0 = time.perf_counter()
    traj = simulate(cfg)
    return {"traj": traj, "build_seconds": time.perf_counter() - t0,
            "config": cfg}


def assert_energy_conservation(traj, factor: float = 10.0):
    """Every stored pair conserves the discrete energy to solver tolerance."""
    e0 = traj.energies[0]
    if e0 == 0.0:
        assert np.all(traj.energies == 0.0)
        return
    steps_between = np.diff(traj.times) / traj.solver.dt
    drift = np.abs(np.diff(traj.energies)) / abs(e0)
    budget = factor * traj.solver.newton_tol * np.maximum(steps_between, 1.0)
    assert np.all(drift <= budget), \
        f"energy drift {drift.max():.3e} exceeds budget {budget.min():.3e}"
