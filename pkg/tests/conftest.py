import time
from types import SimpleNamespace

import numpy as np
import pytest

from spiralseg.analysis import analyze_state
from spiralseg.config import preset
from spiralseg.solver import SystemState, continuation_sweep


def _simulate(name, **overrides):
    cfg = preset(name, **overrides)
    grid = cfg.grid()
    traces = cfg.traces().sample(grid, cfg.n_species)
    t0 = time.perf_counter()
    traj = continuation_sweep(grid, cfg.competition(), traces, cfg.beta_schedule, tol=cfg.tol)
    elapsed = time.perf_counter() - t0
    report = analyze_state(traj[-1], cfg, traj)
    return SimpleNamespace(cfg=cfg, grid=grid, traj=traj, state=traj[-1], report=report,
                           elapsed=elapsed)


@pytest.fixture(scope="session")
def fig1a_run():
    """Full-resolution symmetric experiment (512x512, beta up to 1e7)."""
    return _simulate("fig1a")


@pytest.fixture(scope="session")
def fig1b_run():
    """Full-resolution cyclic:4 experiment (512x512, beta up to 1e7)."""
    return _simulate("fig1b")


@pytest.fixture(scope="session")
def small_run():
    """Coarse cyclic:4 run for fast structural tests."""
    return _simulate("fig1b", n_theta=64, n_y=64, beta_schedule=(1e1, 1e2, 1e3, 1e4))


def make_state(grid, u, beta=0.0):
    return SystemState(grid, np.asarray(u, dtype=float), beta)
