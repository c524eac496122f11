import numpy as np

from spdecontrol import ImplicitSolver, step_fields


def simulate_deterministic(model, h0, T, dt, control_field=None):
    """Noise-free forward simulation used by convergence and sanity checks."""
    solver = ImplicitSolver(model, dt)
    h = np.array(h0, dtype=float, copy=True)
    for _ in range(int(round(T / dt))):
        h = step_fields(h, model, solver, control_field=control_field)
    return h


def observed_order(model, h0, T, dt):
    """Richardson self-convergence order from runs at dt, dt/2, dt/4."""
    h1 = simulate_deterministic(model, h0, T, dt)
    h2 = simulate_deterministic(model, h0, T, dt / 2)
    h4 = simulate_deterministic(model, h0, T, dt / 4)
    e12 = np.linalg.norm(h1 - h2)
    e24 = np.linalg.norm(h2 - h4)
    return np.log2(e12 / e24)


import pytest


@pytest.fixture(autouse=True, scope="session")
def _single_threaded_blas():
    # Small-matrix BLAS calls pay more in thread synchronization than they
    # gain; keep the whole suite single threaded (trials fork workers).
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=1):
        yield
