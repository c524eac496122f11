"""Statistical optimizer properties that need whole-optimization runs."""

import numpy as np
import pytest

from spdecontrol import (
    BoundaryCondition,
    CostSpec,
    ImplicitSolver,
    ModelSpec,
    NoiseStreams,
    OptimizerSettings,
    make_grid_1d,
    make_sine_basis,
    nagumo_initial_profile,
    optimize_open_loop,
)
from spdecontrol.actuation import build_actuators
from spdecontrol.grids import make_grid_2d
from spdecontrol.problems import DistributedProblem


def nagumo_problem(seed, sigma=0.1):
    grid = make_grid_1d(5.0, 64)
    model = ModelSpec(kind="nagumo", grid=grid, epsilon=1.0, sigma=sigma, alpha=-0.5,
                      bc=BoundaryCondition.neumann(0.0))
    actuators = build_actuators(grid, 5.0 * np.arange(0.2, 0.85, 0.1), np.full(7, 0.5))
    mask = (grid.nodes >= 3.5) & (grid.nodes <= 4.95)
    cost = CostSpec(mask=mask, desired=0.0, kappa=10000.0)
    problem = DistributedProblem(model, ImplicitSolver(model, 0.01), actuators,
                                 make_sine_basis(grid), cost, NoiseStreams(seed))
    return problem, nagumo_initial_profile(grid.nodes)


def burgers_problem(seed):
    grid = make_grid_1d(2.0, 64)
    model = ModelSpec(kind="burgers1d", grid=grid, epsilon=0.5, sigma=0.1,
                      bc=BoundaryCondition.dirichlet(1.0))
    actuators = build_actuators(grid, 2.0 * np.array([0.2, 0.3, 0.5, 0.7, 0.8]),
                                np.full(5, 0.2))
    frac = grid.nodes / 2.0
    mask = ((frac >= 0.18) & (frac <= 0.22)) | ((frac >= 0.48) & (frac <= 0.52)) \
        | ((frac >= 0.78) & (frac <= 0.82))
    desired = np.where((frac >= 0.4) & (frac <= 0.6), 1.0, 2.0)
    cost = CostSpec(mask=mask, desired=desired, kappa=100.0)
    problem = DistributedProblem(model, ImplicitSolver(model, 0.01), actuators,
                                 make_sine_basis(grid), cost, NoiseStreams(seed))
    h0 = np.zeros(grid.shape)
    h0[0] = h0[-1] = 1.0
    return problem, h0


def heat2d_problem(seed):
    grid = make_grid_2d(0.5, 16)
    model = ModelSpec(kind="heat2d", grid=grid, epsilon=1.0, sigma=0.1,
                      bc=BoundaryCondition.dirichlet(0.0))
    centers = 0.5 * np.array([[0.25, 0.5], [0.5, 0.25], [0.5, 0.5], [0.5, 0.75], [0.75, 0.5]])
    actuators = build_actuators(grid, centers, np.full(5, 0.05))
    fx = grid.nodes_x / 0.5
    band = (fx >= 0.4) & (fx <= 0.6)
    mask = band[:, None] & band[None, :]
    cost = CostSpec(mask=mask, desired=1.0, kappa=100.0)
    problem = DistributedProblem(model, ImplicitSolver(model, 0.01), actuators,
                                 make_sine_basis(grid), cost, NoiseStreams(seed))
    return problem, np.zeros(grid.shape)


# Gibbs temperatures chosen so rho * cost-spread keeps a healthy effective
# sample size; the exploration scale cancels rho, so this only smooths the
# weighting.
@pytest.mark.parametrize(
    "factory,bins,rollouts,rho",
    [(lambda seed: nagumo_problem(seed, sigma=0.05), 100, 64, 4e-4),
     (burgers_problem, 50, 32, 100.0),
     (heat2d_problem, 20, 8, 100.0)],
    ids=["nagumo", "burgers", "heat2d"],
)
def test_median_cost_trend_non_increasing(factory, bins, rollouts, rho):
    """Median (over 20 seeds) per-iteration mean cost must not increase over
    the first 10 iterations on any distributed task."""
    traces = []
    for seed in range(20):
        problem, h0 = factory(1000 + seed)
        settings = OptimizerSettings(rho=rho, iterations=10, rollouts=rollouts,
                                     horizon_steps=bins, dt=0.01)
        _, trace = optimize_open_loop(problem, h0, 0.0, None, settings, (seed, 0))
        traces.append([s.mean_cost for s in trace])
    median = np.median(np.array(traces), axis=0)
    drops = np.diff(median)
    assert np.all(drops <= 1e-9 * max(median[0], 1.0)), f"median trace {median}"
