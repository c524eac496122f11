"""Experiment orchestration: configs to problems, trial loops, metrics, CSVs.

Each trial owns disjoint noise-stream contexts derived from the master seed,
so the trial loop may run across worker processes in any order and still
produce byte-identical outputs. All files are written by the parent in trial
order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .actuation import build_actuators
from .config import ExperimentConfig, schedule_value
from .controller import CostSpec, OptimizerSettings, optimize_open_loop, run_mpc
from .csvio import write_csv
from .exceptions import SpdeControlError
from .grids import Grid1D, make_grid_1d, make_grid_2d
from .metrics import compute_metrics, per_trial_rmse, second_half_profile
from .models import BoundaryCondition, ImplicitSolver, ModelSpec, nagumo_initial_profile
from .noise import NoiseStreams, make_sine_basis
from .problems import CTX_INIT, BoundaryProblem, DistributedProblem

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    import contextlib

    def threadpool_limits(limits=None):
        return contextlib.nullcontext()


# Multithreaded BLAS is counterproductive here: the rollout loops issue many
# small solves/GEMMs, and thread-pool synchronization dwarfs the arithmetic.
# Trials parallelize across processes instead.
_BLAS_LIMIT = {"limits": 1}


def build_grid(cfg: ExperimentConfig):
    if cfg.kind == "heat2d":
        return make_grid_2d(cfg.a, cfg.J)
    return make_grid_1d(cfg.a, cfg.J)


def build_model(cfg: ExperimentConfig, grid) -> ModelSpec:
    if cfg.kind == "nagumo":
        bc = BoundaryCondition.neumann(0.0)
        return ModelSpec(kind="nagumo", grid=grid, epsilon=cfg.epsilon,
                         sigma=cfg.sigma, alpha=cfg.alpha, bc=bc)
    if cfg.kind == "burgers1d":
        bc = BoundaryCondition.dirichlet(cfg.bc_value)
        return ModelSpec(kind="burgers1d", grid=grid, epsilon=cfg.epsilon,
                         sigma=cfg.sigma, bc=bc)
    if cfg.kind == "heat1d":
        return ModelSpec(kind="heat1d", grid=grid, epsilon=cfg.epsilon,
                         sigma=cfg.sigma, bc=BoundaryCondition.dirichlet(cfg.bc_value))
    if cfg.kind == "heat2d":
        return ModelSpec(kind="heat2d", grid=grid, epsilon=cfg.epsilon,
                         sigma=cfg.sigma, bc=BoundaryCondition.dirichlet(0.0))
    return ModelSpec(kind="heat1d", grid=grid, epsilon=cfg.epsilon, sigma=cfg.sigma,
                     sigma_boundary=cfg.sigma_boundary,
                     bc=BoundaryCondition.controlled_neumann())


def region_masks(cfg: ExperimentConfig, grid):
    """Per-region boolean masks (labels S1..Sk) under the fraction bounds."""
    tol = 1e-9
    out = []
    for i, region in enumerate(cfg.regions, start=1):
        if isinstance(grid, Grid1D):
            frac = grid.nodes / grid.a
            lo, hi = region.bounds
            mask = (frac >= lo - tol) & (frac <= hi + tol)
        else:
            fx = grid.nodes_x / grid.a
            fy = grid.nodes_y / grid.a
            xlo, xhi, ylo, yhi = region.bounds
            mask = ((fx >= xlo - tol) & (fx <= xhi + tol))[:, None] & \
                   ((fy >= ylo - tol) & (fy <= yhi + tol))[None, :]
        if cfg.exclude_boundary and isinstance(grid, Grid1D):
            mask = mask.copy()
            mask[0] = mask[-1] = False
        out.append((f"S{i}", mask, region.value))
    return out


def build_cost(cfg: ExperimentConfig, grid) -> CostSpec:
    regions = region_masks(cfg, grid)
    union = np.zeros(grid.shape, dtype=bool)
    for _, mask, _ in regions:
        union |= mask
    if cfg.desired_schedule is not None:
        schedule = cfg.desired_schedule
        desired = lambda t: schedule_value(schedule, t)  # noqa: E731
    else:
        desired = np.zeros(grid.shape)
        for _, mask, value in regions:
            desired[mask] = value
    return CostSpec(mask=union, desired=desired, kappa=cfg.kappa,
                    terminal_scale=cfg.terminal_scale)


def metrics_target(cfg: ExperimentConfig, grid):
    """Desired values used for metrics; schedules evaluate at t = t_sim."""
    if cfg.desired_schedule is not None:
        return np.full(grid.shape, schedule_value(cfg.desired_schedule, cfg.t_sim))
    desired = np.zeros(grid.shape)
    for _, mask, value in region_masks(cfg, grid):
        desired[mask] = value
    return desired


def build_problem(cfg: ExperimentConfig, streams: NoiseStreams):
    grid = build_grid(cfg)
    model = build_model(cfg, grid)
    solver = ImplicitSolver(model, cfg.dt)
    basis = make_sine_basis(grid, R=cfg.noise_modes, decay_gamma=cfg.noise_decay)
    cost = build_cost(cfg, grid)
    if cfg.kind == "heat1d_boundary":
        return BoundaryProblem(model, solver, basis, cost, streams)
    centers = np.asarray(cfg.centers, dtype=float) * cfg.a
    if cfg.kind == "heat2d":
        centers = centers.reshape(-1, 2)
    widths = np.full(centers.shape[0], cfg.width * cfg.a)
    actuators = build_actuators(grid, centers, widths)
    return DistributedProblem(model, solver, actuators, basis, cost, streams)


def initial_state(cfg: ExperimentConfig, grid, streams: NoiseStreams, trial: int) -> np.ndarray:
    if cfg.kind == "nagumo":
        return nagumo_initial_profile(grid.nodes)
    if cfg.kind == "burgers1d":
        h = np.zeros(grid.shape)
        h[0] = h[-1] = cfg.bc_value
        return h
    if cfg.kind == "heat2d":
        gen = streams.rollout_generator((CTX_INIT, trial), 0)
        h = np.zeros(grid.shape)
        h[1:-1, 1:-1] = cfg.init_std * gen.standard_normal((grid.Jx - 1, grid.Jy - 1))
        return h
    return np.full(grid.shape, cfg.init_value)


@dataclass
class TrialOutput:
    trial: int
    times: np.ndarray
    states: np.ndarray
    applied: np.ndarray
    iteration_rows: list


def settings_for(cfg: ExperimentConfig) -> OptimizerSettings:
    horizon = cfg.horizon_steps if cfg.mode == "mpc" else cfg.sim_steps
    return OptimizerSettings(rho=cfg.rho, iterations=cfg.iterations,
                             rollouts=cfg.rollouts, horizon_steps=horizon,
                             dt=cfg.dt, sim_steps=cfg.sim_steps, seed=cfg.seed)


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialOutput:
    """One independent trial; reproducible from (config, master seed, trial)."""
    with threadpool_limits(**_BLAS_LIMIT):
        return _run_trial_inner(cfg, trial)


def _run_trial_inner(cfg: ExperimentConfig, trial: int) -> TrialOutput:
    streams = NoiseStreams(cfg.seed)
    problem = build_problem(cfg, streams)
    grid = problem.model.grid
    h0 = initial_state(cfg, grid, streams, trial)
    settings = settings_for(cfg)
    if cfg.mode == "mpc":
        res = run_mpc(problem, h0, settings, trial=trial)
        rows = [
            (s, st.iteration, st.mean_cost, st.min_cost, st.effective_sample_size)
            for s, trace in enumerate(res.traces)
            for st in trace
        ]
        return TrialOutput(trial, res.times, res.states, res.applied, rows)
    useq, trace = optimize_open_loop(problem, h0, 0.0, None, settings, (trial, 0))
    h = h0.copy()
    states = [h.copy()]
    for s in range(cfg.sim_steps):
        h = problem.plant_step(h, useq.u[s], (trial, s), s * cfg.dt)
        states.append(h.copy())
    rows = [(0, st.iteration, st.mean_cost, st.min_cost, st.effective_sample_size)
            for st in trace]
    times = cfg.dt * np.arange(cfg.sim_steps + 1)
    return TrialOutput(trial, times, np.array(states), useq.u.copy(), rows)


def _trial_task(payload):
    cfg, trial = payload
    return run_trial(cfg, trial)


@dataclass
class RegionMetrics:
    label: str
    rmse: float
    avg_sigma: float
    trial_rmse: np.ndarray


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_path: str
    regions: list
    profiles: np.ndarray
    terminal_states: np.ndarray
    runtime_s: float

    def region(self, label: str) -> RegionMetrics:
        for r in self.regions:
            if r.label == label:
                return r
        raise KeyError(label)


def _trajectory_rows(times, states, grid):
    steps = len(times)
    if isinstance(grid, Grid1D):
        n = grid.n_nodes
        return np.column_stack([
            np.repeat(times, n),
            np.tile(grid.nodes, steps),
            np.asarray(states).reshape(steps * n),
        ])
    nx, ny = grid.shape
    xs = np.repeat(grid.nodes_x, ny)
    ys = np.tile(grid.nodes_y, nx)
    return np.column_stack([
        np.repeat(times, nx * ny),
        np.tile(xs, steps),
        np.tile(ys, steps),
        np.asarray(states).reshape(steps * nx * ny),
    ])


def _write_float_table(path, header, array):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.asarray(array), fmt="%.9g", delimiter=",", newline="\n")


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run all trials, write the output CSV set, and return the metrics.

    Outputs land in <out_dir>/<name>/<mode>/: per-trial trajectory, control,
    and iteration-trace CSVs, the per-trial second-half profiles, and the
    metrics summary. A trial failure flushes completed results plus a marker
    row before the error propagates.
    """
    t_start = time.perf_counter()
    if workers is None:
        workers = int(os.environ.get("SPDECONTROL_WORKERS", "0")) or (os.cpu_count() or 1)
    workers = max(1, min(workers, cfg.trials))

    out_path = os.path.join(cfg.out_dir, cfg.name, cfg.mode)
    os.makedirs(out_path, exist_ok=True)

    outputs: dict[int, TrialOutput] = {}
    failure: tuple[int, Exception] | None = None
    if workers == 1:
        for k in range(cfg.trials):
            try:
                outputs[k] = run_trial(cfg, k)
            except SpdeControlError as exc:
                failure = (k, exc)
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {k: pool.submit(_trial_task, (cfg, k)) for k in range(cfg.trials)}
            for k in range(cfg.trials):
                try:
                    outputs[k] = futures[k].result()
                except SpdeControlError as exc:
                    failure = (k, exc)
                    break

    grid = build_grid(cfg)
    target = metrics_target(cfg, grid)
    regions = region_masks(cfg, grid)

    done = sorted(outputs)
    for k in done:
        out = outputs[k]
        _write_float_table(
            os.path.join(out_path, f"trial{k:03d}_trajectory.csv"),
            ["t", "x", "h"] if isinstance(grid, Grid1D) else ["t", "x", "y", "h"],
            _trajectory_rows(out.times, out.states, grid),
        )
        n_controls = out.applied.shape[1]
        _write_float_table(
            os.path.join(out_path, f"trial{k:03d}_controls.csv"),
            ["t"] + [f"u{i + 1}" for i in range(n_controls)],
            np.column_stack([out.times[:-1], out.applied]),
        )
        write_csv(
            os.path.join(out_path, f"trial{k:03d}_iterations.csv"),
            ["step", "iteration", "mean_cost", "min_cost", "effective_sample_size"],
            out.iteration_rows,
        )

    profiles = None
    terminal = None
    region_stats: list[RegionMetrics] = []
    if done:
        profiles = np.stack([
            second_half_profile(outputs[k].states, outputs[k].times) for k in done
        ])
        terminal = np.stack([outputs[k].states[-1] for k in done])
        prof_rows = []
        union = np.zeros(grid.shape, dtype=bool)
        for _, mask, _ in regions:
            union |= mask
        for idx, k in enumerate(done):
            cols = _trajectory_rows(np.array([0.0]), profiles[idx][None], grid)[:, 1:]
            trial_col = np.full((cols.shape[0], 1), float(k))
            prof_rows.append(np.column_stack([
                trial_col, cols[:, :-1], cols[:, -1:],
                target.reshape(-1, 1), union.reshape(-1, 1).astype(float),
            ]))
        _write_float_table(
            os.path.join(out_path, "profiles.csv"),
            (["trial", "x", "profile", "desired", "mask"] if isinstance(grid, Grid1D)
             else ["trial", "x", "y", "profile", "desired", "mask"]),
            np.vstack(prof_rows),
        )
        for label, mask, _ in regions:
            rmse, avg_sigma = compute_metrics(profiles, target, mask)
            region_stats.append(RegionMetrics(
                label=label, rmse=rmse, avg_sigma=avg_sigma,
                trial_rmse=per_trial_rmse(profiles, target, mask),
            ))

    runtime = time.perf_counter() - t_start
    metric_rows = [
        (cfg.name, cfg.mode, len(done), r.label, r.rmse, r.avg_sigma, runtime)
        for r in region_stats
    ]
    if failure is not None:
        metric_rows.append((cfg.name, cfg.mode, len(done),
                            f"failed_trial_{failure[0]}", float("nan"), float("nan"),
                            runtime))
    write_csv(
        os.path.join(out_path, "metrics.csv"),
        ["experiment", "mode", "trials", "region", "rmse", "avg_sigma", "runtime_s"],
        metric_rows,
    )
    if failure is not None:
        raise failure[1]
    return ExperimentResult(config=cfg, out_path=out_path, regions=region_stats,
                            profiles=profiles, terminal_states=terminal,
                            runtime_s=runtime)
