"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The experiment-level criteria run the bundled desk-scale configs once per
module and share the results across assertions. Run with `pytest -s` to see
the per-criterion lines as they complete.
"""

import math
import time

import numpy as np
import pytest

from conftest import observed_order
from spdecontrol import (
    BoundaryCondition,
    ControlSequence,
    CostSpec,
    ImplicitSolver,
    ModelSpec,
    NoiseStreams,
    OptimizerSettings,
    assemble_field_increment,
    control_update,
    gibbs_weights,
    make_grid_1d,
    make_sine_basis,
    nagumo_initial_profile,
)
from spdecontrol.config import load_config
from spdecontrol.experiments import build_grid, region_masks, run_experiment
from spdecontrol.problems import BoundaryProblem

WORKERS = 2


def report(name: str, ok: bool, detail: str = "") -> None:
    # The original stderr bypasses pytest's capture, so the per-criterion
    # line shows up in plain `pytest -v` output while it runs.
    import sys

    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}",
          file=sys.__stderr__)
    assert ok, f"{name}: {detail}"


# --- criterion 1: noise statistics --------------------------------------------


def test_noise_statistics():
    t0 = time.perf_counter()
    grid = make_grid_1d(5.0, 128)
    basis = make_sine_basis(grid)
    dt = 0.01
    streams = NoiseStreams(master_seed=20240)
    db = streams.block((0,), n_rollouts=10_000, bins=1, R=basis.R, dt=dt)[:, 0, :]
    fields = assemble_field_increment(db, basis)
    expected = dt * (basis.eigenvalues[:, None] * basis.values**2).sum(axis=0)
    probes = np.linspace(10, 118, 10).round().astype(int)
    sample_var = fields.var(axis=0)
    rel = np.abs(sample_var[probes] - expected[probes]) / expected[probes]
    elapsed = time.perf_counter() - t0
    report(
        "noise-statistics",
        bool(np.all(rel <= 0.05) and elapsed < 10.0),
        f"max rel err {rel.max():.4f} at 10 probes, runtime {elapsed:.2f}s",
    )


# --- criterion 2: weight algebra -----------------------------------------------


def test_weight_algebra():
    rng = np.random.default_rng(3)
    costs = rng.uniform(0.0, 50.0, size=64)
    rho = 0.7
    w = gibbs_weights(costs, rho)
    ok_norm = abs(w.sum() - 1.0) <= 1e-12 and np.all(w >= 0)
    w_shift = gibbs_weights(costs + 123.25, rho)
    ok_shift = np.max(np.abs(w - w_shift)) <= 1e-12
    w2 = gibbs_weights(np.array([0.0, math.log(2.0) / rho]), rho)
    ok_split = abs(w2[0] - 2.0 / 3.0) <= 1e-12 and abs(w2[1] - 1.0 / 3.0) <= 1e-12
    report(
        "weight-algebra",
        ok_norm and ok_shift and ok_split,
        f"sum dev {abs(w.sum()-1.0):.2e}, shift dev {np.max(np.abs(w-w_shift)):.2e}, "
        f"split ({w2[0]:.12f}, {w2[1]:.12f})",
    )


# --- criterion 3: update-law consistency ----------------------------------------


def test_update_law_consistency():
    from spdecontrol.actuation import build_actuators
    from spdecontrol.problems import DistributedProblem

    grid = make_grid_1d(5.0, 64)
    model = ModelSpec(kind="nagumo", grid=grid, epsilon=1.0, sigma=0.1, alpha=-0.5,
                      bc=BoundaryCondition.neumann(0.0))
    actuators = build_actuators(grid, 5.0 * np.array([0.3, 0.5, 0.7]), np.full(3, 0.5))
    mask = (grid.nodes >= 3.5) & (grid.nodes <= 4.95)
    cost = CostSpec(mask=mask, desired=0.0, kappa=100.0)
    problem = DistributedProblem(model, ImplicitSolver(model, 0.01), actuators,
                                 make_sine_basis(grid), cost, NoiseStreams(99))
    rho, dt, L = 100.0, 0.01, 5
    h0 = nagumo_initial_profile(grid.nodes)
    u0 = ControlSequence(u=np.zeros((L, 3)), dt=dt)

    # (a) one update from u = 0 must equal the single-shot optimum computed
    # independently (raw exponential weights, dense solve) on the recorded
    # batch data.
    batch = problem.rollout_batch(h0, 0.0, u0, (0, 0), 64, rho)
    assert np.all(batch.zeta == 0.0)
    batch.finalize(rho)
    raw = np.exp(-rho * (batch.costs - batch.costs.min()))
    w = raw / raw.sum()
    oracle = np.stack([
        np.linalg.solve(problem.gram, (w[:, None] * batch.du[:, j, :]).sum(axis=0))
        for j in range(L)
    ]) / (math.sqrt(rho) * dt)
    updated = control_update(u0, batch, problem.gram_solve, rho, dt)
    dev_a = np.max(np.abs(updated.u - oracle) / np.maximum(np.abs(oracle), 1e-30))
    ok_a = dev_a <= 1e-10

    # (b) zero cost function: uniform weights, update within 3 SE of zero.
    cost0 = CostSpec(mask=np.zeros(grid.shape, dtype=bool), desired=0.0, kappa=1.0)
    problem0 = DistributedProblem(model, ImplicitSolver(model, 0.01), actuators,
                                  make_sine_basis(grid), cost0, NoiseStreams(7))
    u1bin = ControlSequence(u=np.zeros((1, 3)), dt=dt)
    batch0 = problem0.rollout_batch(h0, 0.0, u1bin, (0, 0), 10_000, rho).finalize(rho)
    upd = control_update(u1bin, batch0, problem0.gram_solve, rho, dt)
    mapped = problem0.gram_solve(batch0.du[:, 0, :].T).T / (math.sqrt(rho) * dt)
    se = mapped.std(axis=0, ddof=1) / math.sqrt(batch0.du.shape[0])
    ok_b = bool(np.all(np.abs(upd.u[0]) <= 3 * se))
    report(
        "update-law-consistency",
        ok_a and ok_b,
        f"single-shot max rel dev {dev_a:.2e}; zero-cost update "
        f"{np.abs(upd.u[0] / se).max():.2f} SE",
    )


# --- criterion 4: deterministic PDE sanity ---------------------------------------


def test_deterministic_pde_sanity():
    t0 = time.perf_counter()
    # (i) homogeneous-Dirichlet heat: discrete L2 norm non-increasing, 500 steps.
    heat = ModelSpec(kind="heat1d", grid=make_grid_1d(1.0, 64), epsilon=1.0,
                     bc=BoundaryCondition.dirichlet(0.0))
    solver = ImplicitSolver(heat, 0.01)
    rng = np.random.default_rng(0)
    h = rng.normal(size=65)
    h[0] = h[-1] = 0.0
    monotone = True
    for _ in range(500):
        h_new = solver.solve_fields(h)
        if np.linalg.norm(h_new) > np.linalg.norm(h) + 1e-14:
            monotone = False
            break
        h = h_new

    # (ii) deterministic Nagumo wave timing at x = 0.99a.
    grid = make_grid_1d(5.0, 128)
    nagumo = ModelSpec(kind="nagumo", grid=grid, epsilon=1.0, alpha=-0.5,
                       bc=BoundaryCondition.neumann(0.0))
    nsolver = ImplicitSolver(nagumo, 0.01)
    probe = int(round(0.99 * 128))
    h = nagumo_initial_profile(grid.nodes)
    at_1s = at_5s = None
    from spdecontrol.models import step_fields
    for step in range(1, 501):
        h = step_fields(h, nagumo, nsolver)
        if step == 100:
            at_1s = h[probe]
        if step == 500:
            at_5s = h[probe]
    elapsed = time.perf_counter() - t0
    ok_heat = monotone
    ok_rise = at_5s > 0.9
    ok_low = at_1s < 0.1
    report(
        "deterministic-pde-sanity",
        ok_heat and ok_rise and ok_low and elapsed < 30.0,
        f"heat monotone={ok_heat}; h(5s,0.99a)={at_5s:.3f} (>0.9: {ok_rise}); "
        f"h(1s,0.99a)={at_1s:.3f} (<0.1: {ok_low}); runtime {elapsed:.1f}s. "
        "Note: h(0, 0.99a)=0.110 and the reaction is strictly positive on "
        "0<h<1, so h(1s) can never drop below 0.1; see decisions ledger.",
    )


# --- criterion 5: self-convergence ----------------------------------------------


def test_self_convergence():
    from spdecontrol.grids import make_grid_2d

    g5 = make_grid_1d(5.0, 64)
    g2 = make_grid_1d(2.0, 64)
    g1 = make_grid_1d(1.0, 64)
    g2d = make_grid_2d(0.5, 16)
    cases = {
        "nagumo": (ModelSpec(kind="nagumo", grid=g5, epsilon=1.0, alpha=-0.5,
                             bc=BoundaryCondition.neumann(0.0)),
                   nagumo_initial_profile(g5.nodes), 0.5),
        "burgers1d": (ModelSpec(kind="burgers1d", grid=g2, epsilon=0.5,
                                bc=BoundaryCondition.dirichlet(1.0)),
                      1.0 + np.sin(np.pi * g2.nodes / 2.0), 0.3),
        "heat1d": (ModelSpec(kind="heat1d", grid=g1, epsilon=1.0,
                             bc=BoundaryCondition.dirichlet(0.0)),
                   np.sin(np.pi * g1.nodes), 0.3),
        "heat2d": (ModelSpec(kind="heat2d", grid=g2d, epsilon=1.0,
                             bc=BoundaryCondition.dirichlet(0.0)),
                   np.outer(np.sin(np.pi * g2d.nodes_x / 0.5),
                            np.sin(np.pi * g2d.nodes_y / 0.5)), 0.05),
    }
    orders = {name: observed_order(m, h0, T, dt=0.01) for name, (m, h0, T) in cases.items()}
    ok = all(order >= 0.9 for order in orders.values())
    report("self-convergence",
           ok, "; ".join(f"{k}: order {v:.3f}" for k, v in orders.items()))


# --- experiment-level criteria ----------------------------------------------------


@pytest.fixture(scope="module")
def nagumo_desk(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("nagumo"))
    t0 = time.perf_counter()
    cfg = load_config("nagumo_suppress_desk").with_overrides(out_dir=out)
    mpc = run_experiment(cfg.with_overrides(mode="mpc"), workers=WORKERS)
    ol = run_experiment(cfg.with_overrides(mode="open-loop"), workers=WORKERS)
    return mpc, ol, time.perf_counter() - t0


def test_nagumo_suppression_ordering(nagumo_desk):
    mpc, ol, elapsed = nagumo_desk
    wins = int(np.sum(mpc.region("S1").trial_rmse < ol.region("S1").trial_rmse))
    ok = wins >= 13 and elapsed < 600.0
    report(
        "nagumo-suppression-ordering",
        ok,
        f"MPC wins {wins}/16 seed groups (need >= 13); "
        f"RMSE mpc={mpc.region('S1').rmse:.4f} ol={ol.region('S1').rmse:.4f}; "
        f"runtime {elapsed:.0f}s",
    )


def test_nagumo_open_loop_improves_over_iterations(nagumo_desk):
    """Desk open-loop optimization (50 iterations x 64 rollouts): the mean
    rollout cost drops from the first to the last iteration in at least 90%
    of the seed groups."""
    import os
    _, ol, _ = nagumo_desk
    improved = 0
    for k in range(ol.config.trials):
        path = os.path.join(ol.out_path, f"trial{k:03d}_iterations.csv")
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        improved += rows[-1, 2] < rows[0, 2]
    ok = improved >= math.ceil(0.9 * ol.config.trials)
    report("nagumo-open-loop-improvement", ok, f"{improved}/{ol.config.trials} trials improved")


@pytest.fixture(scope="module")
def burgers_desk(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("burgers"))
    t0 = time.perf_counter()
    cfg = load_config("burgers_track_desk").with_overrides(out_dir=out)
    mpc = run_experiment(cfg.with_overrides(mode="mpc"), workers=WORKERS)
    ol = run_experiment(cfg.with_overrides(mode="open-loop"), workers=WORKERS)
    return mpc, ol, time.perf_counter() - t0


def test_burgers_tracking(burgers_desk):
    mpc, ol, elapsed = burgers_desk
    rmse = {r.label: r.rmse for r in mpc.regions}
    ok_levels = all(v <= 0.15 for v in rmse.values())
    ok_order = all(mpc.region(lbl).rmse < ol.region(lbl).rmse for lbl in rmse)
    ok = ok_levels and ok_order and elapsed < 600.0
    report(
        "burgers-tracking",
        ok,
        f"MPC RMSE {['%.3f' % rmse[k] for k in sorted(rmse)]} (cap 0.15); "
        f"OL RMSE {['%.3f' % ol.region(k).rmse for k in sorted(rmse)]}; "
        f"runtime {elapsed:.0f}s",
    )


@pytest.fixture(scope="module")
def heat2d_desk(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("heat2d"))
    t0 = time.perf_counter()
    cfg = load_config("heat2d_track_desk").with_overrides(out_dir=out)
    res = run_experiment(cfg, workers=WORKERS)
    return res, time.perf_counter() - t0


def test_heat2d_terminal_targets(heat2d_desk):
    res, elapsed = heat2d_desk
    cfg = res.config
    grid = build_grid(cfg)
    targets = {"S1": 0.5, "S2": 1.0, "S3": 1.0, "S4": 1.0, "S5": 1.0}
    devs = {}
    for label, mask, value in region_masks(cfg, grid):
        region_mean = res.terminal_states[:, mask].mean()
        devs[label] = abs(region_mean - targets[label])
    ok = all(d <= 0.3 for d in devs.values()) and elapsed < 600.0
    report(
        "heat2d-terminal-targets",
        ok,
        "deviations " + ", ".join(f"{k}={v:.3f}" for k, v in sorted(devs.items()))
        + f" (cap 0.3); runtime {elapsed:.0f}s",
    )


@pytest.fixture(scope="module")
def boundary_tracking(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("boundary"))
    cfg = load_config("heat1d_boundary_desk").with_overrides(out_dir=out)
    res = run_experiment(cfg, workers=WORKERS)
    return res


def test_boundary_control(boundary_tracking, tmp_path_factory):
    res = boundary_tracking
    cfg = res.config

    # Tracking: plateau means within 0.5 of the target during steady windows.
    # The receding-horizon controller previews the 0.4 s target jump one
    # horizon early (by design), so the first plateau's steady interval ends
    # at 0.4 - horizon.
    import os
    t_break = cfg.desired_schedule[1][0]
    first_end = t_break - cfg.horizon
    devs = []
    for k in range(cfg.trials):
        path = os.path.join(res.out_path, f"trial{k:03d}_trajectory.csv")
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        t, h = rows[:, 0], rows[:, 2]
        n = cfg.J + 1
        t_steps = t.reshape(-1, n)[:, 0]
        fields = h.reshape(-1, n)
        interior = fields[:, 1:-1].mean(axis=1)
        first = interior[(t_steps >= 0.2) & (t_steps <= first_end + 1e-9)]
        second = interior[(t_steps >= 0.9) & (t_steps <= 1.3)]
        devs.append((np.abs(first - 1.0).max(), np.abs(second - 3.0).max()))
    devs = np.array(devs)
    ok_track = bool(np.all(devs[:, 0] <= 0.5) and np.all(devs[:, 1] <= 0.5))

    # Symmetric task: hold the initial profile; per-trial mean(u1 - u2) must
    # be statistically indistinguishable from zero across trials.
    sym_out = str(tmp_path_factory.mktemp("boundary_sym"))
    grid = make_grid_1d(cfg.a, cfg.J)
    model = ModelSpec(kind="heat1d", grid=grid, epsilon=cfg.epsilon, sigma=cfg.sigma,
                      sigma_boundary=cfg.sigma_boundary,
                      bc=BoundaryCondition.controlled_neumann())
    mask = np.ones(grid.shape, dtype=bool)
    mask[0] = mask[-1] = False
    cost = CostSpec(mask=mask, desired=1.0, kappa=cfg.kappa)
    settings = OptimizerSettings(rho=cfg.rho, iterations=cfg.iterations_mpc,
                                 rollouts=cfg.rollouts_mpc, horizon_steps=10,
                                 dt=cfg.dt, sim_steps=50)
    from spdecontrol.controller import boundary_mpc
    diffs = []
    holds = []
    for trial in range(8):
        problem = BoundaryProblem(model, ImplicitSolver(model, cfg.dt),
                                  make_sine_basis(grid), cost, NoiseStreams(5150))
        resu = boundary_mpc(problem, np.ones(grid.n_nodes), settings, trial=trial)
        diffs.append(float(np.mean(resu.applied[:, 0] - resu.applied[:, 1])))
        holds.append(resu.applied.ravel())
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / math.sqrt(len(diffs))
    ok_sym = abs(diffs.mean()) <= 3 * se
    # No cost gradient: the applied controls stay within 3 sigma of zero
    # (sigma being their own wander scale; warm starts correlate steps, so
    # this asserts boundedness, not a standard error).
    spread = max(hold.std() for hold in holds)
    ok_zero = all(np.abs(hold).max() <= 3 * max(spread, 1e-12) for hold in holds)
    report(
        "boundary-control",
        ok_track and ok_sym and ok_zero,
        f"plateau max devs {devs.max(axis=0).round(3).tolist()} (cap 0.5); "
        f"paired u1-u2 mean {diffs.mean():.4f} vs 3SE {3*se:.4f}; "
        f"hold-task |u|max/spread {max(np.abs(h).max() for h in holds)/max(spread,1e-12):.2f}",
    )


def test_secondary_plotkit_renders_real_outputs(boundary_tracking, tmp_path):
    """[SECONDARY] plotkit renders a heatmap and a profile band from a real
    experiment output set without error, and rerendering is byte-identical.
    The full per-experiment matrix runs in plotkit's own vitest suite."""
    import os
    import shutil
    import subprocess

    cli = os.path.join(os.path.dirname(__file__), "..", "plotkit", "dist", "main.js")
    if shutil.which("node") is None or not os.path.exists(cli):
        pytest.skip("plotkit not built or node unavailable")
    res = boundary_tracking
    trajectory = os.path.join(res.out_path, "trial000_trajectory.csv")
    profiles = os.path.join(res.out_path, "profiles.csv")
    renders = []
    for _ in range(2):
        heat = tmp_path / f"heat{_}.svg"
        band = tmp_path / f"band{_}.svg"
        for kind, src, dst in (("heatmap", trajectory, heat), ("profile-band", profiles, band)):
            proc = subprocess.run(
                ["node", cli, "plot", kind, "--in", src, "--out", str(dst)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
        renders.append((heat.read_bytes(), band.read_bytes()))
    ok = renders[0] == renders[1]
    report("secondary-plotkit", ok, "heatmap + profile band rendered; rerender identical")


# --- criterion: determinism -------------------------------------------------------


def test_determinism_across_workers(tmp_path_factory):
    import os
    cfg = load_config("heat1d_boundary_desk").with_overrides(trials=2)
    snapshots = []
    for workers in (1, 2):
        out = str(tmp_path_factory.mktemp(f"det{workers}"))
        res = run_experiment(cfg.with_overrides(out_dir=out), workers=workers)
        files = {}
        for name in sorted(os.listdir(res.out_path)):
            files[name] = open(os.path.join(res.out_path, name), "rb").read()
        snapshots.append(files)
    a, b = snapshots
    same = set(a) == set(b)
    diffs = []
    for name in a:
        if name == "metrics.csv":
            # identical apart from the wall-clock runtime_s column
            strip = lambda blob: [ln.rsplit(b",", 1)[0] for ln in blob.splitlines()]
            if strip(a[name]) != strip(b[name]):
                diffs.append(name)
        elif a[name] != b[name]:
            diffs.append(name)
    ok = same and not diffs
    report(
        "determinism",
        ok,
        f"{len(a)} files compared across worker counts; mismatches: {diffs or 'none'}",
    )
