"""Cost evaluation, Gibbs weighting, the sampling-measure correction, and
the iterative control update with open-loop / receding-horizon drivers.

The update law per time bin j is

    u_j  <-  u_j + (1 / (sqrt(rho) dt)) M^{-1} E_w[ du_j ]

where du_j projects each rollout's noise increments onto the actuator
shapes, and the expectation weights are exp(-rho (J + zeta)) normalized
across rollouts. zeta corrects for sampling under the currently controlled
dynamics instead of the uncontrolled ones; with u = 0 it vanishes and one
update reproduces the single-shot optimal parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigurationError,
    DegenerateBatchError,
    DimensionMismatchError,
)
from .grids import FieldState


@dataclass(frozen=True)
class ControlSequence:
    """Step-function controls u_i in R^N over L time bins of width dt."""

    u: np.ndarray  # (L, N)
    dt: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 2 or u.shape[0] < 1:
            raise ConfigurationError("control sequence must be (L, N) with L >= 1")
        if not np.all(np.isfinite(u)):
            raise ConfigurationError("control sequence entries must be finite")
        object.__setattr__(self, "u", u)

    @property
    def n_bins(self) -> int:
        return self.u.shape[0]

    @property
    def n_controls(self) -> int:
        return self.u.shape[1]

    @property
    def horizon(self) -> float:
        return self.n_bins * self.dt


@dataclass(frozen=True)
class CostSpec:
    """Masked quadratic tracking cost kappa (h - h_desired)^2 1_S.

    desired is a node array, a scalar, or a callable t -> array/scalar for
    time-varying targets. terminal_scale adds an extra masked quadratic on
    the final state of a path (0 disables it).
    """

    mask: np.ndarray
    desired: object
    kappa: float
    terminal_scale: float = 0.0

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.dtype != bool:
            if not np.all(np.isin(mask, (0, 1))):
                raise ConfigurationError("mask indicator must be 0/1 valued")
            mask = mask.astype(bool)
        object.__setattr__(self, "mask", mask)
        if self.kappa <= 0:
            raise ConfigurationError(f"cost scale kappa must be positive, got {self.kappa}")

    def desired_at(self, t: float):
        """Target values at time t, broadcastable against masked node values."""
        d = self.desired(t) if callable(self.desired) else self.desired
        d = np.asarray(d, dtype=float)
        return d[self.mask] if d.shape == self.mask.shape else d

    def masked_sq_error(self, values: np.ndarray, t: float) -> np.ndarray:
        """kappa-scaled masked squared error; values may be batched (B, ...)."""
        err = values[..., self.mask] - self.desired_at(t)
        return self.kappa * np.sum(err * err, axis=-1)


def trajectory_cost(path, spec: CostSpec, times=None) -> float:
    """Accumulated masked quadratic cost over every state in the path.

    path holds FieldState objects (timestamps included) or raw node arrays
    with matching `times`. Non-finite values yield +inf.
    """
    states = list(path)
    if not states:
        raise ConfigurationError("trajectory cost needs a nonempty path")
    if not spec.mask.any():
        return 0.0
    total = 0.0
    for k, state in enumerate(states):
        if isinstance(state, FieldState):
            values, t = state.values, state.t
        else:
            values = np.asarray(state, dtype=float)
            t = 0.0 if times is None else times[k]
        if not np.all(np.isfinite(values)):
            return float("inf")
        total += float(spec.masked_sq_error(values, t))
        if spec.terminal_scale and k == len(states) - 1:
            total += float(
                spec.terminal_scale / spec.kappa * spec.masked_sq_error(values, t)
            )
    return total


def girsanov_correction(u_seq: np.ndarray, du: np.ndarray, gram: np.ndarray,
                        rho: float, dt: float):
    """Sampling-measure correction

        zeta = (1/sqrt(rho)) sum_k u_k . du_k + (1/2) sum_k u_k^T M u_k dt

    du has shape (L, N) for one rollout or (B, L, N) batched.
    """
    u = np.asarray(u_seq, dtype=float)
    du = np.asarray(du, dtype=float)
    if du.shape[-2:] != u.shape:
        raise DimensionMismatchError(
            f"du bins {du.shape[-2:]} do not align with controls {u.shape}"
        )
    cross = np.einsum("...jl,jl->...", du, u) / np.sqrt(rho)
    quad = 0.5 * dt * float(np.einsum("jl,jl->", u @ gram, u))
    out = cross + quad
    return float(out) if np.ndim(out) == 0 else out


def gibbs_weights(costs: np.ndarray, rho: float) -> np.ndarray:
    """Normalized weights exp(-rho (J - min J)) / sum; infinite costs get 0.

    The min shift makes the exponentials representable for large kappa and
    leaves the weights unchanged (exact shift invariance).
    """
    if rho <= 0:
        raise ConfigurationError(f"temperature rho must be positive, got {rho}")
    j = np.asarray(costs, dtype=float)
    finite = np.isfinite(j)
    if not finite.any():
        raise DegenerateBatchError("all rollouts diverged; no finite cost to weight")
    w = np.zeros_like(j)
    shifted = j[finite] - j[finite].min()
    w[finite] = np.exp(-rho * shifted)
    return w / w.sum()


@dataclass
class RolloutBatch:
    """Per-rollout costs, corrections, projected increments, and weights."""

    costs: np.ndarray       # raw state costs J_r, +inf for diverged rollouts
    zeta: np.ndarray        # corrections zeta_r
    du: np.ndarray          # (R, L, N) per-bin noise projections
    weights: np.ndarray = field(default=None)
    normalizer: float = 0.0

    @property
    def adjusted_costs(self) -> np.ndarray:
        return self.costs + self.zeta

    @property
    def effective_sample_size(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    def finalize(self, rho: float) -> "RolloutBatch":
        """Fill weights from the adjusted costs; normalizer is the mean
        exponential over non-diverged rollouts (shifted form)."""
        j_hat = self.adjusted_costs
        self.weights = gibbs_weights(j_hat, rho)
        finite = np.isfinite(j_hat)
        self.normalizer = float(
            np.exp(-rho * (j_hat[finite] - j_hat[finite].min())).sum() / finite.sum()
        )
        return self


def control_update(u_seq: ControlSequence, batch: RolloutBatch, gram_solve,
                   rho: float, dt: float) -> ControlSequence:
    """One Gibbs-weighted update of every control bin.

    gram_solve solves M x = b for (N, K) right-hand sides; diverged rollouts
    carry zero weight so their du never enters the expectation.
    """
    if batch.weights is None:
        raise ConfigurationError("batch weights missing; call finalize() first")
    weighted = np.tensordot(batch.weights, batch.du, axes=(0, 0))  # (L, N)
    step = gram_solve(weighted.T).T / (np.sqrt(rho) * dt)
    return ControlSequence(u=u_seq.u + step, dt=u_seq.dt)


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs of the sampling optimizer and its drivers."""

    rho: float
    iterations: int
    rollouts: int
    horizon_steps: int
    dt: float
    sim_steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigurationError(f"temperature rho must be positive, got {self.rho}")
        if self.iterations < 0:
            raise ConfigurationError("iteration count must be nonnegative")
        if self.rollouts < 1:
            raise ConfigurationError("need at least one rollout per iteration")
        if self.horizon_steps < 1:
            raise ConfigurationError("horizon must cover at least one bin")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    mean_cost: float
    min_cost: float
    effective_sample_size: float


def _stats(i: int, batch: RolloutBatch) -> IterationStats:
    finite = np.isfinite(batch.costs)
    mean_cost = float(batch.costs[finite].mean()) if finite.any() else float("inf")
    min_cost = float(batch.costs[finite].min()) if finite.any() else float("inf")
    return IterationStats(i, mean_cost, min_cost, batch.effective_sample_size)


def optimize_open_loop(problem, h0: np.ndarray, t0: float, u_init,
                       settings: OptimizerSettings, context: tuple):
    """Iterate {rollout batch, weight, update} from the given state.

    context identifies this optimization in the noise-stream keyspace; each
    iteration appends its index, so replays with the same master seed are
    bitwise identical. Returns the final ControlSequence and the iteration
    trace.
    """
    if u_init is None:
        u = ControlSequence(
            u=np.zeros((settings.horizon_steps, problem.n_controls)), dt=settings.dt
        )
    else:
        u = ControlSequence(u=np.array(u_init.u, copy=True), dt=settings.dt)
    trace = []
    for i in range(settings.iterations):
        batch = problem.rollout_batch(
            h0, t0, u, (*context, i), settings.rollouts, settings.rho
        ).finalize(settings.rho)
        u = control_update(u, batch, problem.gram_solve, settings.rho, settings.dt)
        trace.append(_stats(i, batch))
    return u, trace


@dataclass
class MpcResult:
    """Applied controls and the realized (noisy) closed-loop trajectory."""

    applied: np.ndarray       # (sim_steps, N)
    states: np.ndarray        # (sim_steps + 1, *grid.shape)
    times: np.ndarray         # (sim_steps + 1,)
    traces: list              # per sim step: list[IterationStats]


def run_mpc(problem, h0: np.ndarray, settings: OptimizerSettings,
            trial: int = 0) -> MpcResult:
    """Receding-horizon control: re-optimize at every simulation step, apply
    the first bin to the noisy plant, then shift the sequence left and
    repeat its last row as the warm start."""
    if settings.sim_steps < 1:
        raise ConfigurationError("MPC needs at least one simulation step")
    L, N = settings.horizon_steps, problem.n_controls
    u = ControlSequence(u=np.zeros((L, N)), dt=settings.dt)
    h = np.array(h0, copy=True)
    states = [h.copy()]
    applied = np.zeros((settings.sim_steps, N))
    traces = []
    for s in range(settings.sim_steps):
        t_s = s * settings.dt
        u_opt, trace = optimize_open_loop(problem, h, t_s, u, settings, (trial, s))
        applied[s] = u_opt.u[0]
        h = problem.plant_step(h, u_opt.u[0], (trial, s), t_s)
        states.append(h.copy())
        shifted = np.vstack([u_opt.u[1:], u_opt.u[-1:]])
        u = ControlSequence(u=shifted, dt=settings.dt)
        traces.append(trace)
    times = settings.dt * np.arange(settings.sim_steps + 1)
    return MpcResult(applied=applied, states=np.array(states), times=times, traces=traces)


def boundary_mpc(problem, h0: np.ndarray, settings: OptimizerSettings,
                 trial: int = 0) -> MpcResult:
    """Receding-horizon boundary control; identical update law with N = 2,
    M the 2x2 identity, and du the boundary Brownian increments."""
    return run_mpc(problem, h0, settings, trial=trial)
