"""Rollout engines binding a model, actuation, cost, and noise streams.

Both engines expose the same surface to the drivers: `rollout_batch` samples
a whole batch of controlled trajectories (vectorized across rollouts, with
bitwise-reproducible streams) and `plant_step` advances the true noisy
system by one bin. Stream context tags keep optimizer noise, plant noise,
and initial-condition draws in disjoint key spaces.

The 1-D batch loop runs entirely inside preallocated buffers: repeated
megabyte-scale allocations dominate the runtime otherwise.
"""

from __future__ import annotations

import numpy as np

from .actuation import ActuatorSet, build_projection, control_to_field
from .controller import ControlSequence, RolloutBatch, girsanov_correction
from .exceptions import DivergenceError
from .grids import Grid2D
from .models import ImplicitSolver, ModelSpec, reaction_add, step_fields
from .noise import NoiseStreams, assemble_field_increment

# Leading context tags separating stream domains.
CTX_OPTIMIZER = 0
CTX_PLANT = 1
CTX_INIT = 2


def _row_finite(H: np.ndarray) -> np.ndarray:
    return np.isfinite(H).all(axis=tuple(range(1, H.ndim)))


class _Workspace1D:
    """Reusable buffers for one (rollouts, bins) batch shape.

    Sized so one bin's draws, fields, and scratch all stay cache-resident;
    the full-horizon noise block never materializes.
    """

    def __init__(self, B: int, L: int, n_draw: int, n_nodes: int, n_controls: int,
                 mask_idx: np.ndarray):
        self.bin_draws = np.empty((B, n_draw))
        self.dW_bin = np.empty((B, n_nodes))
        self.du = np.empty((B, L, n_controls))
        self.du_bin = np.empty((B, n_controls))
        self.bufA = np.empty((B, n_nodes))
        self.bufB = np.empty((B, n_nodes))
        self.w1 = np.empty((B, n_nodes))
        self.w2 = np.empty((B, n_nodes))
        self.err = np.empty((B, mask_idx.size))
        self.mask_idx = mask_idx


class _EngineBase:
    def _workspace(self, B: int, L: int, n_draw: int, n_nodes: int) -> _Workspace1D:
        key = (B, L)
        ws = self._ws_cache.get(key)
        if ws is None:
            ws = _Workspace1D(B, L, n_draw, n_nodes, self.n_controls, self._mask_idx)
            self._ws_cache[key] = ws
        return ws

    def _masked_cost_add(self, ws: _Workspace1D, H: np.ndarray, t: float,
                         costs: np.ndarray) -> None:
        cost = self.cost
        np.take(H, ws.mask_idx, axis=1, out=ws.err)
        desired = cost.desired_at(t)
        if isinstance(desired, np.ndarray) and desired.ndim > 1:
            desired = desired.ravel()[ws.mask_idx]
        np.subtract(ws.err, desired, out=ws.err)
        np.multiply(ws.err, ws.err, out=ws.err)
        costs += cost.kappa * ws.err.sum(axis=1)


class DistributedProblem(_EngineBase):
    """Distributed actuation through Gaussian shape functions."""

    def __init__(self, model: ModelSpec, solver: ImplicitSolver,
                 actuators: ActuatorSet, basis, cost, streams: NoiseStreams):
        self.model = model
        self.solver = solver
        self.actuators = actuators
        self.basis = basis
        self.cost = cost
        self.streams = streams
        self.projection = build_projection(actuators, basis)
        self.gram = actuators.gram
        self._ws_cache = {}
        self._mask_idx = np.flatnonzero(cost.mask.ravel())
        self._is_2d = isinstance(model.grid, Grid2D)

    @property
    def n_controls(self) -> int:
        return self.actuators.n_actuators

    def gram_solve(self, b):
        return self.actuators.gram_solve(b)

    def rollout_batch(self, h0: np.ndarray, t0: float, useq: ControlSequence,
                      context: tuple, n_rollouts: int, rho: float) -> RolloutBatch:
        if self._is_2d:
            return self._rollout_batch_2d(h0, t0, useq, context, n_rollouts, rho)
        model, solver, streams = self.model, self.solver, self.streams
        dt = useq.dt
        B, L = n_rollouts, useq.n_bins
        R = self.projection.n_modes
        n = model.grid.n_nodes
        ws = self._workspace(B, L, R, n)

        gen = streams.context_generator((CTX_OPTIMIZER, *context))
        sq_dt = np.sqrt(dt)
        bin_flat = ws.bin_draws.reshape(-1)
        # Per-bin control fields, premultiplied by dt for the explicit step.
        ufields = dt * control_to_field(self.actuators, useq.u)

        H, rhs = ws.bufA, ws.bufB
        H[:] = h0
        costs = np.zeros(B)
        alive = np.ones(B, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(L):
                # Draw this bin's increments while everything is cache-hot;
                # the layout matches NoiseStreams.block bin-major order.
                gen.standard_normal(out=bin_flat)
                np.multiply(ws.bin_draws, sq_dt, out=ws.bin_draws)
                np.dot(ws.bin_draws, self.basis.weighted, out=ws.dW_bin)
                np.dot(ws.bin_draws, self.projection.coupling.T, out=ws.du_bin)
                ws.du[:, j, :] = ws.du_bin
                np.multiply(ws.dW_bin, model.sigma, out=rhs)
                np.add(rhs, H, out=rhs)
                np.add(rhs, ufields[j], out=rhs)
                reaction_add(model, H, rhs, dt, ws.w1, ws.w2)
                H, rhs = solver.solve_rows(rhs), H
                finite = _row_finite(H)
                if not finite.all():
                    H[~finite] = 0.0
                    alive &= finite
                self._masked_cost_add(ws, H, t0 + (j + 1) * dt, costs)
        costs[~alive] = np.inf
        # du is copied out: the workspace is recycled by the next batch.
        du = (np.sqrt(rho) * model.sigma) * ws.du
        zeta = girsanov_correction(useq.u, du, self.gram, rho, dt)
        return RolloutBatch(costs=costs, zeta=zeta, du=du)

    def _rollout_batch_2d(self, h0, t0, useq, context, n_rollouts, rho):
        """2-D path; allocation pressure is negligible at the 2-D batch
        sizes, so this stays on the plain vectorized route."""
        model, solver, cost = self.model, self.solver, self.cost
        dt = useq.dt
        L = useq.n_bins
        dbeta = self.streams.block(
            (CTX_OPTIMIZER, *context), n_rollouts, L, self.projection.n_modes, dt
        )
        dW = assemble_field_increment(
            dbeta.reshape(n_rollouts, L, self.basis.Rx, self.basis.Ry), self.basis
        )
        du = (np.sqrt(rho) * model.sigma) * (
            dbeta.reshape(-1, self.projection.n_modes) @ self.projection.coupling.T
        ).reshape(n_rollouts, L, -1)
        ufields = control_to_field(self.actuators, useq.u)

        H = np.repeat(h0[None], n_rollouts, axis=0)
        costs = np.zeros(n_rollouts)
        alive = np.ones(n_rollouts, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(L):
                H = step_fields(H, model, solver, ufields[j], dW[:, j], dt)
                finite = _row_finite(H)
                if not finite.all():
                    H[~finite] = 0.0
                    alive &= finite
                costs += cost.masked_sq_error(H, t0 + (j + 1) * dt)
        costs[~alive] = np.inf
        zeta = girsanov_correction(useq.u, du, self.gram, rho, dt)
        return RolloutBatch(costs=costs, zeta=zeta, du=du)

    def plant_step(self, h: np.ndarray, u_bin: np.ndarray, context: tuple,
                   t: float) -> np.ndarray:
        dt = self.solver.dt
        dbeta = self.streams.block(
            (CTX_PLANT, *context), 1, 1, self.projection.n_modes, dt
        )[0, 0]
        if self._is_2d:
            dbeta = dbeta.reshape(self.basis.Rx, self.basis.Ry)
        dW = assemble_field_increment(dbeta, self.basis)
        ufield = control_to_field(self.actuators, u_bin)
        h_new = step_fields(h, self.model, self.solver, ufield, dW, dt)
        if not np.all(np.isfinite(h_new)):
            raise DivergenceError(
                "plant state became non-finite", step=int(round(t / dt)) + 1
            )
        return h_new


class BoundaryProblem(_EngineBase):
    """Neumann boundary control of the 1-D heat model.

    The two controls pair with the two boundary Brownian increments; the
    boundary Gram matrix is the 2x2 identity (Euclidean dot product), so the
    Gram solve is a no-op. Interior spectral noise still drives the field
    but never enters du.
    """

    def __init__(self, model: ModelSpec, solver: ImplicitSolver, basis, cost,
                 streams: NoiseStreams):
        self.model = model
        self.solver = solver
        self.basis = basis
        self.cost = cost
        self.streams = streams
        self.gram = np.eye(2)
        self._ws_cache = {}
        self._mask_idx = np.flatnonzero(cost.mask.ravel())

    @property
    def n_controls(self) -> int:
        return 2

    def gram_solve(self, b):
        return np.asarray(b, dtype=float)

    def rollout_batch(self, h0: np.ndarray, t0: float, useq: ControlSequence,
                      context: tuple, n_rollouts: int, rho: float) -> RolloutBatch:
        model, solver, streams = self.model, self.solver, self.streams
        dt = useq.dt
        B, L = n_rollouts, useq.n_bins
        R = self.basis.n_modes
        n = model.grid.n_nodes
        sb = model.boundary_sigma
        ws = self._workspace(B, L, R + 2, n)

        gen = streams.context_generator((CTX_OPTIMIZER, *context))
        sq_dt = np.sqrt(dt)
        bin_flat = ws.bin_draws.reshape(-1)

        H, rhs = ws.bufA, ws.bufB
        H[:] = h0
        costs = np.zeros(B)
        alive = np.ones(B, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(L):
                gen.standard_normal(out=bin_flat)
                np.multiply(ws.bin_draws, sq_dt, out=ws.bin_draws)
                dv_bin = ws.bin_draws[:, R:]  # boundary Brownian increments
                ws.du[:, j, :] = dv_bin
                np.dot(ws.bin_draws[:, :R], self.basis.weighted, out=ws.dW_bin)
                np.multiply(ws.dW_bin, model.sigma, out=rhs)
                np.add(rhs, H, out=rhs)
                H, rhs = solver.solve_rows(
                    rhs,
                    flux_left=useq.u[j, 0] + sb * dv_bin[:, 0] / dt,
                    flux_right=useq.u[j, 1] + sb * dv_bin[:, 1] / dt,
                ), H
                finite = _row_finite(H)
                if not finite.all():
                    H[~finite] = 0.0
                    alive &= finite
                self._masked_cost_add(ws, H, t0 + (j + 1) * dt, costs)
        costs[~alive] = np.inf
        du = (np.sqrt(rho) * sb) * ws.du
        zeta = girsanov_correction(useq.u, du, self.gram, rho, dt)
        return RolloutBatch(costs=costs, zeta=zeta, du=du)

    def plant_step(self, h: np.ndarray, u_bin: np.ndarray, context: tuple,
                   t: float) -> np.ndarray:
        dt = self.solver.dt
        R = self.basis.n_modes
        draws = self.streams.block((CTX_PLANT, *context), 1, 1, R + 2, dt)[0, 0]
        dW = assemble_field_increment(draws[:R], self.basis)
        sb = self.model.boundary_sigma
        h_new = self.solver.solve_fields(
            h + self.model.sigma * dW,
            flux_left=u_bin[0] + sb * draws[R] / dt,
            flux_right=u_bin[1] + sb * draws[R + 1] / dt,
        )
        if not np.all(np.isfinite(h_new)):
            raise DivergenceError(
                "plant state became non-finite", step=int(round(t / dt)) + 1
            )
        return h_new
