"""Spectral synthesis of cylindrical / Q-Wiener increments.

Increments are built from a truncated sine eigenbasis: each mode carries an
independent Brownian increment of variance dt, and the assembled field is
the eigenvalue-weighted mode sum. Each (master seed, context) pair keys its
own counter-based stream in which every (rollout, time bin) increment has a
fixed slot, so batches reproduce bitwise no matter how rollouts are
scheduled or how many workers run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError, DomainError
from .grids import Grid1D, Grid2D


def basis_eval(j: int, x: float, a: float) -> float:
    """Evaluate sine mode j at position x on [0, a]: sqrt(2/a) sin(j pi x / a)."""
    if j < 1:
        raise ConfigurationError(f"mode index must be >= 1, got {j}")
    if x < 0.0 or x > a:
        raise DomainError(f"position x={x} outside domain [0, {a}]")
    return math.sqrt(2.0 / a) * math.sin(j * math.pi * x / a)


def mode_eigenvalues(R: int, decay_gamma: float = 0.0) -> np.ndarray:
    """Eigenvalues lambda_j = j^(-2 gamma); gamma = 0 gives cylindrical noise."""
    j = np.arange(1, R + 1, dtype=float)
    return j ** (-2.0 * decay_gamma)


def _sine_matrix(nodes: np.ndarray, a: float, R: int) -> np.ndarray:
    """Rows are modes 1..R evaluated at the nodes; endpoints pinned to 0."""
    j = np.arange(1, R + 1)[:, None]
    E = np.sqrt(2.0 / a) * np.sin(j * np.pi * nodes[None, :] / a)
    E[:, 0] = 0.0
    E[:, -1] = 0.0
    return E


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated sine eigenbasis on a 1-D grid.

    Attributes:
        R: truncation count.
        eigenvalues: lambda_j, shape (R,); all ones for cylindrical noise.
        values: e_j(x_k), shape (R, n_nodes).
        weighted: sqrt(lambda_j) e_j(x_k), the assembly matrix.
    """

    grid: Grid1D
    eigenvalues: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.R < 1:
            raise ConfigurationError("need at least one noise mode")
        if np.any(self.eigenvalues < 0):
            raise ConfigurationError("eigenvalues must be nonnegative")
        object.__setattr__(
            self, "weighted", np.sqrt(self.eigenvalues)[:, None] * self.values
        )

    @property
    def R(self) -> int:
        return self.values.shape[0]

    @property
    def n_modes(self) -> int:
        return self.R


@dataclass(frozen=True)
class SpectralBasis2D:
    """Tensor-product sine basis e_jk(x, y) = e_j(x) e_k(y) with R modes per axis."""

    grid: Grid2D
    eigenvalues_x: np.ndarray
    eigenvalues_y: np.ndarray
    values_x: np.ndarray
    values_y: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "weighted_x", np.sqrt(self.eigenvalues_x)[:, None] * self.values_x
        )
        object.__setattr__(
            self, "weighted_y", np.sqrt(self.eigenvalues_y)[:, None] * self.values_y
        )

    @property
    def Rx(self) -> int:
        return self.values_x.shape[0]

    @property
    def Ry(self) -> int:
        return self.values_y.shape[0]

    @property
    def n_modes(self) -> int:
        return self.Rx * self.Ry


def make_sine_basis(grid, R: int | None = None, decay_gamma: float = 0.0):
    """Build the sine basis for a grid; R defaults to the interval count J.

    decay_gamma > 0 selects a Q-Wiener profile lambda_j = j^(-2 gamma);
    in 2-D the profile is applied per axis.
    """
    if isinstance(grid, Grid1D):
        R = grid.J if R is None else int(R)
        return SpectralBasis(
            grid=grid,
            eigenvalues=mode_eigenvalues(R, decay_gamma),
            values=_sine_matrix(grid.nodes, grid.a, R),
        )
    if isinstance(grid, Grid2D):
        Rx = grid.Jx if R is None else int(R)
        Ry = grid.Jy if R is None else int(R)
        return SpectralBasis2D(
            grid=grid,
            eigenvalues_x=mode_eigenvalues(Rx, decay_gamma),
            eigenvalues_y=mode_eigenvalues(Ry, decay_gamma),
            values_x=_sine_matrix(grid.nodes_x, grid.a, Rx),
            values_y=_sine_matrix(grid.nodes_y, grid.a, Ry),
        )
    raise ConfigurationError(f"unsupported grid type {type(grid)!r}")


@dataclass(frozen=True)
class NoiseIncrement:
    """Per-mode Brownian increments and the field increment they assemble to."""

    dbeta: np.ndarray
    field: np.ndarray
    bin_index: int = 0

    @classmethod
    def from_modes(cls, dbeta: np.ndarray, basis, bin_index: int = 0) -> "NoiseIncrement":
        """Build the increment with its field assembled from the basis, so the
        pair can never fall out of sync."""
        return cls(dbeta=np.asarray(dbeta, dtype=float),
                   field=assemble_field_increment(dbeta, basis),
                   bin_index=int(bin_index))


class NoiseStreams:
    """Deterministic random streams keyed by (master seed, context).

    Each context (e.g. one optimization iteration, or one plant step) hashes
    to its own counter-based Philox stream. Within a stream the draws are
    laid out bin-major: time bin j holds one R-slot per rollout, so the
    increment for (rollout r, bin j) occupies slots
    [(j * n_rollouts + r) * R, ...). Every (seed, context, rollout, bin)
    increment is therefore a pure function of its key and position and
    reproduces bitwise regardless of scheduling or worker count. The
    bin-major order also lets rollout engines draw each bin on the fly
    while it is cache-hot.
    """

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def context_generator(self, context: tuple) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=(self.master_seed, *map(int, context)))
        return np.random.Generator(np.random.Philox(ss))

    def rollout_generator(self, context: tuple, rollout: int = 0) -> np.random.Generator:
        """Stream for a caller that owns a whole (context, rollout) key, e.g.
        per-trial initial-condition draws."""
        ss = np.random.SeedSequence(
            entropy=(self.master_seed, *map(int, context), int(rollout))
        )
        return np.random.Generator(np.random.Philox(ss))

    def increments(self, context: tuple, rollout: int, time_bin: int, R: int,
                   dt: float, n_rollouts: int | None = None) -> np.ndarray:
        """Mode increments for one (rollout, time bin), shape (R,).

        n_rollouts is the batch width (defaults to rollout + 1); it fixes the
        bin-row stride so the value matches block(...)[rollout, time_bin].
        """
        n_rollouts = rollout + 1 if n_rollouts is None else n_rollouts
        if rollout >= n_rollouts:
            raise ConfigurationError(f"rollout {rollout} outside batch of {n_rollouts}")
        block = self.block(context, n_rollouts, time_bin + 1, R, dt)
        return block[rollout, time_bin]

    def block(self, context: tuple, n_rollouts: int, bins: int, R: int, dt: float) -> np.ndarray:
        """Increments for a whole batch, shape (n_rollouts, bins, R).

        Drawn bin-major from the context stream, so block[r, j] depends only
        on (seed, context, r, j, n_rollouts, R).
        """
        gen = self.context_generator(context)
        out = np.empty((bins, n_rollouts, R))
        gen.standard_normal(out=out.reshape(-1))
        np.multiply(out, math.sqrt(dt), out=out)
        return out.transpose(1, 0, 2)


def sample_mode_increments(R: int, dt: float, gen: np.random.Generator, bins: int | None = None) -> np.ndarray:
    """Draw independent N(0, dt) increments for R modes.

    Returns shape (R,) or, with bins given, (bins, R) consuming the stream
    bin-major. dt = 0 degenerates to exact zeros.
    """
    if dt < 0:
        raise ConfigurationError(f"dt must be nonnegative, got {dt}")
    shape = (R,) if bins is None else (bins, R)
    return gen.standard_normal(shape) * math.sqrt(dt)


def assemble_field_increment(dbeta: np.ndarray, basis) -> np.ndarray:
    """Assemble dW(x) = sum_j sqrt(lambda_j) e_j(x) dbeta_j on the basis grid.

    1-D: dbeta has trailing dimension R, output trailing dimension n_nodes.
    2-D: dbeta has trailing dimensions (Rx, Ry), output (nx, ny). Leading
    batch dimensions broadcast through.
    """
    dbeta = np.asarray(dbeta, dtype=float)
    if isinstance(basis, SpectralBasis):
        if dbeta.shape[-1] != basis.R:
            raise DimensionMismatchError(
                f"expected {basis.R} mode increments, got {dbeta.shape[-1]}"
            )
        # Collapse leading dims so BLAS sees one large GEMM instead of a
        # stack of small ones.
        lead = dbeta.shape[:-1]
        return (dbeta.reshape(-1, basis.R) @ basis.weighted).reshape(
            *lead, basis.values.shape[1]
        )
    if isinstance(basis, SpectralBasis2D):
        if dbeta.shape[-2:] != (basis.Rx, basis.Ry):
            raise DimensionMismatchError(
                f"expected mode increments shaped (..., {basis.Rx}, {basis.Ry}), "
                f"got {dbeta.shape}"
            )
        lead = dbeta.shape[:-2]
        flat = dbeta.reshape(-1, basis.Rx, basis.Ry)
        # (B, Rx, Ry) @ (Ry, ny) -> (B, Rx, ny), then contract Rx against (Rx, nx).
        tmp = flat @ basis.weighted_y
        out = np.einsum("bjy,jx->bxy", tmp, basis.weighted_x)
        return out.reshape(*lead, basis.grid.Jx + 1, basis.grid.Jy + 1)
    raise ConfigurationError(f"unsupported basis type {type(basis)!r}")
