"""Gaussian actuator shapes, their Gram matrix, and noise projections.

The Gram matrix M and the mode coupling P share one quadrature rule with the
rest of the package; P is precomputed once per (actuator set, basis) pair so
rollout loops reduce to matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .exceptions import (
    ConfigurationError,
    DegenerateActuationError,
    DimensionMismatchError,
)
from .grids import Grid1D, Grid2D
from .noise import SpectralBasis, SpectralBasis2D


def actuator_value(x, mu, sigma: float):
    """Gaussian actuator shape exp(-|x - mu|^2 / (2 sigma^2)), maximum 1 at mu.

    x and mu are scalars in 1-D or length-2 sequences in 2-D (isotropic).
    """
    if sigma <= 0:
        raise ConfigurationError(f"actuator width must be positive, got {sigma}")
    diff = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    return float(np.exp(-0.5 * np.sum(diff * diff) / sigma**2))


def _shape_on_grid(grid, mu, sigma: float) -> np.ndarray:
    if isinstance(grid, Grid1D):
        return np.exp(-0.5 * (grid.nodes - mu) ** 2 / sigma**2)
    dx2 = (grid.nodes_x - mu[0])[:, None] ** 2 + (grid.nodes_y - mu[1])[None, :] ** 2
    return np.exp(-0.5 * dx2 / sigma**2)


def gram_matrix(shapes: np.ndarray, grid) -> tuple[np.ndarray, tuple]:
    """Gram matrix M_ij = <m_i, m_j> under the grid quadrature, plus its
    Cholesky factorization.

    Raises DegenerateActuationError naming the most-collinear actuator pair
    when the factorization fails (e.g. duplicated actuators).
    """
    w = grid.quad_weights().ravel()
    flat = shapes.reshape(shapes.shape[0], -1)
    M = (flat * w) @ flat.T
    M = 0.5 * (M + M.T)
    try:
        factor = cho_factor(M)
    except LinAlgError:
        d = np.sqrt(np.diag(M))
        corr = np.abs(M / np.outer(d, d))
        np.fill_diagonal(corr, 0.0)
        i, j = np.unravel_index(np.argmax(corr), corr.shape)
        raise DegenerateActuationError(
            f"actuator Gram matrix is singular; actuators {min(i, j)} and "
            f"{max(i, j)} overlap almost identically (|corr|={corr[i, j]:.6f})"
        ) from None
    return M, factor


@dataclass(frozen=True)
class ActuatorSet:
    """N actuator shapes on a grid with precomputed Gram matrix.

    Attributes:
        centers: (N,) positions in 1-D or (N, 2) in 2-D.
        widths: (N,) Gaussian widths sigma_l.
        shapes: m_l evaluated on the grid, shape (N, *grid.shape).
        gram: M with M_ij = <m_i, m_j>.
    """

    grid: Grid1D | Grid2D
    centers: np.ndarray
    widths: np.ndarray
    shapes: np.ndarray
    gram: np.ndarray
    _factor: tuple

    @property
    def n_actuators(self) -> int:
        return self.shapes.shape[0]

    @property
    def shapes_flat(self) -> np.ndarray:
        return self.shapes.reshape(self.n_actuators, -1)

    def gram_solve(self, b: np.ndarray) -> np.ndarray:
        """Solve M x = b using the cached factorization (never inverts M)."""
        return cho_solve(self._factor, np.asarray(b, dtype=float))


def build_actuators(grid, centers, widths) -> ActuatorSet:
    """Construct Gaussian actuators at the given centers and widths."""
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    widths = np.asarray(widths, dtype=float)
    if isinstance(grid, Grid2D):
        centers = centers.reshape(-1, 2)
    n = centers.shape[0]
    if widths.ndim == 0:
        widths = np.full(n, float(widths))
    if widths.shape[0] != n:
        raise DimensionMismatchError(
            f"{n} centers but {widths.shape[0]} widths"
        )
    if np.any(widths <= 0):
        raise ConfigurationError("actuator widths must be positive")
    shapes = np.stack([_shape_on_grid(grid, centers[l], widths[l]) for l in range(n)])
    M, factor = gram_matrix(shapes, grid)
    return ActuatorSet(
        grid=grid, centers=centers, widths=widths, shapes=shapes, gram=M, _factor=factor
    )


def control_to_field(actuators: ActuatorSet, u: np.ndarray) -> np.ndarray:
    """Map control vector(s) to the field sum_l m_l(x) u_l; linear in u.

    u has trailing dimension N; leading dimensions broadcast, so a control
    sequence (L, N) maps to per-bin fields (L, *grid.shape).
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != actuators.n_actuators:
        raise DimensionMismatchError(
            f"expected {actuators.n_actuators} control entries, got {u.shape[-1]}"
        )
    out = u @ actuators.shapes_flat
    return out.reshape(*u.shape[:-1], *actuators.grid.shape)


@dataclass(frozen=True)
class NoiseProjection:
    """Coupling P_ls = <m_l, sqrt(lambda_s) e_s> mapping mode increments to du."""

    coupling: np.ndarray

    @property
    def n_actuators(self) -> int:
        return self.coupling.shape[0]

    @property
    def n_modes(self) -> int:
        return self.coupling.shape[1]


def build_projection(actuators: ActuatorSet, basis) -> NoiseProjection:
    """Precompute P once per (actuator set, basis) pair."""
    grid = actuators.grid
    w = grid.quad_weights()
    if isinstance(basis, SpectralBasis):
        P = (actuators.shapes * w) @ basis.weighted.T
    elif isinstance(basis, SpectralBasis2D):
        weighted = actuators.shapes * w  # (N, nx, ny)
        # <m_l, e_j x e_k> = Exw (weighted m_l) Eyw^T, flattened to (N, Rx*Ry)
        tmp = np.einsum("jx,nxy->njy", basis.weighted_x, weighted)
        P = np.einsum("njy,ky->njk", tmp, basis.weighted_y).reshape(
            actuators.n_actuators, -1
        )
    else:
        raise ConfigurationError(f"unsupported basis type {type(basis)!r}")
    return NoiseProjection(coupling=P)


def project_increment(projection: NoiseProjection, dbeta: np.ndarray) -> np.ndarray:
    """du = P dbeta; dbeta has trailing dimension R, or trailing (Rx, Ry) in
    2-D which is flattened row-major. Leading batch dimensions broadcast."""
    dbeta = np.asarray(dbeta, dtype=float)
    if dbeta.ndim >= 1 and dbeta.shape[-1] == projection.n_modes:
        flat = dbeta
    elif dbeta.ndim >= 2 and dbeta.shape[-2] * dbeta.shape[-1] == projection.n_modes:
        flat = dbeta.reshape(*dbeta.shape[:-2], projection.n_modes)
    else:
        raise DimensionMismatchError(
            f"expected {projection.n_modes} mode increments, got shape {dbeta.shape}"
        )
    return flat @ projection.coupling.T
