"""Uniform 1-D/2-D grids, field containers, and the discrete inner product.

One trapezoidal inner product is used everywhere (actuator Gram matrices,
noise projections, mode normalization) so that Gram-solve control updates
stay scale-consistent with the sampled noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionMismatchError


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [0, a] with J intervals, i.e. J + 1 nodes."""

    a: float
    J: int
    nodes: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError(f"domain length must be positive, got a={self.a}")
        if self.J < 2:
            raise ConfigurationError(f"need at least 2 intervals, got J={self.J}")
        if self.nodes is None:
            object.__setattr__(self, "nodes", np.linspace(0.0, self.a, self.J + 1))

    @property
    def dx(self) -> float:
        return self.a / self.J

    @property
    def n_nodes(self) -> int:
        return self.J + 1

    @property
    def shape(self) -> tuple:
        return (self.J + 1,)

    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights: dx at interior nodes, dx/2 at the two endpoints."""
        w = np.full(self.J + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class Grid2D:
    """Tensor-product grid on [0, a] x [0, a] with Jx, Jy intervals per axis."""

    a: float
    Jx: int
    Jy: int

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError(f"domain length must be positive, got a={self.a}")
        if self.Jx < 2 or self.Jy < 2:
            raise ConfigurationError(
                f"need at least 2 intervals per axis, got Jx={self.Jx}, Jy={self.Jy}"
            )

    @property
    def dx(self) -> float:
        return self.a / self.Jx

    @property
    def dy(self) -> float:
        return self.a / self.Jy

    @property
    def nodes_x(self) -> np.ndarray:
        return np.linspace(0.0, self.a, self.Jx + 1)

    @property
    def nodes_y(self) -> np.ndarray:
        return np.linspace(0.0, self.a, self.Jy + 1)

    @property
    def shape(self) -> tuple:
        return (self.Jx + 1, self.Jy + 1)

    @property
    def n_nodes(self) -> int:
        return (self.Jx + 1) * (self.Jy + 1)

    def quad_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights, shape (Jx+1, Jy+1)."""
        wx = np.full(self.Jx + 1, self.dx)
        wx[0] = wx[-1] = 0.5 * self.dx
        wy = np.full(self.Jy + 1, self.dy)
        wy[0] = wy[-1] = 0.5 * self.dy
        return np.outer(wx, wy)


def make_grid_1d(a: float, J: int) -> Grid1D:
    """Build a uniform 1-D grid with nodes x_k = a*k/J, k = 0..J."""
    return Grid1D(a=float(a), J=int(J))


def make_grid_2d(a: float, Jx: int, Jy: int | None = None) -> Grid2D:
    """Build a square tensor-product grid; Jy defaults to Jx."""
    return Grid2D(a=float(a), Jx=int(Jx), Jy=int(Jx if Jy is None else Jy))


@dataclass(frozen=True)
class FieldState:
    """Field values on a grid at one time instant.

    Values are stored at every node including boundary nodes; boundary
    handling is the model's job, not the container's.
    """

    grid: Grid1D | Grid2D
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"values shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field values must be finite")
        object.__setattr__(self, "values", values)


def _values_of(f) -> np.ndarray:
    return f.values if isinstance(f, FieldState) else np.asarray(f, dtype=float)


def inner_product(f, g, grid: Grid1D | Grid2D) -> float:
    """Trapezoidal L2 inner product of two fields on the same grid.

    Accepts raw arrays or FieldState; symmetric and bilinear by construction.
    """
    fv, gv = _values_of(f), _values_of(g)
    if fv.shape != grid.shape or gv.shape != grid.shape:
        raise DimensionMismatchError(
            f"field shapes {fv.shape}, {gv.shape} do not match grid shape {grid.shape}"
        )
    return float(np.sum(grid.quad_weights() * fv * gv))
