"""Semilinear SPDE right-hand sides, boundary conditions, and the
semi-implicit stepper.

Each step treats diffusion implicitly and the nonlinearity, control, and
noise explicitly:

    (I - dt eps L) h_new = h + dt f(h) + dt u_field + sigma dW + bc terms

Diffusion systems are prefactored once (dense LU in 1-D, sparse LU in 2-D)
and reused for every step and rollout. Neumann ends use second-order ghost
nodes; controlled fluxes are oriented inward, so positive control heats the
rod from either end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse import identity, kron, lil_matrix
from scipy.sparse.linalg import splu

from .exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    DivergenceError,
    NumericsError,
)
from .grids import FieldState, Grid1D, Grid2D

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary descriptor for 1-D models (2-D heat is homogeneous Dirichlet).

    kind is "dirichlet" (prescribed value) or "neumann" (prescribed flux).
    With controlled=True the two fluxes become control inputs u1 (left,
    inward) and u2 (right, inward) supplied per step.
    """

    kind: str
    left_value: float = 0.0
    right_value: float = 0.0
    controlled: bool = False

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN):
            raise ConfigurationError(f"unknown boundary kind {self.kind!r}")
        if self.controlled and self.kind != NEUMANN:
            raise ConfigurationError("boundary control requires Neumann conditions")

    @classmethod
    def dirichlet(cls, value: float = 0.0, right_value: float | None = None):
        return cls(DIRICHLET, value, value if right_value is None else right_value)

    @classmethod
    def neumann(cls, flux: float = 0.0):
        return cls(NEUMANN, flux, flux)

    @classmethod
    def controlled_neumann(cls):
        return cls(NEUMANN, controlled=True)


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one SPDE: kind, diffusivity, nonlinearity, noise level.

    sigma scales the spectral noise increment; sigma_boundary scales the
    white-noise flux in the boundary-controlled heat model (defaults to
    sigma when unset).
    """

    kind: str  # nagumo | burgers1d | heat1d | heat2d
    grid: Grid1D | Grid2D
    epsilon: float
    sigma: float = 0.0
    alpha: float | None = None
    bc: BoundaryCondition = BoundaryCondition.dirichlet()
    sigma_boundary: float | None = None

    def __post_init__(self):
        if self.kind not in ("nagumo", "burgers1d", "heat1d", "heat2d"):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.epsilon <= 0:
            raise ConfigurationError(f"diffusivity must be positive, got {self.epsilon}")
        if self.sigma < 0:
            raise ConfigurationError(f"noise amplitude must be nonnegative, got {self.sigma}")
        if self.kind == "nagumo" and self.alpha is None:
            raise ConfigurationError("the Nagumo model needs its cubic parameter alpha")
        if self.kind == "heat2d" and not isinstance(self.grid, Grid2D):
            raise ConfigurationError("heat2d requires a 2-D grid")
        if self.kind != "heat2d" and not isinstance(self.grid, Grid1D):
            raise ConfigurationError(f"{self.kind} requires a 1-D grid")

    @property
    def boundary_sigma(self) -> float:
        return self.sigma if self.sigma_boundary is None else self.sigma_boundary

    def reaction(self, h: np.ndarray) -> np.ndarray:
        """Explicit nonlinearity f(h); zero for the heat models."""
        if self.kind == "nagumo":
            return nagumo_reaction(h, self.alpha)
        if self.kind == "burgers1d":
            return burgers_advection(h, self.grid)
        return np.zeros_like(h)


def nagumo_reaction(h, alpha: float):
    """Cubic reaction h (1 - h) (h - alpha); roots at 0, 1, alpha."""
    h = np.asarray(h, dtype=float)
    out = h * (1.0 - h) * (h - alpha)
    return out if out.ndim else float(out)


def nagumo_initial_profile(x):
    """Logistic voltage front 1 / (1 + exp(-(2 - x)/sqrt(2))), high on the left."""
    x = np.asarray(x, dtype=float)
    out = 1.0 / (1.0 + np.exp(-(2.0 - x) / np.sqrt(2.0)))
    return out if out.ndim else float(out)


def burgers_advection(h, grid: Grid1D):
    """Advection term -h h_x with central differences; zero at the ends,
    which are pinned by the Dirichlet rows anyway."""
    h = np.asarray(h, dtype=float)
    out = np.zeros_like(h)
    out[..., 1:-1] = -h[..., 1:-1] * (h[..., 2:] - h[..., :-2]) / (2.0 * grid.dx)
    return out


def reaction_add(model: ModelSpec, H: np.ndarray, rhs: np.ndarray, dt: float,
                 w1: np.ndarray, w2: np.ndarray) -> None:
    """rhs += dt f(H) without allocating; w1, w2 are scratch buffers shaped
    like H. Allocation-free because rollout loops run this per bin."""
    if model.kind == "nagumo":
        np.subtract(1.0, H, out=w1)
        np.multiply(w1, H, out=w1)
        np.subtract(H, model.alpha, out=w2)
        np.multiply(w1, w2, out=w1)
        np.multiply(w1, dt, out=w1)
        np.add(rhs, w1, out=rhs)
    elif model.kind == "burgers1d":
        inner = w1[..., 1:-1]
        np.subtract(H[..., 2:], H[..., :-2], out=inner)
        np.multiply(inner, H[..., 1:-1], out=inner)
        np.multiply(inner, -dt / (2.0 * model.grid.dx), out=inner)
        np.add(rhs[..., 1:-1], inner, out=rhs[..., 1:-1])


class ImplicitSolver:
    """Prefactored solve of (I - dt eps L_h) with the model's boundary rows.

    1-D uses a dense LU (cheap at these sizes and fast for many right-hand
    sides); 2-D uses a sparse LU over interior unknowns.
    """

    def __init__(self, model: ModelSpec, dt: float):
        if dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {dt}")
        self.model = model
        self.dt = dt
        grid = model.grid
        if isinstance(grid, Grid1D):
            self._build_1d(model, dt, grid)
        else:
            self._build_2d(model, dt, grid)

    def _build_1d(self, model: ModelSpec, dt: float, grid: Grid1D):
        n = grid.n_nodes
        r = dt * model.epsilon / grid.dx**2
        A = np.zeros((n, n))
        idx = np.arange(1, n - 1)
        A[idx, idx] = 1.0 + 2.0 * r
        A[idx, idx - 1] = -r
        A[idx, idx + 1] = -r
        if model.bc.kind == DIRICHLET:
            A[0, 0] = 1.0
            A[-1, -1] = 1.0
        else:
            A[0, 0] = 1.0 + 2.0 * r
            A[0, 1] = -2.0 * r
            A[-1, -1] = 1.0 + 2.0 * r
            A[-1, -2] = -2.0 * r
        self._matrix = A
        try:
            self._lu = lu_factor(A)
        except Exception as exc:  # pragma: no cover - defensive
            raise NumericsError(f"failed to factor implicit system: {exc}") from exc
        # Ghost-node flux terms enter the right-hand side with this weight.
        self._flux_coeff = 2.0 * r * grid.dx

    def _build_2d(self, model: ModelSpec, dt: float, grid: Grid2D):
        if model.bc.kind != DIRICHLET:
            raise ConfigurationError("2-D models support Dirichlet boundaries only")
        nx, ny = grid.Jx - 1, grid.Jy - 1
        rx = dt * model.epsilon / grid.dx**2
        ry = dt * model.epsilon / grid.dy**2
        Tx = lil_matrix((nx, nx))
        Tx.setdiag(2.0 * rx)
        Tx.setdiag(-rx, 1)
        Tx.setdiag(-rx, -1)
        Ty = lil_matrix((ny, ny))
        Ty.setdiag(2.0 * ry)
        Ty.setdiag(-ry, 1)
        Ty.setdiag(-ry, -1)
        A = identity(nx * ny, format="csc") + kron(Tx, identity(ny), format="csc") \
            + kron(identity(nx), Ty, format="csc")
        self._matrix = A
        self._lu = splu(A.tocsc())
        self._interior = (slice(1, -1), slice(1, -1))

    def solve_fields(self, rhs: np.ndarray, flux_left=None, flux_right=None) -> np.ndarray:
        """Solve for the next field; rhs is (*grid.shape) or batched
        (B, *grid.shape). Dirichlet values and Neumann fluxes come from the
        boundary condition unless controlled fluxes are passed explicitly."""
        model = self.model
        grid = model.grid
        rhs = np.asarray(rhs, dtype=float)
        batched = rhs.ndim > len(grid.shape)
        if isinstance(grid, Grid1D):
            work = rhs.copy() if batched else rhs[None, :].copy()
            if model.bc.kind == DIRICHLET:
                work[:, 0] = model.bc.left_value
                work[:, -1] = model.bc.right_value
            else:
                gl = -np.asarray(flux_left) if flux_left is not None else model.bc.left_value
                gr = np.asarray(flux_right) if flux_right is not None else model.bc.right_value
                work[:, 0] -= self._flux_coeff * gl
                work[:, -1] += self._flux_coeff * gr
            # check_finite=False: a diverged rollout row must propagate as
            # non-finite output (weight 0 downstream), not abort the batch.
            out = lu_solve(self._lu, work.T, check_finite=False).T
            return out if batched else out[0]
        work = rhs if batched else rhs[None]
        B = work.shape[0]
        inner = work[:, 1:-1, 1:-1].reshape(B, -1)
        sol = self._lu.solve(inner.T).T
        out = np.zeros_like(work)
        out[:, 1:-1, 1:-1] = sol.reshape(B, grid.Jx - 1, grid.Jy - 1)
        return out if batched else out[0]

    def solve_rows(self, work: np.ndarray, flux_left=None, flux_right=None) -> np.ndarray:
        """In-place 1-D solve for a batch: work is (B, n_nodes) C-contiguous
        holding right-hand sides on entry and solutions on exit.

        Avoids every per-call allocation; this is the rollout hot path.
        """
        model = self.model
        if model.bc.kind == DIRICHLET:
            work[:, 0] = model.bc.left_value
            work[:, -1] = model.bc.right_value
        else:
            gl = -np.asarray(flux_left) if flux_left is not None else model.bc.left_value
            gr = np.asarray(flux_right) if flux_right is not None else model.bc.right_value
            work[:, 0] -= self._flux_coeff * gl
            work[:, -1] += self._flux_coeff * gr
        lu_solve(self._lu, work.T, overwrite_b=True, check_finite=False)
        return work

    def residual(self, solution: np.ndarray, rhs_with_bc: np.ndarray) -> float:
        """Relative residual of a 1-D solve (used by the test suite)."""
        if not isinstance(self.model.grid, Grid1D):
            raise NotImplementedError("residual check implemented for 1-D systems")
        r = self._matrix @ solution - rhs_with_bc
        return float(np.linalg.norm(r) / max(np.linalg.norm(rhs_with_bc), 1e-300))


def _first_divergent_step(t: float, dt: float) -> int:
    return int(round(t / dt)) + 1


def step_fields(
    H: np.ndarray,
    model: ModelSpec,
    solver: ImplicitSolver,
    control_field=None,
    noise_field=None,
    dt: float | None = None,
) -> np.ndarray:
    """One semi-implicit step on raw field arrays; batched along axis 0.

    Callers own divergence handling: the result may contain non-finite
    entries if the explicit terms blew up.
    """
    dt = solver.dt if dt is None else dt
    if dt != solver.dt:
        raise ConfigurationError("solver was factored for a different dt")
    rhs = H + dt * model.reaction(H)
    if control_field is not None:
        rhs = rhs + dt * control_field
    if noise_field is not None:
        rhs = rhs + model.sigma * noise_field
    return solver.solve_fields(rhs)


def step_semi_implicit(
    state: FieldState,
    model: ModelSpec,
    solver: ImplicitSolver,
    control_field=None,
    noise_increment=None,
    dt: float | None = None,
) -> FieldState:
    """Advance a single FieldState by one semi-implicit step.

    control_field and noise_increment are node arrays on the state's grid
    (noise_increment is the assembled dW, scaled by the model's sigma here).
    Raises DivergenceError with the offending time index if the new state is
    not finite.
    """
    dt = solver.dt if dt is None else dt
    if control_field is not None:
        control_field = np.asarray(control_field, dtype=float)
        if control_field.shape != state.grid.shape:
            raise DimensionMismatchError("control field does not match the grid")
    if noise_increment is not None:
        noise_increment = np.asarray(noise_increment, dtype=float)
        if noise_increment.shape != state.grid.shape:
            raise DimensionMismatchError("noise increment does not match the grid")
    # Overflow in the explicit terms is the handled divergence condition.
    with np.errstate(over="ignore", invalid="ignore"):
        new_values = step_fields(state.values, model, solver, control_field,
                                 noise_increment, dt)
    if not np.all(np.isfinite(new_values)):
        raise DivergenceError(
            "field became non-finite", step=_first_divergent_step(state.t, dt)
        )
    return FieldState(grid=state.grid, values=new_values, t=state.t + dt)


def step_boundary_controlled_heat(
    state: FieldState,
    model: ModelSpec,
    solver: ImplicitSolver,
    u1: float,
    u2: float,
    boundary_noise=(0.0, 0.0),
    noise_increment=None,
    dt: float | None = None,
) -> FieldState:
    """One step of the 1-D heat model with controlled Neumann fluxes.

    The effective inward fluxes are u_i + sigma_b dv_i / dt with dv_i the
    boundary Brownian increments for this bin; interior spectral noise is
    optional via noise_increment.
    """
    if model.kind != "heat1d" or model.bc.kind != NEUMANN or not model.bc.controlled:
        raise ConfigurationError("boundary stepping needs the controlled-Neumann heat model")
    dt = solver.dt if dt is None else dt
    dv1, dv2 = float(boundary_noise[0]), float(boundary_noise[1])
    sb = model.boundary_sigma
    rhs = state.values.copy()
    if noise_increment is not None:
        rhs = rhs + model.sigma * np.asarray(noise_increment, dtype=float)
    new_values = solver.solve_fields(
        rhs, flux_left=u1 + sb * dv1 / dt, flux_right=u2 + sb * dv2 / dt
    )
    if not np.all(np.isfinite(new_values)):
        raise DivergenceError(
            "field became non-finite", step=_first_divergent_step(state.t, dt)
        )
    return FieldState(grid=state.grid, values=new_values, t=state.t + dt)
