"""Sampling-based variational control of semilinear stochastic PDEs.

Spectral noise synthesis, semi-implicit field integrators, Gibbs-weighted
importance-sampled control updates, open-loop and receding-horizon drivers,
and a benchmark harness with CSV outputs.
"""

from .grids import FieldState, Grid1D, Grid2D, inner_product, make_grid_1d, make_grid_2d
from .noise import (
    NoiseIncrement,
    NoiseStreams,
    SpectralBasis,
    SpectralBasis2D,
    assemble_field_increment,
    basis_eval,
    make_sine_basis,
    sample_mode_increments,
)
from .actuation import (
    ActuatorSet,
    NoiseProjection,
    actuator_value,
    build_actuators,
    build_projection,
    control_to_field,
    gram_matrix,
    project_increment,
)
from .models import (
    BoundaryCondition,
    ImplicitSolver,
    ModelSpec,
    burgers_advection,
    nagumo_initial_profile,
    nagumo_reaction,
    step_boundary_controlled_heat,
    step_fields,
    step_semi_implicit,
)
from .controller import (
    ControlSequence,
    CostSpec,
    IterationStats,
    MpcResult,
    OptimizerSettings,
    RolloutBatch,
    boundary_mpc,
    control_update,
    gibbs_weights,
    girsanov_correction,
    optimize_open_loop,
    run_mpc,
    trajectory_cost,
)
from .problems import BoundaryProblem, DistributedProblem

__version__ = "0.1.0"
