"""Multi-species Cahn-Hilliard-Keller-Segel tumor growth: forward solver,
adjoint-based reduced gradients, and box-constrained optimal control."""

from .grid import (
    FaceFlux,
    Grid,
    SolverError,
    ch_block_solve,
    chemotaxis_flux,
    divergence,
    gradient_faces,
    helmholtz_solve,
    inner,
    laplacian,
    mean,
    norm_l2,
)
from .potentials import (
    AdmissibilityError,
    PotentialSpec,
    ProliferationSpec,
    WellConstants,
    default_s_stab,
    derive_constants,
)
from .state import (
    Control,
    InitialData,
    InvariantReport,
    ModelSpec,
    State,
    StateTrajectory,
    check_mean_ode,
    energy,
    solve_forward,
    step,
    trajectory_distance,
)
from .linearized import LinearizedTrajectory, solve_linearized
from .adjoint import AdjointTrajectory, ControlSpec, duality_residual, solve_adjoint
from .control_opt import (
    OptimizeOptions,
    OptimizeResult,
    cost,
    optimize,
    project_admissible,
    reduced_gradient,
    stationarity_residual,
)
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"
