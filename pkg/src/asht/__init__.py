"""Active simple hypothesis testing: minimax error-exponent bounds and policies."""

from .bounds import (
    BoundsReport,
    Momentum,
    compute_bounds_report,
    hamiltonian,
    r_go_1,
    r_hopf,
    r_static,
    r_ub,
    terminal_g,
)
from .errors import (
    DimensionError,
    DomainError,
    InsufficientDataError,
    InternalCheckError,
    NumericalError,
    SolverBudgetError,
    ValidationError,
)
from .instances import (
    Allocation,
    BanditClass,
    FiniteDistribution,
    bernoulli,
    chernoff_information,
    kl_divergence,
    load_instance,
    save_instance,
    zeta,
)
from .pde import (
    UpwindGridSpec,
    ValueSlice,
    cfl_max_dt,
    default_grid_spec,
    modified_terminal,
    solve_r_go_inf,
    upwind_step,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BanditClass",
    "BoundsReport",
    "DimensionError",
    "DomainError",
    "FiniteDistribution",
    "InsufficientDataError",
    "InternalCheckError",
    "Momentum",
    "NumericalError",
    "SolverBudgetError",
    "UpwindGridSpec",
    "ValidationError",
    "ValueSlice",
    "bernoulli",
    "cfl_max_dt",
    "chernoff_information",
    "compute_bounds_report",
    "default_grid_spec",
    "hamiltonian",
    "kl_divergence",
    "load_instance",
    "modified_terminal",
    "r_go_1",
    "r_hopf",
    "r_static",
    "r_ub",
    "save_instance",
    "solve_r_go_inf",
    "terminal_g",
    "upwind_step",
    "zeta",
]
