"""Unstable manifolds of local first-order systems with non-hyperbolic principal symbol."""
from .fixedpoint import (
    EPS0_BURGERS,
    EPS1_BURGERS,
    IllposednessResult,
    ManifoldParams,
    WeightedTrajectory,
    calibrate_eps0,
    calibrate_eps1,
    eigenmode,
    hs_norm,
    illposedness_experiment,
    pde_residual,
    picard_solve,
    scattering_solve,
    unstable_mode,
    weighted_norm,
)
from .operators import (
    EigenGroups,
    ModeOperator,
    ModifiedProjection,
    SemigroupConstants,
    Split,
    assemble_mode_operator,
    eigenvalue_groups,
    modified_projection,
    phi_functions,
    semigroup_bound_check,
    split,
)
from .quadrature import backward_recursion, forward_recursion, scalar_backward, scalar_forward
from .system import (
    LocalSystem,
    TaylorTerm,
    a01_norm,
    burgers_system,
    composition_bound,
    geometric_burgers_hyperbolicity,
    geometric_burgers_matrix,
    jordan_system,
    nonlinear_coeffs,
    nonlinear_eval,
)
