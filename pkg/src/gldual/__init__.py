"""Finite-difference primal and dual solvers for a Ginzburg-Landau double-well energy.

Grids are 1D or 2D with Dirichlet data. The package provides solvers for
both sides and machine checks of the zero-duality-gap relations.
"""

from .dual import (
    BranchReport,
    DualPair,
    check_B_star,
    check_C_star,
    eval_F_star,
    eval_G_star,
    eval_J1_star,
    eval_J2_star,
    eval_J_star,
    grad_G_star_v1,
    grad_J1_star,
    lambda_branch_check,
    recover_u,
    v0_of_v1,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    GLDualError,
    InfeasibleError,
)
from .grid import DomainSpec, EllipticOperator, Grid, build_grid, inner, integrate, laplacian, sup_norm
from .model import (
    ModelParams,
    check_A_plus,
    eval_F,
    eval_G,
    eval_J,
    primal_gradient,
    primal_hessian,
)
from .solvers import (
    SolveOptions,
    SolveReport,
    brute_force_min,
    min_eigenvalue,
    newton_primal,
    solve_dual,
    solve_spd,
)
from .verify import (
    DualityReport,
    convexity_probe,
    dual_pair_from_primal,
    duality_gap,
    legendre_identities,
    u_tilde_proxy,
)

__version__ = "0.1.0"

__all__ = [
    "BranchReport",
    "ConfigurationError",
    "ConvergenceError",
    "DomainError",
    "DomainSpec",
    "DualPair",
    "DualityReport",
    "EllipticOperator",
    "GLDualError",
    "Grid",
    "InfeasibleError",
    "ModelParams",
    "SolveOptions",
    "SolveReport",
    "brute_force_min",
    "build_grid",
    "check_A_plus",
    "check_B_star",
    "check_C_star",
    "convexity_probe",
    "dual_pair_from_primal",
    "duality_gap",
    "eval_F",
    "eval_F_star",
    "eval_G",
    "eval_G_star",
    "eval_J",
    "eval_J1_star",
    "eval_J2_star",
    "eval_J_star",
    "grad_G_star_v1",
    "grad_J1_star",
    "inner",
    "integrate",
    "lambda_branch_check",
    "laplacian",
    "legendre_identities",
    "min_eigenvalue",
    "newton_primal",
    "primal_gradient",
    "primal_hessian",
    "recover_u",
    "solve_dual",
    "solve_spd",
    "sup_norm",
    "u_tilde_proxy",
    "v0_of_v1",
]
