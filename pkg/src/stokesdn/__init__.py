"""Dirichlet-Neumann operator for periodic surfaces over infinite depth and Stokes wave branches."""
from ._backend import backend_name
from .analytic_spaces import NormParams, PeriodicFunction, norm_sigma_s, product
from .dirichlet_neumann import DNConfig, DNOperator, apply_dn, dn_oracle_manufactured, verify_suite
from .halfspace import ExpPolyProfile, HalfCylinderFunction, WeightedNormParams, norm_sigma_s_a
from .poisson import solve_poisson
from .stokes import (
    StokesBranch,
    StokesConfig,
    StokesSolution,
    SymmetricPair,
    continue_branch,
    f_map,
    kernel_vector,
    linearized_inverse_at_zero,
    newton_solve,
)

__version__ = "0.1.0"

__all__ = [
    "DNConfig",
    "DNOperator",
    "ExpPolyProfile",
    "HalfCylinderFunction",
    "NormParams",
    "PeriodicFunction",
    "StokesBranch",
    "StokesConfig",
    "StokesSolution",
    "SymmetricPair",
    "WeightedNormParams",
    "apply_dn",
    "backend_name",
    "continue_branch",
    "dn_oracle_manufactured",
    "f_map",
    "kernel_vector",
    "linearized_inverse_at_zero",
    "newton_solve",
    "norm_sigma_s",
    "norm_sigma_s_a",
    "product",
    "solve_poisson",
    "verify_suite",
]
