"""Sparse continuous-time (A, B) estimation from sampled data."""
from .gn import (GNState, KKTReport, ReconstructResult, ResidualContext, SolverOptions, Subproblem,
                 directional_derivative, estimate_noise_covariance, gradient_phi, initial_guess,
                 jacobian_A, jacobian_B, kkt_check, lambda_grid, lambda_sweep, least_squares_discrete,
                 line_search, objective, reconstruct, residual, solve_subproblem)
from .qp import QPResult, QPSettings, solve_qp

__all__ = [
    "GNState", "KKTReport", "ReconstructResult", "ResidualContext", "SolverOptions", "Subproblem",
    "directional_derivative", "estimate_noise_covariance", "gradient_phi", "initial_guess",
    "jacobian_A", "jacobian_B", "kkt_check", "lambda_grid", "lambda_sweep", "least_squares_discrete",
    "line_search", "objective", "reconstruct", "residual", "solve_subproblem",
    "QPResult", "QPSettings", "solve_qp",
]
