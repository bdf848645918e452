"""Rational Krylov projection solver for large algebraic Riccati equations."""

from .dense_core import solve_lyapunov_dense, solve_riccati_dense
from .problem_io import (
    AREInstance,
    gen_grcar_problem,
    gen_laplacian_problem,
    gen_random_problem,
    gen_toeplitz_problem,
    load_instance,
    load_matrix_market,
)
from .rksm import LowRankSolution, SolverOptions, solve

__version__ = "0.1.0"

__all__ = [
    "AREInstance",
    "LowRankSolution",
    "SolverOptions",
    "gen_grcar_problem",
    "gen_laplacian_problem",
    "gen_random_problem",
    "gen_toeplitz_problem",
    "load_instance",
    "load_matrix_market",
    "solve",
    "solve_lyapunov_dense",
    "solve_riccati_dense",
]
