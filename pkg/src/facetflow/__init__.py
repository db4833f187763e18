"""Simulation and verification tools for ``u_t = Laplace (Laplace u)^-3``.

The height ``u`` is marched by implicit Euler steps; each step is a pair of
second-order elliptic problems in ``u`` and ``psi = -ln Laplace u``, so the
slope ``rho = exp(psi)`` stays positive by construction.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .diagnostics import (DiagnosticsReport, TestFunction, apriori_report, check_lemma21, holder_modulus,
                          interpolant_gap_report, apriori_quantities, weak_residual)
from .elliptic import (EllipticOperator, LinearSolveConfig, LinearSolveError, solve_dirichlet,
                       solve_poisson)
from .grid import (Grid, ScalarField, apply_laplacian, build_grid, dirichlet_energy, gradient_energy,
                   integrate)
from .rho_direct import PositivityLoss, RhoTrajectory, cross_validate, solve_rho_1d
from .stepper import (ProblemData, StepFailure, StepperConfig, StepState, Trajectory, ValidationError,
                      eval_interpolants, picard_map_B, psi_box_bounds, run_rothe, solve_step)

__all__ = [
    "DiagnosticsReport", "EllipticOperator", "Grid", "LinearSolveConfig", "LinearSolveError",
    "PositivityLoss", "ProblemData", "RhoTrajectory", "ScalarField", "StepFailure", "StepState",
    "StepperConfig", "TestFunction", "Trajectory", "ValidationError", "apply_laplacian", "apriori_report",
    "build_grid", "check_lemma21", "cross_validate", "dirichlet_energy", "eval_interpolants",
    "gradient_energy", "holder_modulus", "integrate", "interpolant_gap_report", "picard_map_B",
    "apriori_quantities", "psi_box_bounds", "run_rothe", "solve_dirichlet", "solve_poisson",
    "solve_rho_1d", "solve_step", "weak_residual",
]
