"""Stationary Black-Scholes equation with transaction costs on a bounded price interval.

Solves ``x^3 V''^2 + p x^2 V'' + q (x V' - V) = 0`` for convex V between
certified lower and upper solutions, with Dirichlet or functional boundary
conditions.
"""

from .bracket import BracketPair, PiecewiseSmoothFn, certify, dirichlet_bracket, solve_k
from .dirichlet import DirichletProblem, SolverConfig, solve_extremal
from .expr import CoefficientExpr, parse
from .funcbc import BoundaryConditionPair, BoundaryFunctional, extremal_zero
from .grid import GridFunction, uniform_grid
from .iterate import apply_G, extremal_fixed_point
from .model import MarketParams, ProblemSpec, coefficients_from_market, eval_H, nagumo_bounds
from .verify import full_check

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditionPair",
    "BoundaryFunctional",
    "BracketPair",
    "CoefficientExpr",
    "DirichletProblem",
    "GridFunction",
    "MarketParams",
    "PiecewiseSmoothFn",
    "ProblemSpec",
    "SolverConfig",
    "apply_G",
    "certify",
    "coefficients_from_market",
    "dirichlet_bracket",
    "eval_H",
    "extremal_fixed_point",
    "extremal_zero",
    "full_check",
    "nagumo_bounds",
    "parse",
    "solve_extremal",
    "solve_k",
    "uniform_grid",
]
