"""Monotone iteration of the operator G for functional boundary conditions.

``G(gamma)`` is the extremal solution of the Dirichlet problem whose end
values are the extremal zeros of ``B1(., gamma)`` and ``B2(., gamma)``.  G is
nondecreasing, so iterating it from ``beta`` gives a nonincreasing sequence
that converges to the greatest fixed point, and from ``alpha`` a
nondecreasing one converging to the least.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .bracket import BracketPair, certify, certify_bracket, make_alpha1, pointwise_max
from .dirichlet import DirichletProblem, DirichletSolution, SolverConfig, solve_extremal
from .funcbc import BoundaryValues, boundary_values, check_monotone
from .grid import GridFunction, uniform_grid
from .model import ProblemSpec

log = logging.getLogger(__name__)

Which = Literal["greatest", "least"]


class IterationError(RuntimeError):
    pass


class NonMonotoneTraceError(IterationError):
    pass


class FixedPointNonConvergenceError(IterationError):
    pass


@dataclass(frozen=True)
class IterationStep:
    gamma_c: float
    gamma_d: float
    delta: float
    max_abs_slope: float
    open_end: bool = False


@dataclass
class IterationTrace:
    direction: str
    iterates: list = field(default_factory=list)
    converged: bool = False
    final: GridFunction | None = None
    flags: list = field(default_factory=list)
    last_solve: DirichletSolution | None = None

    @property
    def steps(self) -> int:
        return len(self.iterates)

    def to_rows(self) -> list[dict]:
        return [
            {
                "step": k + 1,
                "gamma_c": s.gamma_c,
                "gamma_d": s.gamma_d,
                "delta": s.delta,
                "max_abs_slope": s.max_abs_slope,
                "open_end": s.open_end,
            }
            for k, s in enumerate(self.iterates)
        ]

    def summary(self) -> dict:
        last = self.iterates[-1] if self.iterates else None
        return {
            "direction": self.direction,
            "steps": self.steps,
            "converged": self.converged,
            "last_delta": last.delta if last else None,
            "gamma_c": last.gamma_c if last else None,
            "gamma_d": last.gamma_d if last else None,
            "flags": list(self.flags),
            "dirichlet": self.last_solve.summary() if self.last_solve else None,
        }


def _grid(spec: ProblemSpec, cfg: SolverConfig) -> np.ndarray:
    return uniform_grid(spec.c, spec.d, cfg.n)


def _apply(
    spec: ProblemSpec, bracket: BracketPair, gamma: GridFunction, which: Which, cfg: SolverConfig
) -> tuple[DirichletSolution, BoundaryValues]:
    bv = boundary_values(spec.bc, gamma, bracket, which, cfg.zero_tol)
    pb = DirichletProblem(spec, bv.gamma_c, bv.gamma_d, bracket)
    return solve_extremal(pb, which, cfg), bv


def apply_G(
    spec: ProblemSpec,
    bracket: BracketPair,
    gamma: GridFunction,
    which: Which = "greatest",
    cfg: SolverConfig | None = None,
) -> GridFunction:
    """One application of G to ``gamma``."""
    cfg = cfg or SolverConfig()
    if gamma.n != cfg.n:
        raise ValueError(f"gamma has {gamma.n} cells, solver expects {cfg.n}")
    return _apply(spec, bracket, gamma, which, cfg)[0].solution


def check_hypotheses(spec: ProblemSpec, bracket: BracketPair, cfg: SolverConfig) -> None:
    """Spot-check monotonicity of custom functionals on random ordered pairs."""
    x = _grid(spec, cfg)
    alpha, beta = bracket.alpha.sample(x), bracket.beta.sample(x)
    rng = np.random.default_rng(cfg.seed)
    for B in (spec.bc.B1, spec.bc.B2):
        if B.kind == "custom":
            check_monotone(B, alpha, beta, rng)


def extremal_fixed_point(
    spec: ProblemSpec,
    bracket: BracketPair,
    which: Which = "greatest",
    cfg: SolverConfig | None = None,
) -> tuple[GridFunction, IterationTrace]:
    """Iterate G from ``beta`` (greatest) or ``alpha`` (least) to a fixed point.

    Stops when the sup-norm change drops below ``cfg.fix_tol``.  When both
    functionals ignore their function argument G is constant and one step
    suffices.  A trace moving against its direction by more than
    ``10 * fix_tol`` aborts the run.
    """
    if which not in ("greatest", "least"):
        raise ValueError(f"which must be 'greatest' or 'least', got {which!r}")
    cfg = cfg or SolverConfig()
    check_hypotheses(spec, bracket, cfg)
    x = _grid(spec, cfg)
    start = bracket.beta if which == "greatest" else bracket.alpha
    V = start.sample(x)
    trace = IterationTrace("descending-from-beta" if which == "greatest" else "ascending-from-alpha")
    sign = -1.0 if which == "greatest" else 1.0
    for _ in range(cfg.max_outer):
        sol, bv = _apply(spec, bracket, V, which, cfg)
        W = sol.solution
        step = W.values - V.values
        delta = float(np.max(np.abs(step)))
        backwards = float(np.max(-sign * step))
        trace.iterates.append(
            IterationStep(
                bv.gamma_c,
                bv.gamma_d,
                delta,
                float(np.max(np.abs(W.d1))),
                bv.left.open_end or bv.right.open_end,
            )
        )
        trace.last_solve = sol
        for flag in sol.flags:
            if flag not in trace.flags:
                trace.flags.append(flag)
        if (bv.left.open_end or bv.right.open_end) and "right-open zero set" not in trace.flags:
            trace.flags.append("right-open zero set" if which == "greatest" else "left-open zero set")
        if backwards > 10 * cfg.fix_tol:
            trace.final = W
            raise NonMonotoneTraceError(
                f"trace is not monotone: step {trace.steps} moves by {backwards:.3e} "
                "against its direction (boundary functionals may violate monotonicity)"
            )
        V = W
        if spec.bc.gamma_independent or delta < cfg.fix_tol:
            trace.converged = True
            break
    trace.final = V
    if not trace.converged:
        raise FixedPointNonConvergenceError(
            f"no fixed point after {cfg.max_outer} outer steps (last delta {trace.iterates[-1].delta:.3e})"
        )
    return V, trace


@dataclass
class Refinement:
    bracket: BracketPair
    changed: bool
    reason: str


def refine_bracket_alpha1(
    spec: ProblemSpec, bracket: BracketPair, solution: GridFunction, grid_n: int | None = None
) -> Refinement:
    """Raise ``alpha`` to ``max(alpha, alpha1)`` with ``alpha1(x) = V(d) x / d``.

    The bracket is returned unchanged when ``alpha1`` is not a lower solution
    or when ``alpha`` already dominates it.
    """
    alpha1 = make_alpha1(spec, float(solution.values[-1]))
    cert = certify(alpha1, spec, "lower", grid_n)
    if not cert.passed:
        return Refinement(bracket, False, "alpha1 is not a lower solution: " + "; ".join(cert.violations))
    x = spec.certification_grid(grid_n)
    if np.any(alpha1(x) > bracket.beta(x)):
        return Refinement(bracket, False, "alpha1 exceeds beta")
    if np.all(alpha1(x) <= bracket.alpha(x)):
        return Refinement(bracket, False, "alpha already dominates alpha1")
    new_alpha = pointwise_max(bracket.alpha, alpha1)
    refined = certify_bracket(
        spec, new_alpha, bracket.beta, grid_n, info={**bracket.info, "refined_with_alpha1": True}
    )
    return Refinement(refined, True, "alpha replaced by max(alpha, alpha1)")
