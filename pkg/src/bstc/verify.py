"""Independent checks of a candidate solution.

Derivatives are always recomputed from the nodal values.  At nodes where a
coefficient jumps the equation only holds almost everywhere, so the
quadratic-form and branch checks skip those nodes and list them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bracket import BracketPair
from .dirichlet import semilinear_residual
from .grid import GridFunction
from .model import ProblemSpec

RES_TOL = 1e-8
BC_TOL = 1e-6
BRACKET_TOL = 1e-9


def _fresh(V: GridFunction) -> GridFunction:
    return GridFunction(np.array(V.grid), np.array(V.values))


def _sides(spec: ProblemSpec, V: GridFunction):
    return spec.node_sides(V.n)


def quadratic_residual(spec: ProblemSpec, V: GridFunction) -> np.ndarray:
    """``x^3 V''^2 + p x^2 V'' + q (x V' - V)`` at interior nodes (NaN at ends).

    At coefficient jumps the two one-sided forms are averaged.
    """
    V = _fresh(V)
    s = _sides(spec, V)
    x = V.grid[1:-1]
    d2 = V.d2[1:-1]
    w = x * V.d1[1:-1] - V.values[1:-1]
    lo = x**3 * d2**2 + s.p_lo * x**2 * d2 + s.q_lo * w
    hi = x**3 * d2**2 + s.p_hi * x**2 * d2 + s.q_hi * w
    out = np.full(V.grid.size, np.nan)
    out[1:-1] = 0.5 * (lo + hi)
    return out


def quadratic_scale(spec: ProblemSpec, V: GridFunction) -> float:
    """Bound on ``d/ds (x^3 s^2 + p x^2 s)`` near the solution.

    A semilinear residual ``r`` moves the quadratic form by about this
    factor times ``r``.
    """
    V = _fresh(V)
    s = _sides(spec, V)
    x = V.grid[1:-1]
    p = np.maximum(s.p_lo, s.p_hi)
    return float(max(1.0, np.max(2 * x**3 * np.abs(V.d2[1:-1]) + p * x**2)))


@dataclass
class BranchVerdict:
    passed: bool
    worst_gap: float
    worst_x: float
    minus_branch_nodes: list = field(default_factory=list)
    no_real_root_nodes: list = field(default_factory=list)
    skipped_nodes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_gap": self.worst_gap,
            "worst_x": self.worst_x,
            "minus_branch_nodes": self.minus_branch_nodes[:20],
            "no_real_root_nodes": self.no_real_root_nodes[:20],
            "skipped_nodes": self.skipped_nodes,
        }


def branch_check(spec: ProblemSpec, V: GridFunction, tol: float = 2 * RES_TOL) -> BranchVerdict:
    """Does ``V''`` sit on the convex root of the quadratic in ``V''``?

    The roots are ``(-p x^2 +- sqrt(p^2 x^4 - 4 q x^3 (x V' - V))) / (2 x^3)``.
    The check fails at a node if the minus root fits better, if no real root
    exists, or if the distance to the plus root exceeds ``tol``.
    """
    V = _fresh(V)
    s = _sides(spec, V)
    x = V.grid[1:-1]
    keep = ~s.breaks
    p, q = s.p_lo, s.q_lo
    d2 = V.d2[1:-1]
    w = x * V.d1[1:-1] - V.values[1:-1]
    rad = p**2 * x**4 - 4 * q * x**3 * w
    real = rad >= 0
    root = np.sqrt(np.where(real, rad, 0.0))
    plus = (-p * x**2 + root) / (2 * x**3)
    minus = (-p * x**2 - root) / (2 * x**3)
    gap_plus = np.abs(d2 - plus)
    gap_minus = np.abs(d2 - minus)
    minus_better = keep & real & (gap_minus < gap_plus)
    no_root = keep & ~real
    too_far = keep & real & (gap_plus > tol)
    gaps = np.where(keep & real, gap_plus, 0.0)
    i = int(np.argmax(gaps)) if gaps.size else 0
    bad = minus_better | no_root | too_far
    return BranchVerdict(
        not bool(np.any(bad)),
        float(gaps[i]) if gaps.size else 0.0,
        float(x[i]) if gaps.size else float("nan"),
        [float(v) for v in x[minus_better]],
        [float(v) for v in x[no_root]],
        [float(v) for v in x[s.breaks]],
    )


@dataclass
class Check:
    passed: bool
    worst: float
    worst_x: float
    tol: float
    note: str = ""

    def to_dict(self) -> dict:
        out = {"passed": self.passed, "worst": self.worst, "worst_x": self.worst_x, "tol": self.tol}
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class SolutionReport:
    checks: dict
    excluded_nodes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {k: c.to_dict() for k, c in self.checks.items()},
            "excluded_nodes": self.excluded_nodes,
        }


def _worst(values: np.ndarray, x: np.ndarray, largest: bool = True) -> tuple[float, float]:
    if values.size == 0:
        return 0.0, float("nan")
    i = int(np.nanargmax(values) if largest else np.nanargmin(values))
    return float(values[i]), float(x[i])


def monotone_tolerance(V: GridFunction, res_tol: float) -> float:
    """Allowance for ``x V' - V`` to dip between neighbouring nodes.

    Increments are ``x V'' h`` up to an ``O(h^2)`` difference error, which the
    allowance covers with a factor-ten margin.
    """
    scale = 1.0 + float(np.max(np.abs(V.d2))) + float(np.max(np.abs(V.values)))
    return res_tol * (1.0 + float(np.max(np.abs(V.values)))) + 10.0 * V.h**2 * scale


def full_check(
    spec: ProblemSpec,
    bracket: BracketPair | None,
    V: GridFunction,
    res_tol: float = RES_TOL,
    bc_tol: float = BC_TOL,
    bracket_tol: float = BRACKET_TOL,
) -> SolutionReport:
    """Run every solution-level check and collect them in a report."""
    V = _fresh(V)
    x = V.grid
    xi = x[1:-1]
    sides = _sides(spec, V)
    checks: dict[str, Check] = {}

    r = np.abs(semilinear_residual(spec, V)[1:-1])
    worst, wx = _worst(r, xi)
    checks["semilinear_residual"] = Check(worst <= res_tol, worst, wx, res_tol)

    rq = np.abs(quadratic_residual(spec, V)[1:-1])
    rq_kept = np.where(sides.breaks, 0.0, rq)
    qtol = 2.0 * res_tol * quadratic_scale(spec, V)
    worst, wx = _worst(rq_kept, xi)
    checks["quadratic_residual"] = Check(
        worst <= qtol, worst, wx, qtol, "scaled by the derivative of the quadratic form"
    )

    bv = branch_check(spec, V, 2 * res_tol)
    checks["plus_branch"] = Check(bv.passed, bv.worst_gap, bv.worst_x, 2 * res_tol)

    d2 = V.d2[1:-1]
    worst, wx = _worst(-d2, xi)
    checks["convexity"] = Check(worst <= res_tol, -worst, wx, res_tol, "minimum second difference")

    w = x * V.d1 - V.values
    allowance = res_tol * (1.0 + np.abs(V.values))
    worst, wx = _worst(w - allowance, x)
    checks["xVprime_minus_V_nonpositive"] = Check(
        worst <= 0.0, float(np.max(w)), float(x[int(np.argmax(w))]), res_tol, "tolerance scales with 1+|V|"
    )

    mtol = monotone_tolerance(V, res_tol)
    dw = np.diff(w)
    worst, wx = _worst(-dw, x[1:])
    checks["xVprime_minus_V_nondecreasing"] = Check(worst <= mtol, -worst, wx, mtol, "minimum increment")

    if bracket is not None:
        a, b = bracket.alpha(x), bracket.beta(x)
        slack = bracket_tol * (1.0 + np.abs(V.values))
        excess = np.maximum(a - V.values, V.values - b)
        worst, wx = _worst(excess, x)
        ok = bool(np.all(excess <= slack))
        checks["bracketed"] = Check(
            ok, worst, wx, bracket_tol, "largest excess over [alpha, beta]; tolerance scales with 1+|V|"
        )

    for name, B, idx in (("bc_left", spec.bc.B1, 0), ("bc_right", spec.bc.B2, -1)):
        val = abs(float(B.bind(V)(V.values[idx])))
        checks[name] = Check(val <= bc_tol, val, float(x[idx]), bc_tol)

    return SolutionReport(checks, [float(v) for v in xi[sides.breaks]])
