import math

import numpy as np
import pytest

import cases
from oracles import H_closed, Shooting
from bstc.bracket import PiecewiseSmoothFn, certify_bracket, dirichlet_bracket
from bstc.dirichlet import (
    BracketViolationError,
    DirichletProblem,
    NonConvergenceError,
    SolverConfig,
    residual,
    semilinear_residual,
    solve_extremal,
)
from bstc.funcbc import BoundaryConditionPair
from bstc.grid import GridFunction, uniform_grid
from bstc.model import ProblemSpec, nagumo_bounds


def _solve(spec, which="greatest", **cfg):
    br = dirichlet_bracket(spec)
    return br, solve_extremal(DirichletProblem(spec, spec.Vc, spec.Vd, br), which, SolverConfig(**cfg))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(n=7)
    with pytest.raises(ValueError):
        SolverConfig(n=2049)


def test_boundary_values_inside_bracket(spec_fl, bracket_fl):
    with pytest.raises(BracketViolationError):
        DirichletProblem(spec_fl, 10.0, 1.0, bracket_fl)


def test_line_through_origin_is_exact():
    spec = cases.spec_floor(3.0, 9.0)
    _, sol = _solve(spec)
    x = sol.solution.grid
    assert np.max(np.abs(sol.solution.values - 1.5 * x)) <= 1e-12
    assert sol.solution.values[0] == 3.0 and sol.solution.values[-1] == 9.0


def test_constant_with_q_zero():
    spec = ProblemSpec(1.0, 3.0, "1 + x", 0.0, BoundaryConditionPair.dirichlet(5.0, 5.0))
    _, sol = _solve(spec)
    assert np.max(np.abs(sol.solution.values - 5.0)) <= 1e-12


def test_constant_zero_any_q():
    spec = cases.spec_floor(0.0, 0.0)
    _, sol = _solve(spec)
    assert np.max(np.abs(sol.solution.values)) <= 1e-12


def test_equal_end_values_not_constant_when_q_positive():
    spec = cases.spec_floor(5.0, 5.0)
    # the constant is not a solution: H(x, 5, 0) < 0 wherever q > 0
    assert H_closed(3.5, 1 + 3.5**3, 3.0, 5.0, 0.0) < 0
    _, sol = _solve(spec)
    dev = np.max(np.abs(sol.solution.values - 5.0))
    assert dev == pytest.approx(0.0571, abs=5e-4)
    assert np.all(sol.solution.values <= 5.0 + 1e-12)


def test_floor_problem_golden(sol_fl):
    V = sol_fl.solution
    assert abs(float(V.at(4.0)) - cases.SHOOT_FLOOR_V4) <= 1e-5
    # second order: the n = 2048 error is dominated by h^2 terms
    assert abs(float(V.at(4.0)) - cases.SHOOT_FLOOR_V4) <= 1e-6
    assert V.d1[0] == pytest.approx(cases.SHOOT_FLOOR_SLOPE, abs=1e-4)
    assert sol_fl.residual <= 1e-8
    assert sol_fl.unique is True


def test_floor_problem_shooting_sup_norm(sol_fl):
    sh = Shooting(lambda t: 1 + t**3, math.floor, 2.0, 6.0, breaks=(3, 4, 5))
    slope, W = sh.solve(9.0, 1.0, bracket=(-10.0, 0.0))
    assert slope == pytest.approx(cases.SHOOT_FLOOR_SLOPE, abs=1e-9)
    V = sol_fl.solution
    assert np.max(np.abs(V.values - W(V.grid))) <= 1e-5


def test_greatest_and_least_agree(spec_fl, bracket_fl, sol_fl):
    least = solve_extremal(DirichletProblem(spec_fl, 9.0, 1.0, bracket_fl), "least")
    assert least.seed == "alpha" and sol_fl.seed == "beta"
    assert np.max(np.abs(least.solution.values - sol_fl.solution.values)) <= 1e-9


def test_solution_shape_invariants(spec_fl, bracket_fl, sol_fl):
    V = sol_fl.solution
    x = V.grid
    assert np.all(V.d2[1:-1] >= -1e-8)
    w = x * V.d1 - V.values
    assert np.all(w <= 1e-8 * (1 + np.abs(V.values)))
    assert np.all(np.diff(w) >= -1e-6)
    assert np.all(V.values >= bracket_fl.alpha(x) - 1e-9)
    assert np.all(V.values <= bracket_fl.beta(x) + 1e-9)


def test_derivative_bound(spec_fl, bracket_fl, sol_fl):
    V = sol_fl.solution
    xs = spec_fl.certification_grid()
    sup = float(max(np.max(np.abs(bracket_fl.alpha(xs))), np.max(np.abs(bracket_fl.beta(xs)))))
    nb = nagumo_bounds(spec_fl, 1.0, bracket_sup=sup)
    bound = nb.derivative_bound(2.0, 6.0, 9.0, 1.0, 9.0, 1.0)
    assert np.max(np.abs(V.d1)) <= bound


def test_residual_of_alpha1_vanishes():
    spec = cases.spec_floor(9.0, 6.0)
    x = uniform_grid(2.0, 6.0, 64)
    br = dirichlet_bracket(spec)
    pb = DirichletProblem(spec, 9.0, 6.0, br)
    r = residual(pb, GridFunction(x, x))
    assert np.all(np.abs(r[1:-1]) <= 1e-12) and np.isnan(r[0]) and np.isnan(r[-1])


def test_residual_constant_q_zero():
    spec = ProblemSpec(1.0, 3.0, "x", 0.0, BoundaryConditionPair.dirichlet(2.0, 2.0))
    x = uniform_grid(1.0, 3.0, 32)
    assert np.all(semilinear_residual(spec, GridFunction(x, 2.0 + 0 * x))[1:-1] == 0.0)


def test_residual_of_chord_is_H(spec_fl):
    x = uniform_grid(2.0, 6.0, 64)
    r = semilinear_residual(spec_fl, GridFunction(x, 13 - 2 * x))[1:-1]
    xi = x[1:-1]
    q = np.floor(xi)
    ref = np.array([H_closed(t, 1 + t**3, qq, 13 - 2 * t, -2.0) for t, qq in zip(xi, q)])
    jumps = np.isin(xi, [3.0, 4.0, 5.0])
    np.testing.assert_allclose(r[~jumps], ref[~jumps], rtol=1e-12, atol=1e-13)
    assert np.all(r < 0)


def test_nonconvergence_reports_residual(spec_fl, bracket_fl):
    pb = DirichletProblem(spec_fl, 9.0, 1.0, bracket_fl)
    with pytest.raises(NonConvergenceError) as info:
        solve_extremal(pb, "greatest", SolverConfig(max_iter=1))
    assert info.value.residual > 1e-8


def test_deterministic(spec_fl, bracket_fl):
    pb = DirichletProblem(spec_fl, 9.0, 1.0, bracket_fl)
    a = solve_extremal(pb, "greatest", SolverConfig(n=256))
    b = solve_extremal(pb, "greatest", SolverConfig(n=256))
    assert np.array_equal(a.solution.values, b.solution.values)
    assert a.summary() == b.summary()


def test_degenerate_bracket_pinned():
    spec = cases.spec_floor(3.0, 9.0)
    line = PiecewiseSmoothFn.polynomial(2.0, 6.0, [0.0, 1.5])
    br = certify_bracket(spec, line, line)
    assert br.certified
    sol = solve_extremal(DirichletProblem(spec, 3.0, 9.0, br), "least", SolverConfig(n=64))
    assert np.array_equal(sol.solution.values, 1.5 * sol.solution.grid)


def test_probe_disabled(spec_fl, bracket_fl):
    sol = solve_extremal(DirichletProblem(spec_fl, 9.0, 1.0, bracket_fl), "greatest", SolverConfig(n=128, probe_seeds=0))
    assert sol.unique is None and sol.probe_spread is None


def test_bad_which(spec_fl, bracket_fl):
    with pytest.raises(ValueError):
        solve_extremal(DirichletProblem(spec_fl, 9.0, 1.0, bracket_fl), "middle")
