import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import cases
from oracles import H_closed
from bstc.expr import parse
from bstc.funcbc import BoundaryConditionPair
from bstc.model import (
    MarketParams,
    ProblemError,
    ProblemSpec,
    coefficients_from_market,
    dH_dw,
    eval_H,
    H_raw,
    nagumo_bounds,
)

DIR = BoundaryConditionPair.dirichlet(1.0, 1.0)


def test_market_hand_values():
    p, q = coefficients_from_market(MarketParams(0.3, 0.2, 0.05, 0.5))
    assert p() == pytest.approx(2.25, rel=1e-15)
    assert q() == pytest.approx(2.5, rel=1e-15)


def test_market_trivial_cases():
    # b = 1/(2 sigma^2) and sigma_tilde = 1 make p = 1
    sigma = 0.4
    p, q = coefficients_from_market(MarketParams(1.0, sigma, 0.0, 1 / (2 * sigma**2)))
    assert p() == pytest.approx(1.0)
    assert q() == 0.0


@pytest.mark.parametrize("kw", [dict(b=0.0), dict(sigma=0.0), dict(b=-1.0)])
def test_market_rejects_bad_params(kw):
    base = dict(sigma_tilde=0.3, sigma=0.2, r=0.05, b=0.5)
    with pytest.raises(ProblemError):
        coefficients_from_market(MarketParams(**{**base, **kw}))


@pytest.mark.parametrize("c, d", [(0.0, 1.0), (2.0, 2.0), (3.0, 1.0), (-1.0, 1.0)])
def test_interval_validation(c, d):
    with pytest.raises(ProblemError):
        ProblemSpec(c, d, 1.0, 1.0, DIR)


def test_negative_coefficient_rejected():
    with pytest.raises(ProblemError, match="negative"):
        ProblemSpec(1.0, 3.0, "x - 2", 1.0, DIR)
    with pytest.raises(ProblemError):
        ProblemSpec(1.0, 3.0, 1.0, -0.5, DIR)


def test_H_floor_problem_chord_at_c():
    spec = cases.spec_floor()
    assert eval_H(spec, 2.0, 9.0, -2.0) == pytest.approx((36 - math.sqrt(1296 + 832)) / 16, rel=1e-14)
    assert eval_H(spec, 2.0, 9.0, -2.0) == pytest.approx(H_closed(2.0, 9.0, 2.0, 9.0, -2.0), rel=1e-14)


def test_H_zero_cases():
    spec = cases.spec_floor()
    x = np.linspace(2, 6, 33)
    z = np.linspace(-3, 7, 33)
    assert np.all(eval_H(spec, x, x * z, z) == 0.0)
    y = z
    flat = ProblemSpec(2.0, 6.0, "1 + x", 0.0, DIR)
    assert np.all(eval_H(flat, x, y, np.cos(x)) == 0.0)


def test_H_outside_interval():
    with pytest.raises(ProblemError):
        eval_H(cases.spec_floor(), 1.5, 0.0, 0.0)


def test_H_p_zero_w_zero():
    assert float(H_raw(2.0, 0.0, 1.0, 2.0, 1.0)) == 0.0
    assert np.isfinite(dH_dw(2.0, 0.0, 0.0, 2.0, 1.0))


triples = st.tuples(
    st.floats(2.0, 6.0), st.floats(-50.0, 50.0), st.floats(-50.0, 50.0)
)


@given(triples)
def test_H_nonpositive_and_lower_bound(t):
    x, y, z = t
    spec = cases.spec_floor()
    H = eval_H(spec, x, y, z)
    q = math.floor(x)
    assert H <= 0.0
    assert H >= -math.sqrt(q / x**3) * math.sqrt(abs(x * z - y)) * (1 + 1e-12) - 1e-300
    assert H == pytest.approx(H_closed(x, 1 + x**3, q, y, z), rel=1e-12, abs=1e-12)


@given(st.floats(2.0, 6.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_H_nonincreasing_in_abs_w(x, w1, w2):
    spec = cases.spec_floor()
    lo, hi = sorted((w1, w2))
    # y = 0 so that w = x z
    assert eval_H(spec, x, 0.0, lo / x) >= eval_H(spec, x, 0.0, -hi / x)


@given(st.floats(2.0, 6.0), st.floats(-20.0, 20.0), st.floats(-20.0, 20.0))
def test_dH_dw_matches_difference_quotient(x, y, z):
    p, q = 1 + x**3, float(math.floor(x))
    w = x * z - y
    if abs(w) < 1e-3:
        return
    eps = 1e-6 * max(1.0, abs(w))
    num = (H_raw(x, p, q, y - eps, z) - H_raw(x, p, q, y + eps, z)) / (2 * eps)
    assert float(dH_dw(x, p, q, y, z)) == pytest.approx(float(num), rel=1e-5, abs=1e-9)


def test_nagumo_trivial():
    nb = nagumo_bounds(ProblemSpec(1.0, 2.0, 0.0, 0.0, DIR), 3.0)
    assert nb.A_hat == 0.0 and nb.B_hat == 0.0
    nb = nagumo_bounds(ProblemSpec(1.0, 2.0, 2.5, 0.0, DIR), 3.0)
    assert nb.A_hat == pytest.approx(2.5) and nb.B_hat == 0.0


def test_nagumo_floor_problem_dense_oracle():
    nb = nagumo_bounds(cases.spec_floor(), 1.0)
    x = np.linspace(2.0, 6.0, 100001)
    q = np.floor(x)
    A = np.max((1 + x**3) / x + np.sqrt(q / x**3) * 1.0)
    B = np.max(np.sqrt(q) / x)
    assert nb.bound_used == "beta_d"
    assert nb.A_hat == pytest.approx(A, rel=1e-12)
    # sqrt(q)/x peaks at the left limit of a jump; the dense grid reaches it from the left only
    assert nb.B_hat == pytest.approx(B, rel=1e-4) and nb.B_hat >= B


def test_nagumo_bracket_form():
    nb = nagumo_bounds(cases.spec_floor(), 1.0, bracket_sup=25.0)
    assert nb.bound_used == "bracket" and nb.y_factor == 5.0
    with pytest.raises(ValueError):
        nagumo_bounds(cases.spec_floor(), 1.0, grid_n=1)


def test_derivative_bound_formula():
    nb = nagumo_bounds(ProblemSpec(1.0, 4.0, 1.0, 1.0, DIR), 4.5)
    assert nb.A_hat == pytest.approx(5.5) and nb.B_hat == pytest.approx(1.0)
    got = nb.derivative_bound(1.0, 4.0, 1.125, 4.5, 4.5, 4.5)
    assert got == pytest.approx((4.5 - 1.125) / 3 + 5.5 * 3 + (2 / 3) * (8 - 1))


def test_coefficient_sides_at_jumps():
    spec = cases.spec_floor()
    s = spec.coefficient_sides([2.5, 3.0, 4.0, 6.0])
    # floor also jumps at the right end, seen from the left
    assert s.breaks.tolist() == [False, True, True, True]
    assert s.q_lo.tolist() == [2.0, 2.0, 3.0, 5.0]
    assert s.q_hi.tolist() == [2.0, 3.0, 4.0, 6.0]


def test_string_and_expr_coefficients_agree():
    a = ProblemSpec(1.0, 2.0, "2*x", "1", DIR)
    b = ProblemSpec(1.0, 2.0, parse("2*x"), 1.0, DIR)
    x = np.linspace(1, 2, 5)
    for u, v in zip(a.coefficients(x), b.coefficients(x)):
        np.testing.assert_array_equal(u, v)
