"""Acceptance gate: one test per criterion, each reported as PASS or FAIL in
the terminal summary."""

import functools
import math
import time

import numpy as np
import pytest

import cases
import conftest
from oracles import Shooting, brute_force_zeros
from bstc.bracket import (
    PiecewiseSmoothFn,
    certify,
    dirichlet_bracket,
    k_rhs,
    make_alpha1,
    make_alpha2,
    make_beta,
    solve_k,
)
from bstc.dirichlet import DirichletProblem, SolverConfig, solve_extremal
from bstc.funcbc import BoundaryConditionPair, extremal_zero
from bstc.grid import GridFunction, uniform_grid
from bstc.iterate import apply_G, extremal_fixed_point
from bstc.model import ProblemSpec, eval_H, nagumo_bounds
from bstc.verify import full_check


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                conftest.ACCEPTANCE[name] = (False, msg[:160])
                raise
            conftest.ACCEPTANCE[name] = (True, f"{time.perf_counter() - t0:.2f}s")

        return run

    return wrap


def _solve_dirichlet(spec, which="greatest", k=None, n=2048):
    br = dirichlet_bracket(spec, k=k)
    assert br.certified, br.violations()
    sol = solve_extremal(DirichletProblem(spec, spec.Vc, spec.Vd, br), which, SolverConfig(n=n))
    return br, sol


@criterion("1 floor-coefficient Dirichlet problem")
def test_criterion_1_floor_problem():
    t0 = time.perf_counter()
    spec = cases.spec_floor()

    # (a) k = 12 admissible; least k matches the closed form
    assert k_rhs(spec, 9.0, 1.0, 12.0) <= 12.0
    make_alpha2(spec, 9.0, 1.0, 12.0, check=True)
    k = solve_k(spec, 9.0, 1.0)
    assert abs(k - cases.K_LEAST_FLOOR) <= 1e-9

    # (b) closed-form bracket pieces
    a2 = make_alpha2(spec, 9.0, 1.0, 12.0)
    assert list(a2.pieces[0].f.coef) == [85.0, -50.0, 6.0]
    assert list(make_beta(spec, 9.0, 1.0).pieces[0].f.coef) == [13.0, -2.0]
    assert list(make_alpha1(spec, 1.0).pieces[0].f.coef) == [0.0, 1.0 / 6.0]

    # (c) solver output
    br, sol = _solve_dirichlet(spec, k=12.0)
    V = sol.solution
    x = V.grid
    lower = np.maximum(x / 6, 6 * x**2 - 50 * x + 85)
    upper = 13 - 2 * x
    assert np.all(V.values >= lower - 1e-9 * (1 + np.abs(V.values)))
    assert np.all(V.values <= upper + 1e-9 * (1 + np.abs(V.values)))
    rep = full_check(spec, br, V)
    assert rep.passed, rep.failed()
    assert sol.residual <= 1e-8

    # (d) independent shooting oracle
    sh = Shooting(lambda t: 1 + t**3, math.floor, 2.0, 6.0, breaks=(3, 4, 5))
    _, W = sh.solve(9.0, 1.0, bracket=(-10.0, 0.0))
    err = float(np.max(np.abs(V.values - W(x))))
    assert err <= 1e-5, err
    assert time.perf_counter() - t0 < 10.0


@criterion("2 special-case exactness")
def test_criterion_2_special_cases():
    # Vd/d = Vc/c: the line through the origin
    for Vc, Vd, p, q in [(2.0, 6.0, "1 + x^3", "floor(x)"), (1.0, 3.0, "2", "x")]:
        t0 = time.perf_counter()
        spec = ProblemSpec(2.0, 6.0, p, q, BoundaryConditionPair.dirichlet(Vc, Vd))
        _, sol = _solve_dirichlet(spec)
        x = sol.solution.grid
        assert float(np.max(np.abs(sol.solution.values - Vd / 6.0 * x))) <= 1e-10
        assert time.perf_counter() - t0 < 1.0

    # Vc = Vd: the constant, for the listed coefficient pairs
    failures = []
    for p, q in [("1 + x", "0"), ("1 + x^3", "floor(x)")]:
        t0 = time.perf_counter()
        spec = ProblemSpec(2.0, 6.0, p, q, BoundaryConditionPair.dirichlet(5.0, 5.0))
        _, sol = _solve_dirichlet(spec)
        dev = float(np.max(np.abs(sol.solution.values - 5.0)))
        if dev > 1e-10:
            failures.append(f"p={p}, q={q}: sup|V - 5| = {dev:.3e}")
        assert time.perf_counter() - t0 < 1.0
    assert not failures, "; ".join(failures)


@criterion("3 alpha1 certification iff Vd/d <= Vc/c")
def test_criterion_3_alpha1_equivalence():
    rng = np.random.default_rng(3)
    seen = {True: 0, False: 0}
    for i in range(100):
        c = rng.uniform(0.2, 4.0)
        d = c + rng.uniform(0.5, 6.0)
        Vc = rng.uniform(0.1, 20.0)
        # keep the ratio gap away from the 1e-12 tolerance band, with some exact ties
        gap = 0.0 if i % 10 == 0 else rng.choice([-1, 1]) * 10 ** rng.uniform(-6, 0)
        Vd = d * (Vc / c + gap)
        if Vd <= 0:
            Vd = d * Vc / c * rng.uniform(0.01, 1.0)
        p = f"{rng.uniform(0, 3):.6f} + {rng.uniform(0, 1):.6f} * x^2"
        q = f"{rng.uniform(0, 3):.6f}"
        spec = ProblemSpec(c, d, p, q, BoundaryConditionPair.dirichlet(Vc, Vd))
        expected = Vd / d <= Vc / c + 1e-12
        cert = certify(make_alpha1(spec, Vd), spec, "lower")
        assert cert.passed == expected, (c, d, Vc, Vd, cert.violations)
        seen[expected] += 1
    assert seen[True] > 10 and seen[False] > 10


@criterion("4 mean-fraction and integer-part problem")
def test_criterion_4_meanint_problem():
    t0 = time.perf_counter()
    spec = cases.spec_meanint()
    br = cases.bracket_meanint(spec)
    assert br.alpha_cert.passed, br.alpha_cert.violations
    assert br.beta_cert.passed, br.beta_cert.violations
    assert br.certified

    for which in ("greatest", "least"):
        V, trace = extremal_fixed_point(spec, br, which, SolverConfig())
        assert trace.converged and trace.steps <= 100
        assert math.floor(V.values[-1]) == 4
        assert abs(V.values[0] - V.integral() / 6.0) <= 1e-6
        assert abs(V.values[0] - cases.SHOOT_MEANINT_VC) <= 1e-6
        rep = full_check(spec, br, V)
        assert rep.passed, rep.failed()

    # d = 2c: the linear lower solution no longer certifies
    narrow = cases.spec_meanint(c=1.0, d=2.0)
    alpha = PiecewiseSmoothFn.polynomial(1.0, 2.0, [0.0, 4.5 / 2.0])
    assert not certify(alpha, narrow, "lower").passed
    assert time.perf_counter() - t0 < 30.0


@criterion("5 monotonicity of G")
def test_criterion_5_monotone_G():
    spec = cases.spec_meanint()
    br = cases.bracket_meanint(spec)
    cfg = SolverConfig()
    x = uniform_grid(spec.c, spec.d, cfg.n)
    a, b = br.alpha(x), br.beta(x)
    rng = np.random.default_rng(5)
    for _ in range(50):
        u = np.sort(rng.random((2, x.size)), axis=0)
        # mix rough nodewise noise with smooth profiles
        if rng.random() < 0.5:
            s = np.sort(rng.random(2))
            u = np.vstack([s[0] * np.ones_like(x), s[1] * np.ones_like(x)]) * np.sin(np.pi * (x - 1) / 3) ** 2
        g1 = GridFunction(x, a + u[0] * (b - a))
        g2 = GridFunction(x, a + u[1] * (b - a))
        G1 = apply_G(spec, br, g1, "greatest", cfg)
        G2 = apply_G(spec, br, g2, "greatest", cfg)
        assert np.all(G1.values <= G2.values + 1e-7)

    V = GridFunction(x, b)
    for _ in range(100):
        W = apply_G(spec, br, V, "greatest", cfg)
        assert np.all(W.values <= V.values + 1e-7)
        if np.max(np.abs(W.values - V.values)) < cfg.fix_tol:
            break
        V = W


@criterion("6 structural invariants")
def test_criterion_6_invariants():
    rng = np.random.default_rng(6)
    solved = []
    spec_fl = cases.spec_floor()
    br28, sol_fl = _solve_dirichlet(spec_fl, k=12.0)
    solved.append((spec_fl, br28, sol_fl.solution))
    spec_mi = cases.spec_meanint()
    br36 = cases.bracket_meanint(spec_mi)
    for which in ("greatest", "least"):
        solved.append((spec_mi, br36, extremal_fixed_point(spec_mi, br36, which)[0]))
    for Vc, Vd in [(2.0, 6.0), (9.0, 3.0), (4.0, 4.0)]:
        spec = cases.spec_floor(Vc, Vd)
        br, sol = _solve_dirichlet(spec)
        solved.append((spec, br, sol.solution))

    for spec, br, V in solved:
        H = eval_H(spec, V.grid, V.values, V.d1)
        assert np.all(H <= 0.0)
        rep = full_check(spec, br, V)
        assert rep.passed, rep.failed()

    # Nagumo growth bound on random admissible triples
    for spec, br in [(spec_fl, br28), (spec_mi, br36)]:
        xs = spec.certification_grid()
        sup = float(max(np.max(np.abs(br.alpha(xs))), np.max(np.abs(br.beta(xs)))))
        nb = nagumo_bounds(spec, float(br.beta(spec.d)), bracket_sup=sup)
        m = 5000
        x = rng.uniform(spec.c, spec.d, m)
        y = br.alpha(x) + rng.random(m) * (br.beta(x) - br.alpha(x))
        z = rng.choice([-1, 1], m) * 10 ** rng.uniform(-4, 3, m)
        H = eval_H(spec, x, y, z)
        assert np.all(H <= 0.0)
        assert np.all(np.abs(H) <= nb.bound(z) * (1 + 1e-12))

    # second-order refinement on the floor problem
    vals = {}
    for n in (512, 1024, 2048):
        vals[n] = _solve_dirichlet(spec_fl, k=12.0, n=n)[1].solution.values
    e1 = float(np.max(np.abs(vals[512] - vals[1024][::2])))
    e2 = float(np.max(np.abs(vals[1024] - vals[2048][::2])))
    assert 3.5 <= e1 / e2 <= 4.5, e1 / e2


def _step_affine(rng):
    """Nonincreasing steps plus an increasing affine part, bracketed on [0, 1]."""
    k = int(rng.integers(1, 6))
    while True:
        jumps = np.sort(rng.uniform(0.05, 0.95, k))
        if k == 1 or np.min(np.diff(jumps)) > 1e-3:
            break
    heights = rng.uniform(0.05, 1.0, k)
    slope = rng.uniform(0.5, 5.0)
    offset = rng.uniform(-slope, 0.0)
    total = heights.sum()

    def h(y):
        y = np.asarray(y, dtype=float)
        steps = (y[..., None] > jumps).astype(float) @ heights if y.ndim else float(np.dot(y > jumps, heights))
        return slope * y + offset + total * 0.5 - steps

    # keep h(0) <= 0 <= h(1)
    lo, hi = float(h(0.0)), float(h(1.0))
    if lo > 0 or hi < 0:
        return _step_affine(rng)
    return h


@criterion("7 extremal zero finder vs brute force")
def test_criterion_7_zero_finder():
    rng = np.random.default_rng(7)
    for _ in range(100):
        h = _step_affine(rng)
        least, greatest = brute_force_zeros(h, 0.0, 1.0, 1e-6)
        zl = extremal_zero(h, 0.0, 1.0, "least")
        zg = extremal_zero(h, 0.0, 1.0, "greatest")
        assert abs(zl.value - least) <= 1e-5, (zl, least)
        assert abs(zg.value - greatest) <= 1e-5, (zg, greatest)
