"""Finite-difference solver for ``V'' + H(x, V, V') = 0`` with fixed end values.

Central differences on a uniform grid turn the problem into a tridiagonal
nonlinear system, solved by damped Newton with a Picard sweep as fallback.
At nodes where ``p`` or ``q`` jump, ``H`` is the mean of its two one-sided
values, which keeps the scheme second-order accurate when the jumps sit on
grid nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import solve_banded

from .bracket import BracketPair
from .grid import GridFunction, uniform_grid
from .model import H_sides, ProblemSpec, dH_dw_sides

log = logging.getLogger(__name__)

Which = Literal["greatest", "least"]


class DirichletError(RuntimeError):
    pass


class NonConvergenceError(DirichletError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class BracketViolationError(DirichletError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    n: int = 2048
    res_tol: float = 1e-8
    max_iter: int = 200
    damping: float = 1.0
    min_step: float = 2.0**-20
    seed: int = 0
    probe_seeds: int = 3
    unique_tol: float = 1e-6
    bracket_tol: float = 1e-9
    clamp: bool = True
    fix_tol: float = 1e-8
    max_outer: int = 100
    zero_tol: float = 1e-10
    cert_n: int = 4097

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and at least 8, got {self.n}")


@dataclass(frozen=True)
class DirichletProblem:
    spec: ProblemSpec
    Vc: float
    Vd: float
    bracket: BracketPair

    def __post_init__(self):
        c, d = self.spec.c, self.spec.d
        a, b = self.bracket.alpha, self.bracket.beta
        slack = 1e-12
        for x0, v in ((c, self.Vc), (d, self.Vd)):
            lo, hi = float(a(x0)), float(b(x0))
            if not (lo - slack * (1 + abs(lo)) <= v <= hi + slack * (1 + abs(hi))):
                raise BracketViolationError(
                    f"boundary value {v} at x={x0} lies outside [{lo}, {hi}]"
                )


@dataclass
class DirichletSolution:
    solution: GridFunction
    which: str
    seed: str
    iterations: int
    residual: float
    picard_sweeps: int = 0
    unique: bool | None = None
    probe_spread: float | None = None
    flags: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "which": self.which,
            "seed": self.seed,
            "iterations": self.iterations,
            "max_residual": self.residual,
            "picard_sweeps": self.picard_sweeps,
            "unique_in_bracket_empirical": self.unique,
            "probe_spread": self.probe_spread,
            "flags": list(self.flags),
        }


def _interior_residual(V: np.ndarray, h: float, sides) -> np.ndarray:
    z = (V[2:] - V[:-2]) / (2.0 * h)
    return (V[2:] - 2.0 * V[1:-1] + V[:-2]) / (h * h) + H_sides(sides, V[1:-1], z)


def semilinear_residual(spec: ProblemSpec, V: GridFunction) -> np.ndarray:
    """``V''_i + H(x_i, V_i, V'_i)`` at interior nodes; NaN at the two ends."""
    out = np.full(V.grid.size, np.nan)
    if V.c != spec.c or V.d != spec.d:
        raise ValueError("grid function lives on a different interval")
    sides = spec.node_sides(V.n)
    out[1:-1] = V.d2[1:-1] + H_sides(sides, V.values[1:-1], V.d1[1:-1])
    return out


def residual(pb: DirichletProblem, V: GridFunction) -> np.ndarray:
    return semilinear_residual(pb.spec, V)


class _Newton:
    def __init__(self, pb: DirichletProblem, cfg: SolverConfig):
        self.pb, self.cfg = pb, cfg
        spec = pb.spec
        self.x = uniform_grid(spec.c, spec.d, cfg.n)
        self.h = (spec.d - spec.c) / cfg.n
        self.sides = spec.node_sides(cfg.n)
        self.lo = np.asarray(pb.bracket.alpha(self.x), dtype=float)
        self.hi = np.asarray(pb.bracket.beta(self.x), dtype=float)
        self.lo[0] = min(self.lo[0], pb.Vc)
        self.hi[0] = max(self.hi[0], pb.Vc)
        self.lo[-1] = min(self.lo[-1], pb.Vd)
        self.hi[-1] = max(self.hi[-1], pb.Vd)
        pin_tol = 1e-13 * np.maximum(1.0, np.abs(self.hi))
        self.pinned = (self.hi - self.lo) <= pin_tol
        self.pinned[0] = self.pinned[-1] = False
        self.free = ~self.pinned[1:-1]

    def prepare(self, seed: np.ndarray) -> np.ndarray:
        V = np.array(seed, dtype=float)
        V[0], V[-1] = self.pb.Vc, self.pb.Vd
        V[self.pinned] = self.hi[self.pinned]
        return self._clamp(V)

    def _clamp(self, V):
        if self.cfg.clamp:
            V[1:-1] = np.clip(V[1:-1], self.lo[1:-1], self.hi[1:-1])
        return V

    def F(self, V):
        r = _interior_residual(V, self.h, self.sides)
        return np.where(self.free, r, 0.0)

    def jacobian(self, V):
        h = self.h
        xi = self.x[1:-1]
        z = (V[2:] - V[:-2]) / (2.0 * h)
        g = dH_dw_sides(self.sides, V[1:-1], z)
        Hy, Hz = -g, xi * g
        m = xi.size
        ab = np.zeros((3, m))
        ab[0, 1:] = 1.0 / h**2 + Hz[:-1] / (2.0 * h)
        ab[1] = -2.0 / h**2 + Hy
        ab[2, :-1] = 1.0 / h**2 - Hz[1:] / (2.0 * h)
        if not np.all(self.free):
            fixed = ~self.free
            ab[1, fixed] = 1.0
            ab[0, 1:][fixed[:-1]] = 0.0
            ab[2, :-1][fixed[1:]] = 0.0
        if not np.all(np.isfinite(ab)):
            raise FloatingPointError("non-finite Jacobian entry")
        return ab

    def picard(self, V):
        """One sweep of ``V_new'' = -H(x, V, V')`` with the same end values."""
        h = self.h
        z = (V[2:] - V[:-2]) / (2.0 * h)
        rhs = -H_sides(self.sides, V[1:-1], z) * h * h
        rhs = rhs.copy()
        rhs[0] -= V[0]
        rhs[-1] -= V[-1]
        m = rhs.size
        ab = np.zeros((3, m))
        ab[0, 1:] = 1.0
        ab[1] = -2.0
        ab[2, :-1] = 1.0
        out = V.copy()
        out[1:-1] = solve_banded((1, 1), ab, rhs)
        out[self.pinned] = self.hi[self.pinned]
        return self._clamp(out)

    def run(self, seed: np.ndarray):
        cfg = self.cfg
        V = self.prepare(seed)
        F = self.F(V)
        norm = float(np.max(np.abs(F)))
        sweeps = 0
        for it in range(cfg.max_iter):
            if norm <= cfg.res_tol:
                return V, it, norm, sweeps
            try:
                dV = solve_banded((1, 1), self.jacobian(V), -F)
            except (np.linalg.LinAlgError, ValueError, FloatingPointError):
                dV = None
            accepted = False
            if dV is not None and np.all(np.isfinite(dV)):
                l2 = float(np.linalg.norm(F))
                t = cfg.damping
                while t >= cfg.min_step:
                    trial = V.copy()
                    trial[1:-1] += t * dV
                    trial = self._clamp(trial)
                    Ft = self.F(trial)
                    if np.linalg.norm(Ft) < l2:
                        V, F, accepted = trial, Ft, True
                        break
                    t *= 0.5
            if not accepted:
                V = self.picard(V)
                F = self.F(V)
                sweeps += 1
            norm = float(np.max(np.abs(F)))
        if norm <= cfg.res_tol:
            return V, cfg.max_iter, norm, sweeps
        raise NonConvergenceError(f"Newton did not converge in {cfg.max_iter} iterations", norm)


def _check_bracket(newton: _Newton, V: np.ndarray, tol: float):
    slack = tol * (1.0 + np.abs(V))
    below = newton.lo - V > slack
    above = V - newton.hi > slack
    if np.any(below | above):
        i = int(np.flatnonzero(below | above)[0])
        raise BracketViolationError(
            f"solution leaves the bracket at x={newton.x[i]}: "
            f"{newton.lo[i]} <= {V[i]} <= {newton.hi[i]} fails"
        )


def _random_seed(newton: _Newton, rng: np.random.Generator) -> np.ndarray:
    t = (newton.x - newton.x[0]) / (newton.x[-1] - newton.x[0])
    k = rng.integers(1, 4)
    u = rng.uniform(0.1, 0.9) + rng.uniform(-0.1, 0.1) * np.sin(np.pi * k * t)
    return newton.lo + np.clip(u, 0.0, 1.0) * (newton.hi - newton.lo)


def solve_extremal(
    pb: DirichletProblem, which: Which = "greatest", cfg: SolverConfig | None = None
) -> DirichletSolution:
    """Solve the Dirichlet problem inside ``pb.bracket``.

    The iteration is seeded at ``beta`` for the greatest and at ``alpha`` for
    the least solution, then up to ``cfg.probe_seeds`` random admissible
    seeds are tried.  If they all land within ``cfg.unique_tol`` of the first
    result the solution is marked unique in the bracket (an empirical
    statement).  Otherwise the nodewise extremum of the solutions found is
    used to reseed and the result is flagged.
    """
    if which not in ("greatest", "least"):
        raise ValueError(f"which must be 'greatest' or 'least', got {which!r}")
    cfg = cfg or SolverConfig()
    newton = _Newton(pb, cfg)
    seed_kind = "beta" if which == "greatest" else "alpha"
    V, iters, res, sweeps = newton.run(newton.hi if which == "greatest" else newton.lo)
    flags = []

    unique, spread = None, None
    if cfg.probe_seeds > 0:
        rng = np.random.default_rng(cfg.seed)
        found = [V]
        for _ in range(cfg.probe_seeds):
            try:
                W, *_ = newton.run(_random_seed(newton, rng))
            except NonConvergenceError:
                flags.append("probe seed did not converge")
                continue
            found.append(W)
        spread = max(float(np.max(np.abs(W - V))) for W in found)
        unique = spread <= cfg.unique_tol
        if not unique:
            stack = np.vstack(found)
            ext = stack.max(axis=0) if which == "greatest" else stack.min(axis=0)
            flags.append("multiple solutions found in bracket; reseeded at nodewise extremum")
            log.warning("Dirichlet problem: solutions differ by %.3e between seeds", spread)
            V, iters, res, sweeps = newton.run(ext)
            seed_kind = "nodewise-" + ("max" if which == "greatest" else "min")

    _check_bracket(newton, V, cfg.bracket_tol)
    return DirichletSolution(
        GridFunction(newton.x, V), which, seed_kind, iters, res, sweeps, unique, spread, flags
    )
