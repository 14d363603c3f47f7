"""Lower and upper solutions: construction and certification on a grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .expr import CoefficientExpr, eval_on_grid
from .grid import GridFunction
from .model import H_raw, ProblemSpec

Side = Literal["lower", "upper"]

KINK_TOL = 1e-7
RESIDUAL_TOL = 1e-9
BC_TOL = 1e-12
FD_EXTRA_TOL = 1e-6


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class Piece:
    """A smooth function on ``[lo, hi]``.

    ``f`` is a numpy ``Polynomial`` (exact derivatives) or a
    :class:`CoefficientExpr` (central finite-difference derivatives).
    """

    lo: float
    hi: float
    f: object

    @property
    def exact(self) -> bool:
        return isinstance(self.f, Polynomial)

    def value(self, x):
        if self.exact:
            return self.f(np.asarray(x, dtype=float))
        return eval_on_grid(self.f, np.atleast_1d(x))

    def d1(self, x):
        if self.exact:
            return self.f.deriv(1)(np.asarray(x, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = 1e-5 * max(1.0, self.hi - self.lo)
        return (self.value(x + s) - self.value(x - s)) / (2 * s)

    def d2(self, x):
        if self.exact:
            return self.f.deriv(2)(np.asarray(x, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = 1e-3 * max(1.0, self.hi - self.lo)
        return (self.value(x + s) - 2 * self.value(x) + self.value(x - s)) / (s * s)

    def slope(self, x: float) -> float:
        return float(np.atleast_1d(self.d1(x))[0])

    def describe(self) -> dict:
        if self.exact:
            return {"lo": self.lo, "hi": self.hi, "poly": [float(v) for v in self.f.coef]}
        return {"lo": self.lo, "hi": self.hi, "expr": self.f.source}


@dataclass(frozen=True)
class PiecewiseSmoothFn:
    """A continuous function given by smooth pieces tiling ``[c, d]``."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise BracketError("need at least one piece")
        for a, b in zip(pieces, pieces[1:]):
            if a.hi != b.lo:
                raise BracketError(f"pieces must tile the interval: gap or overlap at {a.hi}, {b.lo}")
        for pc in pieces:
            if not pc.lo < pc.hi:
                raise BracketError(f"empty piece [{pc.lo}, {pc.hi}]")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def polynomial(cls, c: float, d: float, coef: Sequence[float]) -> "PiecewiseSmoothFn":
        return cls((Piece(float(c), float(d), Polynomial(np.asarray(coef, dtype=float))),))

    @classmethod
    def from_expr(cls, c: float, d: float, e: CoefficientExpr) -> "PiecewiseSmoothFn":
        poly = e.to_polynomial()
        return cls((Piece(float(c), float(d), poly if poly is not None else e),))

    @property
    def c(self) -> float:
        return self.pieces[0].lo

    @property
    def d(self) -> float:
        return self.pieces[-1].hi

    @property
    def exact(self) -> bool:
        return all(pc.exact for pc in self.pieces)

    def _index(self, x: np.ndarray) -> np.ndarray:
        bounds = np.array([pc.hi for pc in self.pieces[:-1]])
        return np.searchsorted(bounds, x, side="right")

    def _apply(self, x, method: str):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xa)
        idx = self._index(xa)
        for k, pc in enumerate(self.pieces):
            m = idx == k
            if np.any(m):
                out[m] = getattr(pc, method)(xa[m])
        return float(out[0]) if np.ndim(x) == 0 else out

    def __call__(self, x):
        return self._apply(x, "value")

    def derivative(self, x):
        return self._apply(x, "d1")

    def second_derivative(self, x):
        return self._apply(x, "d2")

    def one_sided_slopes(self, x0: float) -> tuple[float, float]:
        """Left and right derivatives at ``x0``."""
        k = int(self._index(np.array([x0]))[0])
        right = self.pieces[k]
        left = self.pieces[k - 1] if (k > 0 and x0 == right.lo) else right
        return left.slope(x0), right.slope(x0)

    @property
    def breakpoints(self) -> list[float]:
        return [pc.hi for pc in self.pieces[:-1]]

    @property
    def kink_points(self) -> list[float]:
        out = []
        for x0 in self.breakpoints:
            dl, dr = self.one_sided_slopes(x0)
            if abs(dr - dl) > KINK_TOL * max(1.0, abs(dl), abs(dr)):
                out.append(x0)
        return out

    def sample(self, grid) -> GridFunction:
        grid = np.asarray(grid, dtype=float)
        return GridFunction(grid, self(grid))

    def describe(self) -> list[dict]:
        return [pc.describe() for pc in self.pieces]


def _crossings(f, g, lo: float, hi: float) -> list[float]:
    """Points in ``(lo, hi)`` where two pieces' functions cross."""
    if isinstance(f, Polynomial) and isinstance(g, Polynomial):
        diff = (f - g).trim(tol=0)
        if diff.degree() < 1 or np.all(diff.coef == 0):
            return []
        roots = diff.roots()
        real = roots[np.abs(roots.imag) <= 1e-12 * max(1.0, abs(hi))].real
        width = hi - lo
        return sorted(float(r) for r in real if lo + 1e-12 * width < r < hi - 1e-12 * width)
    pf, pg = Piece(lo, hi, f), Piece(lo, hi, g)
    xs = np.linspace(lo, hi, 513)
    dv = pf.value(xs) - pg.value(xs)
    out = []
    for a, b, fa, fb in zip(xs[:-1], xs[1:], dv[:-1], dv[1:]):
        if fa == 0 and a > lo:
            out.append(float(a))
        elif fa * fb < 0:
            out.append(brentq(lambda t: float(pf.value(t)[0] - pg.value(t)[0]), a, b, xtol=1e-14))
    return out


def _combine(a: PiecewiseSmoothFn, b: PiecewiseSmoothFn, pick_greater: bool) -> PiecewiseSmoothFn:
    if a.c != b.c or a.d != b.d:
        raise BracketError("functions live on different intervals")
    cuts = sorted(set([a.c, a.d] + a.breakpoints + b.breakpoints))
    pieces: list[Piece] = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        fa = a.pieces[int(a._index(np.array([mid]))[0])].f
        fb = b.pieces[int(b._index(np.array([mid]))[0])].f
        sub = [lo] + _crossings(fa, fb, lo, hi) + [hi]
        for s0, s1 in zip(sub[:-1], sub[1:]):
            m = 0.5 * (s0 + s1)
            va, vb = Piece(s0, s1, fa).value(m), Piece(s0, s1, fb).value(m)
            va, vb = float(np.atleast_1d(va)[0]), float(np.atleast_1d(vb)[0])
            chosen = fa if (va >= vb) == pick_greater else fb
            if pieces and pieces[-1].f is chosen:
                pieces[-1] = Piece(pieces[-1].lo, s1, chosen)
            else:
                pieces.append(Piece(s0, s1, chosen))
    return PiecewiseSmoothFn(tuple(pieces))


def pointwise_max(a: PiecewiseSmoothFn, b: PiecewiseSmoothFn) -> PiecewiseSmoothFn:
    """``max(a, b)``; transversal crossings become upward kinks."""
    return _combine(a, b, True)


def pointwise_min(a: PiecewiseSmoothFn, b: PiecewiseSmoothFn) -> PiecewiseSmoothFn:
    return _combine(a, b, False)


# -- the three closed-form constructions -------------------------------------


def make_alpha1(spec: ProblemSpec, Vd: float) -> PiecewiseSmoothFn:
    """The line through the origin and ``(d, Vd)``."""
    return PiecewiseSmoothFn.polynomial(spec.c, spec.d, [0.0, Vd / spec.d])


def make_beta(spec: ProblemSpec, Vc: float, Vd: float) -> PiecewiseSmoothFn:
    """The chord through ``(c, Vc)`` and ``(d, Vd)``."""
    c, d = spec.c, spec.d
    return PiecewiseSmoothFn.polynomial(c, d, [(d * Vc - c * Vd) / (d - c), (Vd - Vc) / (d - c)])


def k_rhs(spec: ProblemSpec, Vc: float, Vd: float, k: float, grid_n: int | None = None) -> float:
    """Right-hand side of the admissibility inequality ``k >= k_rhs(k)``.

    The inner maximum of ``|(k/2)(x^2 - cd) + Vc - slope * c|`` is attained at
    ``x = c`` or ``x = d``; a grid sweep is folded in as a safeguard.
    """
    c, d = spec.c, spec.d
    slope = (Vd - Vc) / (d - c)
    x = spec.certification_grid(grid_n)
    Q = float(np.max(spec.coefficients(x)[1]))
    inner = lambda t: np.abs(0.5 * k * (t * t - c * d) + Vc - slope * c)
    m = max(float(inner(c)), float(inner(d)), float(np.max(inner(x))))
    return float(np.sqrt(Q / c**3) * np.sqrt(m))


def solve_k(
    spec: ProblemSpec,
    Vc: float,
    Vd: float,
    k_min: float = 1e-8,
    margin: float = 5e-10,
    grid_n: int | None = None,
) -> float:
    """Least ``k > 0`` with ``k >= k_rhs(k)``, plus a small safety margin."""
    phi = lambda k: k - k_rhs(spec, Vc, Vd, k, grid_n)
    if phi(k_min) >= 0:
        return k_min
    lo, hi = k_min, max(1.0, 2 * k_min)
    while phi(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e300:
            raise BracketError("no admissible k found")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if phi(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi + margin


def make_alpha2(
    spec: ProblemSpec, Vc: float, Vd: float, k: float, check: bool = True
) -> PiecewiseSmoothFn:
    """The parabola with curvature ``k`` through both boundary points.

    With ``check`` the admissibility inequality for ``k`` is enforced.
    """
    c, d = spec.c, spec.d
    if check:
        rhs = k_rhs(spec, Vc, Vd, k)
        if not (k > 0 and k >= rhs):
            raise BracketError(f"k={k} violates k >= sqrt(Q/c^3) sqrt(max|...|) = {rhs}")
    slope = (Vd - Vc) / (d - c)
    coef = [0.5 * k * c * d + Vc - slope * c, slope - 0.5 * k * (d + c), 0.5 * k]
    return PiecewiseSmoothFn.polynomial(c, d, coef)


# -- certification ------------------------------------------------------------


@dataclass
class Certificate:
    side: str
    passed: bool
    worst_residual: float
    worst_x: float
    residual_tol: float
    kinks: list = field(default_factory=list)
    bc: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "passed": self.passed,
            "worst_residual": self.worst_residual,
            "worst_x": self.worst_x,
            "residual_tol": self.residual_tol,
            "kinks": self.kinks,
            "bc": self.bc,
            "violations": self.violations,
        }


def certify(
    candidate: PiecewiseSmoothFn,
    spec: ProblemSpec,
    side: Side,
    grid_n: int | None = None,
    tol: float = RESIDUAL_TOL,
    bc_tol: float = BC_TOL,
) -> Certificate:
    """Check ``candidate`` as a lower or upper solution on a uniform grid.

    Smooth parts must satisfy ``f'' + H(x, f, f') >= -tol`` (lower) or
    ``<= tol`` (upper) under both one-sided coefficient limits; kinks must
    open upwards (lower) or downwards (upper); and the boundary functionals
    must satisfy ``B1(f(c), f) <= 0``, ``B2(f(d), f) <= 0`` (lower) or the
    reverse inequalities (upper).
    """
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    if not candidate.exact:
        tol = tol + FD_EXTRA_TOL
    sign = 1.0 if side == "lower" else -1.0
    x = spec.certification_grid(grid_n)
    violations = []

    kinks = candidate.kink_points
    kink_info = []
    for x0 in kinks:
        dl, dr = candidate.one_sided_slopes(x0)
        ok = dl < dr if side == "lower" else dl > dr
        kink_info.append({"x": x0, "left_slope": dl, "right_slope": dr, "ok": bool(ok)})
        if not ok:
            violations.append(f"kink at x={x0} opens the wrong way (D-={dl}, D+={dr})")

    # closed interval: smooth pieces extend continuously to the ends
    interior = x
    if kinks:
        near = np.min(np.abs(interior[:, None] - np.asarray(kinks)[None, :]), axis=1)
        interior = interior[near > 1e-12 * max(1.0, spec.d)]
    sides = spec.coefficient_sides(interior)
    f = candidate(interior)
    f1 = candidate.derivative(interior)
    f2 = candidate.second_derivative(interior)
    r_lo = f2 + H_raw(interior, sides.p_lo, sides.q_lo, f, f1)
    r_hi = f2 + H_raw(interior, sides.p_hi, sides.q_hi, f, f1)
    signed = np.minimum(sign * r_lo, sign * r_hi)
    if signed.size:
        i = int(np.argmin(signed))
        worst, worst_x = float(sign * signed[i]), float(interior[i])
        if signed[i] < -tol:
            violations.append(
                f"differential inequality fails at x={worst_x}: f''+H = {worst} "
                f"({'needs >= ' if side == 'lower' else 'needs <= '}{-sign * tol})"
            )
    else:
        worst, worst_x = 0.0, float("nan")

    gamma = candidate.sample(_even_grid(x))
    bc = {}
    for name, B, x0 in (("B1", spec.bc.B1, spec.c), ("B2", spec.bc.B2, spec.d)):
        y = float(candidate(x0))
        val = float(B.bind(gamma)(y))
        slack = bc_tol * (1.0 + abs(y))
        ok = val <= slack if side == "lower" else val >= -slack
        bc[name] = {"x": x0, "value_at_end": y, "B": val, "ok": bool(ok)}
        if not ok:
            rel = "<= 0" if side == "lower" else ">= 0"
            violations.append(f"boundary inequality {name}({y}, f) = {val} is not {rel}")

    return Certificate(side, not violations, worst, worst_x, tol, kink_info, bc, violations)


def _even_grid(x: np.ndarray) -> np.ndarray:
    if (x.size - 1) % 2 == 0:
        return x
    return np.linspace(x[0], x[-1], x.size + 1)


@dataclass
class BracketPair:
    """A lower solution ``alpha`` below an upper solution ``beta``."""

    alpha: PiecewiseSmoothFn
    beta: PiecewiseSmoothFn
    alpha_cert: Certificate | None = None
    beta_cert: Certificate | None = None
    order_gap: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return (
            self.alpha_cert is not None
            and self.beta_cert is not None
            and self.alpha_cert.passed
            and self.beta_cert.passed
            and self.order_gap >= -BC_TOL
        )

    def violations(self) -> list[str]:
        out = []
        if self.alpha_cert is not None:
            out += [f"alpha: {v}" for v in self.alpha_cert.violations]
        if self.beta_cert is not None:
            out += [f"beta: {v}" for v in self.beta_cert.violations]
        if self.order_gap < -BC_TOL:
            out.append(f"alpha exceeds beta by {-self.order_gap}")
        return out

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.describe(),
            "beta": self.beta.describe(),
            "alpha_certificate": self.alpha_cert.to_dict() if self.alpha_cert else None,
            "beta_certificate": self.beta_cert.to_dict() if self.beta_cert else None,
            "min_beta_minus_alpha": self.order_gap,
            "certified": self.certified,
            **({"info": self.info} if self.info else {}),
        }


def certify_bracket(
    spec: ProblemSpec,
    alpha: PiecewiseSmoothFn,
    beta: PiecewiseSmoothFn,
    grid_n: int | None = None,
    tol: float = RESIDUAL_TOL,
    info: dict | None = None,
) -> BracketPair:
    x = spec.certification_grid(grid_n)
    a, b = alpha(x), beta(x)
    gap = float(np.min(b - a))
    return BracketPair(
        alpha,
        beta,
        certify(alpha, spec, "lower", grid_n, tol),
        certify(beta, spec, "upper", grid_n, tol),
        gap,
        dict(info or {}),
    )


def dirichlet_bracket(spec: ProblemSpec, k: float | None = None, grid_n: int | None = None) -> BracketPair:
    """The closed-form bracket for Dirichlet data.

    ``alpha = max(alpha1, alpha2)`` when ``Vd/d <= Vc/c`` and ``alpha2``
    otherwise; ``beta`` is the chord.
    """
    Vc, Vd = spec.Vc, spec.Vd
    k_least = solve_k(spec, Vc, Vd, grid_n=grid_n)
    k_used = k_least if k is None else float(k)
    alpha2 = make_alpha2(spec, Vc, Vd, k_used)
    alpha1 = make_alpha1(spec, Vd)
    use_alpha1 = Vd / spec.d <= Vc / spec.c
    alpha = pointwise_max(alpha1, alpha2) if use_alpha1 else alpha2
    beta = make_beta(spec, Vc, Vd)
    info = {
        "k_least": k_least,
        "k": k_used,
        "k_rhs": k_rhs(spec, Vc, Vd, k_used, grid_n),
        "alpha1_used": bool(use_alpha1),
        "alpha1": alpha1.describe(),
        "alpha2": alpha2.describe(),
    }
    return certify_bracket(spec, alpha, beta, grid_n, info=info)
