"""Problem data, the semilinear nonlinearity ``H`` and its Nagumo bounds.

The stationary equation ``x^3 V''^2 + p x^2 V'' + q (x V' - V) = 0`` is
handled through the semilinear form ``V'' + H(x, V, V') = 0`` with

    H(x, y, z) = (p x^2 - sqrt(p^2 x^4 + 4 x^3 q |x z - y|)) / (2 x^3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import CoefficientExpr, constant, eval_on_grid, parse
from .funcbc import BoundaryConditionPair
from .grid import uniform_grid

CERT_GRID_N = 4097
_SIDE_STEP = 1e-12
_BREAK_TOL = 1e-8


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class MarketParams:
    sigma_tilde: float
    sigma: float
    r: float
    b: float

    def __post_init__(self):
        if self.b <= 0 or self.sigma <= 0:
            raise ProblemError("market parameters need b > 0 and sigma > 0")


def coefficients_from_market(m: MarketParams) -> tuple[CoefficientExpr, CoefficientExpr]:
    """Constant ``p = sigma_tilde^2 / (2 b sigma^2)`` and ``q = r / (b sigma^2)``."""
    denom = m.b * m.sigma**2
    if denom == 0:
        raise ZeroDivisionError("b * sigma^2 vanishes")
    return constant(m.sigma_tilde**2 / (2.0 * denom)), constant(m.r / denom)


@dataclass(frozen=True)
class CoefficientSides:
    """Left and right limits of ``p`` and ``q`` at a set of nodes.

    Away from discontinuities both sides hold the pointwise value.
    """

    x: np.ndarray
    p_lo: np.ndarray
    q_lo: np.ndarray
    p_hi: np.ndarray
    q_hi: np.ndarray
    breaks: np.ndarray


@dataclass(frozen=True)
class ProblemSpec:
    c: float
    d: float
    p: CoefficientExpr
    q: CoefficientExpr
    bc: BoundaryConditionPair
    cert_n: int = CERT_GRID_N
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 < self.c < self.d):
            raise ProblemError(f"need 0 < c < d, got c={self.c}, d={self.d}")
        for label in ("p", "q"):
            e = getattr(self, label)
            if isinstance(e, (int, float)):
                e = constant(e)
            elif isinstance(e, str):
                e = parse(e)
            object.__setattr__(self, label, e)
        grid = self.certification_grid()
        for label in ("p", "q"):
            vals = eval_on_grid(getattr(self, label), grid)
            bad = np.flatnonzero(vals < 0)
            if bad.size:
                i = int(bad[0])
                raise ProblemError(
                    f"coefficient {label} is negative at x={grid[i]} ({vals[i]}); "
                    "p and q must be nonnegative"
                )

    @property
    def Vc(self) -> float:
        if self.bc.B1.kind != "dirichlet":
            raise ProblemError("left boundary condition is not Dirichlet")
        return self.bc.B1.params["target"]

    @property
    def Vd(self) -> float:
        if self.bc.B2.kind != "dirichlet":
            raise ProblemError("right boundary condition is not Dirichlet")
        return self.bc.B2.params["target"]

    def certification_grid(self, n: int | None = None) -> np.ndarray:
        return uniform_grid(self.c, self.d, (n or self.cert_n) - 1)

    def coefficients(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return eval_on_grid(self.p, x), eval_on_grid(self.q, x)

    def coefficient_sides(self, x) -> CoefficientSides:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        step = _SIDE_STEP * np.maximum(1.0, np.abs(x))
        xl = np.maximum(x - step, self.c)
        xr = np.minimum(x + step, self.d)
        p0, q0 = self.coefficients(x)
        pl, ql = self.coefficients(xl)
        pr, qr = self.coefficients(xr)
        scale_p = _BREAK_TOL * (1.0 + np.abs(p0))
        scale_q = _BREAK_TOL * (1.0 + np.abs(q0))
        breaks = (np.abs(pl - pr) > scale_p) | (np.abs(ql - qr) > scale_q)
        p_lo = np.where(breaks, pl, p0)
        p_hi = np.where(breaks, pr, p0)
        q_lo = np.where(breaks, ql, q0)
        q_hi = np.where(breaks, qr, q0)
        return CoefficientSides(x, p_lo, q_lo, p_hi, q_hi, breaks)

    def node_sides(self, n: int) -> CoefficientSides:
        """Coefficient limits at the interior nodes of the ``n``-cell grid (cached)."""
        key = ("sides", n)
        if key not in self._cache:
            self._cache[key] = self.coefficient_sides(uniform_grid(self.c, self.d, n)[1:-1])
        return self._cache[key]


def H_raw(x, p, q, y, z):
    """``H`` for given coefficient values; vectorised, no checks."""
    x = np.asarray(x, dtype=float)
    w = np.abs(x * z - y)
    radicand = p * p * x**4 + 4.0 * x**3 * q * w
    # (p x^2 - sqrt(R)) / (2 x^3) rationalised: no cancellation, sign exact
    denom = p * x * x + np.sqrt(radicand)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -2.0 * q * w / denom
    return np.where(denom > 0, out, 0.0)


def dH_dw(x, p, q, y, z):
    """Derivative of ``H`` with respect to ``w = x z - y``.

    At ``w = 0`` the one-sided derivative from ``w < 0`` is returned, the side
    on which convex solutions live.
    """
    x = np.asarray(x, dtype=float)
    w = x * z - y
    radicand = p * p * x**4 + 4.0 * x**3 * q * np.abs(w)
    sign = np.where(w > 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -q * sign / np.sqrt(radicand)
    # p = 0 and w = 0: the square root has infinite slope
    return np.where(radicand > 0, out, np.where(q > 0, -np.inf * sign, 0.0))


def eval_H(spec: ProblemSpec, x, y, z):
    """``H(x, y, z)`` with coefficients evaluated at ``x``."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    span = 1e-12 * max(1.0, abs(spec.d))
    if np.any(xa < spec.c - span) or np.any(xa > spec.d + span):
        raise ProblemError(f"x outside [{spec.c}, {spec.d}]")
    p, q = spec.coefficients(xa)
    out = H_raw(xa, p, q, np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    return float(out[0]) if np.ndim(x) == 0 and np.ndim(y) == 0 and np.ndim(z) == 0 else out


def H_sides(sides: CoefficientSides, y, z):
    """``H`` averaged over the left and right coefficient limits."""
    lo = H_raw(sides.x, sides.p_lo, sides.q_lo, y, z)
    hi = H_raw(sides.x, sides.p_hi, sides.q_hi, y, z)
    return 0.5 * (lo + hi)


def dH_dw_sides(sides: CoefficientSides, y, z):
    lo = dH_dw(sides.x, sides.p_lo, sides.q_lo, y, z)
    hi = dH_dw(sides.x, sides.p_hi, sides.q_hi, y, z)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NagumoBounds:
    """``|H(x, y, z)| <= A_hat + B_hat sqrt(|z|)`` between the bracket.

    ``y_factor`` is the number multiplying ``sqrt(q/x^3)`` in ``A_hat`` and
    ``bound_used`` says where it came from: ``"beta_d"`` or ``"bracket"``
    (the square root of the largest bracket magnitude).
    """

    A_hat: float
    B_hat: float
    y_factor: float
    bound_used: str

    def bound(self, z):
        return self.A_hat + self.B_hat * np.sqrt(np.abs(z))

    def derivative_bound(self, c, d, alpha_c, alpha_d, beta_c, beta_d) -> float:
        """A priori bound on ``|V'|`` for solutions between the bracket."""
        slope = max(abs(beta_d - alpha_c), abs(beta_c - alpha_d)) / (d - c)
        integral = self.A_hat * (d - c) + self.B_hat * (2.0 / 3.0) * (d**1.5 - c**1.5)
        return slope + integral


def nagumo_bounds(
    spec: ProblemSpec,
    beta_d: float,
    grid_n: int = CERT_GRID_N,
    bracket_sup: float | None = None,
) -> NagumoBounds:
    """Grid maxima of ``p/x + sqrt(q/x^3) * beta(d)`` and ``sqrt(q)/x``.

    When ``bracket_sup`` (the largest ``|alpha|``, ``|beta|`` on the interval)
    is given and ``sqrt(bracket_sup)`` exceeds ``beta(d)``, that square root
    replaces ``beta(d)`` so the bound holds for every bracketed ``y``.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    x = spec.certification_grid(grid_n)
    sides = spec.coefficient_sides(x)
    y_factor, used = max(float(beta_d), 0.0), "beta_d"
    if bracket_sup is not None and np.sqrt(abs(bracket_sup)) > y_factor:
        y_factor, used = float(np.sqrt(abs(bracket_sup))), "bracket"
    A = -np.inf
    B = -np.inf
    for p, q in ((sides.p_lo, sides.q_lo), (sides.p_hi, sides.q_hi)):
        A = max(A, float(np.max(p / x + np.sqrt(q / x**3) * y_factor)))
        B = max(B, float(np.max(np.sqrt(q) / x)))
    return NagumoBounds(A, B, y_factor, used)
