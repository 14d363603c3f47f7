"""Functional boundary conditions ``B1(V(c), V) = 0`` and ``B2(V(d), V) = 0``.

A boundary functional is a map ``(y, gamma) -> float``.  For the built-in kinds
it is nonincreasing in ``gamma`` and has at most downward jumps in ``y``, which
is what the monotone iteration relies on.  Custom functionals must declare
monotonicity and are spot-checked before use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .expr import CoefficientExpr, eval_on_grid, parse
from .grid import GridFunction

Side = Literal["left", "right"]
Which = Literal["least", "greatest"]

KINDS = ("dirichlet", "integral", "mean_fraction", "multipoint", "integer_part", "custom")
CUSTOM_VARIABLES = ("y", "mean", "integral", "left", "right")


class BoundaryError(ValueError):
    pass


class ZeroBracketError(BoundaryError):
    pass


class MonotonicityError(BoundaryError):
    pass


@dataclass(frozen=True)
class BoundaryFunctional:
    """One boundary functional.

    ``params`` per kind:

    - ``dirichlet``: ``target``; ``B = y - target``
    - ``integral``: ``weight`` (expression in x), ``coefficient``;
      ``B = y - coefficient * int_c^d weight(x) gamma(x) dx``
    - ``mean_fraction``: ``fraction``; ``B = y - fraction * mean(gamma)``
    - ``multipoint``: ``nodes``, ``weights``, ``target``;
      ``B = y - sum_j weights[j] * gamma(nodes[j]) - target``
    - ``integer_part``: ``target``; ``B = target - floor(y)``
    - ``custom``: ``expression`` in ``y``, ``mean``, ``integral``, ``left``,
      ``right`` and ``at(x0)``
    """

    kind: str
    side: Side
    params: dict = field(default_factory=dict)
    monotone_decl: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BoundaryError(f"unknown boundary kind {self.kind!r}; expected one of {KINDS}")
        if self.side not in ("left", "right"):
            raise BoundaryError(f"side must be 'left' or 'right', got {self.side!r}")
        p = dict(self.params)
        if self.kind in ("dirichlet", "integer_part"):
            p["target"] = float(p.get("target", 0.0))
        elif self.kind == "integral":
            w = p.get("weight", "1")
            p["weight"] = w if isinstance(w, CoefficientExpr) else parse(str(w))
            p["coefficient"] = float(p.get("coefficient", 1.0))
        elif self.kind == "mean_fraction":
            p["fraction"] = float(p["fraction"])
        elif self.kind == "multipoint":
            nodes = np.atleast_1d(np.asarray(p["nodes"], dtype=float))
            weights = np.atleast_1d(np.asarray(p.get("weights", np.ones_like(nodes)), dtype=float))
            if nodes.shape != weights.shape:
                raise BoundaryError("multipoint nodes and weights differ in length")
            p["nodes"], p["weights"] = nodes, weights
            p["target"] = float(p.get("target", 0.0))
        elif self.kind == "custom":
            e = p["expression"]
            p["expression"] = (
                e if isinstance(e, CoefficientExpr) else parse(str(e), CUSTOM_VARIABLES, ("at",))
            )
            if not self.monotone_decl:
                raise BoundaryError(
                    "custom boundary functionals must declare monotone_decl=True "
                    "(nonincreasing in the function argument)"
                )
        object.__setattr__(self, "params", p)

    @classmethod
    def dirichlet(cls, side: Side, target: float) -> "BoundaryFunctional":
        return cls("dirichlet", side, {"target": target})

    @classmethod
    def mean_fraction(cls, side: Side, fraction: float) -> "BoundaryFunctional":
        return cls("mean_fraction", side, {"fraction": fraction})

    @classmethod
    def integer_part(cls, side: Side, target: float) -> "BoundaryFunctional":
        return cls("integer_part", side, {"target": target})

    @property
    def gamma_independent(self) -> bool:
        return self.kind in ("dirichlet", "integer_part")

    def bind(self, gamma: GridFunction | None) -> Callable:
        """Freeze ``gamma`` and return the scalar map ``y -> B(y, gamma)``.

        The returned map accepts scalars or numpy arrays.
        """
        p = self.params
        if self.kind == "dirichlet":
            t = p["target"]
            return lambda y: np.asarray(y, dtype=float) - t
        if self.kind == "integer_part":
            t = p["target"]
            return lambda y: t - np.floor(np.asarray(y, dtype=float))
        if gamma is None:
            raise BoundaryError(f"{self.kind} boundary functional needs a function argument")
        if self.kind == "mean_fraction":
            shift = p["fraction"] * gamma.mean()
        elif self.kind == "integral":
            w = eval_on_grid(p["weight"], gamma.grid)
            shift = p["coefficient"] * gamma.with_values(w * gamma.values).integral()
        elif self.kind == "multipoint":
            shift = float(np.dot(p["weights"], gamma.at(p["nodes"]))) + p["target"]
        else:
            e: CoefficientExpr = p["expression"]
            env = {
                "mean": gamma.mean(),
                "integral": gamma.integral(),
                "left": float(gamma.values[0]),
                "right": float(gamma.values[-1]),
            }
            funcs = {"at": lambda x0: gamma.at(x0)}

            def h(y):
                y = np.asarray(y, dtype=float)
                out = e.evaluate({**env, "y": y}, funcs)
                return np.broadcast_to(np.asarray(out, dtype=float), y.shape) * 1.0

            return h
        return lambda y: np.asarray(y, dtype=float) - shift

    def __call__(self, y, gamma: GridFunction | None = None):
        return eval_bc(self, y, gamma)

    def describe(self) -> dict:
        out = {"kind": self.kind, "side": self.side}
        for k, v in self.params.items():
            if isinstance(v, CoefficientExpr):
                out[k] = v.source
            elif isinstance(v, np.ndarray):
                out[k] = v.tolist()
            else:
                out[k] = v
        return out


@dataclass(frozen=True)
class BoundaryConditionPair:
    B1: BoundaryFunctional
    B2: BoundaryFunctional

    def __post_init__(self):
        if self.B1.side != "left" or self.B2.side != "right":
            raise BoundaryError("B1 must be the left and B2 the right boundary functional")

    @classmethod
    def dirichlet(cls, Vc: float, Vd: float) -> "BoundaryConditionPair":
        return cls(BoundaryFunctional.dirichlet("left", Vc), BoundaryFunctional.dirichlet("right", Vd))

    @property
    def is_dirichlet(self) -> bool:
        return self.B1.kind == "dirichlet" and self.B2.kind == "dirichlet"

    @property
    def gamma_independent(self) -> bool:
        return self.B1.gamma_independent and self.B2.gamma_independent


def eval_bc(B: BoundaryFunctional, y: float, gamma: GridFunction | None) -> float:
    return float(B.bind(gamma)(y))


# -- extremal zeros ----------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    """An extremal zero.  ``open_end`` marks a zero set whose extremum is not
    attained; ``value`` then sits within ``tol`` inside the set."""

    value: float
    open_end: bool = False

    def __float__(self):
        return self.value


def _sign(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.sign(v).astype(int)


def _search(h, a, b, which, tol, cells, jump_tol, depth=0):
    """Recursive scan for the extremal zero of ``h`` on ``[a, b]``; None if absent."""
    ys = np.linspace(a, b, cells + 1)
    vals = np.asarray(h(ys), dtype=float)
    if vals.shape != ys.shape:
        vals = np.array([float(h(y)) for y in ys])
    s = _sign(vals)
    candidate = (s[:-1] == 0) | (s[1:] == 0) | (s[:-1] != s[1:])
    idx = np.flatnonzero(candidate)
    if which == "greatest":
        idx = idx[::-1]
    for j in idx:
        lo, hi = ys[j], ys[j + 1]
        slo, shi = s[j], s[j + 1]
        if hi - lo <= tol or depth > 60:
            res = _resolve(lo, hi, slo, shi, vals[j], vals[j + 1], which, jump_tol)
        else:
            res = _search(h, lo, hi, which, tol, cells, jump_tol, depth + 1)
            if res is None:
                # sub-scan found nothing strictly inside; endpoints may still be zeros
                res = _resolve(lo, hi, slo, shi, vals[j], vals[j + 1], which, jump_tol, exact_only=True)
        if res is not None:
            return res
    return None


def _resolve(lo, hi, slo, shi, vlo, vhi, which, jump_tol, exact_only=False):
    if which == "greatest":
        (y1, s1, v1), (y2, s2) = (hi, shi, vhi), (lo, slo)
    else:
        (y1, s1, v1), (y2, s2) = (lo, slo, vlo), (hi, shi)
    if s1 == 0:
        return Zero(float(y1))
    if s2 == 0:
        # the zero set ends inside this cell; a jump there means it is not attained
        return Zero(float(y2), open_end=bool(abs(v1) > jump_tol) and not exact_only)
    if exact_only:
        return None
    if abs(vhi - vlo) <= jump_tol:
        return Zero(float(0.5 * (lo + hi)))
    if slo < 0 < shi:
        # upward sign changes cannot be jumps under the regularity condition
        return Zero(float(0.5 * (lo + hi)))
    return None


def extremal_zero(
    h: Callable,
    a: float,
    b: float,
    which: Which = "greatest",
    tol: float = 1e-10,
    *,
    cells: int = 1024,
    jump_tol: float = 1e-6,
    require_bracket: bool = True,
) -> Zero:
    """Least or greatest zero of ``h`` on ``[a, b]``.

    ``h`` must have at most downward jumps (left limit >= value >= right
    limit).  With ``h(a) <= 0 <= h(b)`` extremal zeros exist; that bracket is
    enforced unless ``require_bracket`` is false, in which case any zero found
    by the scan is accepted.

    A coarse scan of ``cells`` cells isolates the outermost cell that can hold
    a zero (an exact zero at a node or a sign change), which is then rescanned
    recursively down to width ``tol``.  A downward sign change is accepted as
    a zero only if the value change across the final cell is below
    ``jump_tol``; otherwise it is a jump.  Features narrower than one coarse
    cell can be missed.
    """
    if which not in ("least", "greatest"):
        raise ValueError(f"which must be 'least' or 'greatest', got {which!r}")
    if a > b:
        raise ValueError(f"empty interval [{a}, {b}]")
    ha, hb = float(h(a)), float(h(b))
    if require_bracket and not (ha <= 0.0 <= hb):
        raise ZeroBracketError(f"need h(a) <= 0 <= h(b), got h({a})={ha}, h({b})={hb}")
    if a == b:
        if ha == 0.0:
            return Zero(float(a))
        raise ZeroBracketError(f"h({a}) = {ha} on a degenerate interval")
    res = _search(h, float(a), float(b), which, tol, cells, jump_tol)
    if res is None:
        raise ZeroBracketError(f"no zero of h found on [{a}, {b}]")
    return res


@dataclass(frozen=True)
class BoundaryValues:
    gamma_c: float
    gamma_d: float
    left: Zero
    right: Zero


def boundary_values(
    pair: BoundaryConditionPair,
    gamma: GridFunction,
    bracket,
    which: Which = "greatest",
    tol: float = 1e-10,
) -> BoundaryValues:
    """Extremal zeros of ``y -> B1(y, gamma)`` on ``[alpha(c), beta(c)]`` and
    of ``y -> B2(y, gamma)`` on ``[alpha(d), beta(d)]``.

    ``bracket`` needs callables ``alpha`` and ``beta``.  Raises
    :class:`ZeroBracketError` when ``B(alpha, gamma) <= 0 <= B(beta, gamma)``
    fails at either end.
    """
    c, d = gamma.c, gamma.d
    zeros = []
    for B, x0 in ((pair.B1, c), (pair.B2, d)):
        lo, hi = float(bracket.alpha(x0)), float(bracket.beta(x0))
        h = B.bind(gamma)
        hlo, hhi = float(h(lo)), float(h(hi))
        if not (hlo <= 0.0 <= hhi):
            raise ZeroBracketError(
                f"{B.side} boundary: need B(alpha({x0}), gamma) <= 0 <= B(beta({x0}), gamma), "
                f"got {hlo} and {hhi}"
            )
        if B.kind == "dirichlet":
            # unique zero, independent of gamma
            zeros.append(Zero(B.params["target"]))
        else:
            zeros.append(extremal_zero(h, lo, hi, which, tol))
    return BoundaryValues(zeros[0].value, zeros[1].value, zeros[0], zeros[1])


def check_monotone(
    B: BoundaryFunctional,
    alpha: GridFunction,
    beta: GridFunction,
    rng: np.random.Generator,
    pairs: int = 32,
    tol: float = 1e-12,
) -> None:
    """Spot-check that ``B(y, .)`` is nonincreasing on ordered pairs in
    ``[alpha, beta]``; raises :class:`MonotonicityError` on a violation."""
    lo, hi = alpha.values, beta.values
    ys = np.array([lo.min(), hi.max(), 0.5 * (lo.min() + hi.max())])
    for _ in range(pairs):
        u = np.sort(rng.random((2, lo.size)), axis=0)
        g1 = alpha.with_values(lo + u[0] * (hi - lo))
        g2 = alpha.with_values(lo + u[1] * (hi - lo))
        b1 = np.asarray(B.bind(g1)(ys), dtype=float)
        b2 = np.asarray(B.bind(g2)(ys), dtype=float)
        bad = b1 < b2 - tol * (1.0 + np.abs(b2))
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise MonotonicityError(
                f"{B.side} boundary functional increases in gamma at y={ys[k]}: "
                f"{b1[k]} < {b2[k]} for gamma1 <= gamma2"
            )
