"""Scalar expressions for coefficient functions and boundary functionals.

Grammar (whitespace is ignored)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('+' | '-') unary | power
    power    := base ('^' unary)?
    base     := number | name | func '(' expr (',' expr)* ')' | '(' expr ')'
    func     := floor | abs | sqrt | min | max | exp | log

``^`` is right-associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)`` and ``2^-1`` is ``0.5``.  There is no implicit multiplication.
``floor`` is the integer part on the positive reals.

Evaluation is vectorised: variables may be bound to numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

FUNCTIONS: dict[str, tuple[Callable, int | None]] = {
    "floor": (np.floor, 1),
    "abs": (np.abs, 1),
    "sqrt": (np.sqrt, 1),
    "exp": (np.exp, 1),
    "log": (np.log, 1),
    "min": (None, None),
    "max": (None, None),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ExprDomainError(ValueError):
    """Raised when an expression is evaluated outside its domain."""

    def __init__(self, message: str, index: int | None = None):
        where = "" if index is None else f" at grid index {index}"
        super().__init__(message + where)
        self.index = index


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    stripped = source.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if m is None or m.end() == pos:
            bad = pos + len(stripped[pos:]) - len(stripped[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {stripped[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(stripped)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: frozenset[str], functions: frozenset[str]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = variables
        self.functions = functions

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, pos = self.take()
        if value != text or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value in ("+", "-"):
            self.take()
            operand = self.unary()
            return Neg(operand) if value == "-" else operand
        return self.power()

    def power(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = BinOp("^", node, self.unary())
        return node

    def base(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if value not in self.functions:
                    raise ExprSyntaxError(f"unknown function {value!r}", pos)
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[value][1] if value in FUNCTIONS else None
                if arity is not None and len(args) != arity:
                    raise ExprSyntaxError(f"{value} takes {arity} argument(s), got {len(args)}", pos)
                if value in ("min", "max") and len(args) < 2:
                    raise ExprSyntaxError(f"{value} takes at least 2 arguments", pos)
                return Call(value, tuple(args))
            if value not in self.variables:
                raise ExprSyntaxError(f"unknown identifier {value!r}", pos)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {found}", pos)


# -- evaluation ------------------------------------------------------------


def _first_bad(mask) -> int | None:
    mask = np.atleast_1d(mask)
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def _walk(node, env: Mapping, extra: Mapping[str, Callable]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_walk(node.operand, env, extra)
    if isinstance(node, BinOp):
        a = _walk(node.left, env, extra)
        b = _walk(node.right, env, extra)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            bad = np.asarray(b) == 0
            if np.any(bad):
                raise ExprDomainError("division by zero", _first_bad(bad))
            return a / b
        a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        bad = (a_arr < 0) & (b_arr != np.round(b_arr))
        if np.any(bad):
            raise ExprDomainError("negative base with non-integer exponent", _first_bad(bad))
        bad = (a_arr == 0) & (b_arr < 0)
        if np.any(bad):
            raise ExprDomainError("zero raised to a negative power", _first_bad(bad))
        return np.power(a_arr, b_arr)
    if isinstance(node, Call):
        args = [_walk(a, env, extra) for a in node.args]
        if node.func in extra:
            return extra[node.func](*args)
        if node.func == "min":
            out = args[0]
            for a in args[1:]:
                out = np.minimum(out, a)
            return out
        if node.func == "max":
            out = args[0]
            for a in args[1:]:
                out = np.maximum(out, a)
            return out
        (arg,) = args
        if node.func == "sqrt":
            bad = np.asarray(arg) < 0
            if np.any(bad):
                raise ExprDomainError("sqrt of a negative number", _first_bad(bad))
        if node.func == "log":
            bad = np.asarray(arg) <= 0
            if np.any(bad):
                raise ExprDomainError("log of a nonpositive number", _first_bad(bad))
        return FUNCTIONS[node.func][0](arg)
    raise TypeError(f"not an expression node: {node!r}")


def _print(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_print(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_print(node.left)} {node.op} {_print(node.right)})"
    return f"{node.func}({', '.join(_print(a) for a in node.args)})"


def _poly(node, var: str):
    """Return a numpy Polynomial equal to ``node`` in ``var``, or None."""
    P = np.polynomial.Polynomial
    if isinstance(node, Num):
        return P([node.value])
    if isinstance(node, Var):
        return P([0.0, 1.0]) if node.name == var else None
    if isinstance(node, Neg):
        inner = _poly(node.operand, var)
        return None if inner is None else -inner
    if isinstance(node, BinOp):
        a = _poly(node.left, var)
        b = _poly(node.right, var)
        if a is None or b is None:
            return None
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b.degree() == 0 and b.coef[0] != 0:
                return a / b.coef[0]
            return None
        if b.degree() == 0:
            k = b.coef[0]
            if k == int(k) and 0 <= k <= 32:
                return a ** int(k)
        return None
    return None


class CoefficientExpr:
    """An immutable parsed expression of one or more named variables."""

    __slots__ = ("source", "ast", "variables")

    def __init__(self, source: str, ast, variables: frozenset[str]):
        self.source = source
        self.ast = ast
        self.variables = variables

    def __repr__(self):
        return f"CoefficientExpr({self.source!r})"

    def __call__(self, x=None, **env):
        if x is not None:
            env["x"] = x
        return self.evaluate(env)

    def evaluate(self, env: Mapping, functions: Mapping[str, Callable] | None = None):
        missing = self.variables_used() - set(env)
        if missing:
            raise KeyError(f"unbound variable(s): {', '.join(sorted(missing))}")
        with np.errstate(all="ignore"):
            return _walk(self.ast, env, functions or {})

    def variables_used(self) -> set[str]:
        out: set[str] = set()

        def visit(node):
            if isinstance(node, Var):
                out.add(node.name)
            elif isinstance(node, Neg):
                visit(node.operand)
            elif isinstance(node, BinOp):
                visit(node.left)
                visit(node.right)
            elif isinstance(node, Call):
                for a in node.args:
                    visit(a)

        visit(self.ast)
        return out

    def to_source(self) -> str:
        """Fully parenthesised text that parses back to an equivalent tree."""
        return _print(self.ast)

    def to_polynomial(self, var: str = "x"):
        """The expression as a ``numpy.polynomial.Polynomial`` if it is one."""
        return _poly(self.ast, var)

    def is_constant(self) -> bool:
        return not self.variables_used()


def parse(
    source: str,
    variables: Sequence[str] = ("x",),
    functions: Sequence[str] = (),
) -> CoefficientExpr:
    """Parse ``source`` into a :class:`CoefficientExpr`.

    ``functions`` names extra callables that are supplied at evaluation time
    (used by boundary functionals, e.g. ``at(x0)``).
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    names = frozenset(variables)
    funcs = frozenset(FUNCTIONS) | frozenset(functions)
    ast = _Parser(source, names, funcs).parse()
    return CoefficientExpr(source, ast, names)


def constant(value: float) -> CoefficientExpr:
    return CoefficientExpr(repr(float(value)), Num(float(value)), frozenset({"x"}))


def eval_on_grid(e: CoefficientExpr, grid) -> np.ndarray:
    """Evaluate ``e`` at every grid point; domain errors name the grid index."""
    xs = np.asarray(grid, dtype=float)
    out = np.asarray(e.evaluate({"x": xs}), dtype=float)
    out = np.broadcast_to(out, xs.shape).copy()
    bad = ~np.isfinite(out)
    if np.any(bad):
        raise ExprDomainError(f"non-finite value of {e.source!r}", _first_bad(bad))
    return out


def eval_scalar(e: CoefficientExpr, x: float) -> float:
    return float(eval_on_grid(e, [x])[0])


__all__ = [
    "CoefficientExpr",
    "ExprDomainError",
    "ExprSyntaxError",
    "constant",
    "eval_on_grid",
    "eval_scalar",
    "parse",
]
