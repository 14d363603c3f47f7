"""Run configuration: an INI-style file with fixed sections.

Sections and keys::

    [problem]   c, d, p, q, mode (dirichlet|functional), which (greatest|least|both)
                or sigma_tilde, sigma, r, b in place of p and q
    [bc.left]   kind plus kind-specific keys (target, fraction, weight,
    [bc.right]  coefficient, nodes, weights, expression)
    [bracket]   optional: k (dirichlet mode), alpha, beta (required in
                functional mode).  A JSON list for alpha is its pointwise
                max, for beta its pointwise min.
    [solver]    n, res_tol, max_iter, damping, seed, probe_seeds, fix_tol,
                max_outer, zero_tol, cert_n
    [output]    dir, solution, report, trace, plot

String values may be quoted.  ``--override section.key=value`` replaces any
entry, e.g. ``solver.n=1024`` or ``bc.left.target=3``.
"""

from __future__ import annotations

import configparser
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .bracket import PiecewiseSmoothFn, pointwise_max, pointwise_min
from .dirichlet import SolverConfig
from .expr import parse
from .funcbc import KINDS, BoundaryConditionPair, BoundaryFunctional
from .model import MarketParams, ProblemSpec, coefficients_from_market

OUTPUT_ENV = "BSTC_OUTPUT_DIR"
SECTIONS = ("problem", "bc.left", "bc.right", "bracket", "solver", "output")

_PROBLEM_KEYS = {"c", "d", "p", "q", "mode", "which", "sigma_tilde", "sigma", "r", "b"}
_BC_KEYS = {"kind", "target", "fraction", "weight", "coefficient", "nodes", "weights", "expression", "monotone"}
_BRACKET_KEYS = {"k", "alpha", "beta"}
_OUTPUT_KEYS = {"dir", "solution", "report", "trace", "plot"}


class ConfigError(ValueError):
    pass


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(_unquote(raw))
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _list(section: str, key: str, raw: str) -> list:
    text = _unquote(raw)
    try:
        val = json.loads(text)
    except json.JSONDecodeError:
        raise ConfigError(f"[{section}] {key}: expected a JSON list, got {raw!r}") from None
    return val if isinstance(val, list) else [val]


@dataclass
class OutputPaths:
    dir: Path
    solution: str = "solution.csv"
    report: str = "report.json"
    trace: str = "trace.csv"
    plot: str = "plot.csv"

    def path(self, name: str, suffix: str | None = None) -> Path:
        p = Path(getattr(self, name))
        if suffix:
            p = p.with_name(f"{p.stem}_{suffix}{p.suffix}")
        return p if p.is_absolute() else self.dir / p


@dataclass
class RunConfig:
    spec: ProblemSpec
    mode: str
    which: str
    solver: SolverConfig
    outputs: OutputPaths
    alpha: PiecewiseSmoothFn | None = None
    beta: PiecewiseSmoothFn | None = None
    k: float | None = None
    raw: dict = field(default_factory=dict)

    @property
    def runs(self) -> tuple[str, ...]:
        return ("greatest", "least") if self.which == "both" else (self.which,)


def read_config(path: str | os.PathLike, overrides: list[str] = ()) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    raw = {s: dict(cp.items(s)) for s in cp.sections()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().rpartition(".")
        if not sep or not dot or not section or not name:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        raw.setdefault(section, {})[name] = value.strip()
    return build_config(raw)


def _bc(section: str, values: dict, side: str) -> BoundaryFunctional:
    if "kind" not in values:
        raise ConfigError(f"[{section}] needs a kind (one of {', '.join(KINDS)})")
    kind = _unquote(values["kind"])
    unknown = set(values) - _BC_KEYS
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")
    params: dict = {}
    monotone = True
    for key, rawv in values.items():
        if key == "kind":
            continue
        if key in ("target", "fraction", "coefficient"):
            params[key] = _float(section, key, rawv)
        elif key in ("nodes", "weights"):
            params[key] = [float(v) for v in _list(section, key, rawv)]
        elif key in ("weight", "expression"):
            params[key] = _unquote(rawv)
        elif key == "monotone":
            monotone = _unquote(rawv).lower() in ("1", "true", "yes")
    required = {
        "dirichlet": ("target",),
        "integer_part": ("target",),
        "mean_fraction": ("fraction",),
        "multipoint": ("nodes",),
        "custom": ("expression",),
        "integral": (),
    }.get(kind, ())
    for key in required:
        if key not in params:
            raise ConfigError(f"[{section}] kind {kind} needs key {key!r}")
    try:
        return BoundaryFunctional(kind, side, params, monotone)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _candidate(section: str, key: str, rawv: str, c: float, d: float, combine) -> PiecewiseSmoothFn:
    text = _unquote(rawv)
    sources = _list(section, key, text) if text.startswith("[") else [text]
    fns = [PiecewiseSmoothFn.from_expr(c, d, parse(str(s))) for s in sources]
    out = fns[0]
    for f in fns[1:]:
        out = combine(out, f)
    return out


def build_config(raw: dict) -> RunConfig:
    from .expr import ExprDomainError, ExprSyntaxError
    from .model import ProblemError

    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    for section, allowed in (
        ("problem", _PROBLEM_KEYS),
        ("bracket", _BRACKET_KEYS),
        ("output", _OUTPUT_KEYS),
        ("solver", {f.name for f in fields(SolverConfig)}),
    ):
        extra = set(raw.get(section, {})) - allowed
        if extra:
            raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(extra))}")
    prob = raw.get("problem")
    if not prob:
        raise ConfigError("missing [problem] section")
    for key in ("c", "d"):
        if key not in prob:
            raise ConfigError(f"[problem] needs {key}")
    c, d = _float("problem", "c", prob["c"]), _float("problem", "d", prob["d"])
    mode = _unquote(prob.get("mode", "dirichlet"))
    which = _unquote(prob.get("which", "greatest"))
    if mode not in ("dirichlet", "functional"):
        raise ConfigError(f"[problem] mode must be dirichlet or functional, got {mode!r}")
    if which not in ("greatest", "least", "both"):
        raise ConfigError(f"[problem] which must be greatest, least or both, got {which!r}")

    try:
        market_keys = [k for k in ("sigma_tilde", "sigma", "r", "b") if k in prob]
        if market_keys:
            if len(market_keys) != 4 or "p" in prob or "q" in prob:
                raise ConfigError("[problem] give either p and q or all of sigma_tilde, sigma, r, b")
            m = MarketParams(*(_float("problem", k, prob[k]) for k in ("sigma_tilde", "sigma", "r", "b")))
            p, q = coefficients_from_market(m)
        else:
            if "p" not in prob or "q" not in prob:
                raise ConfigError("[problem] needs p and q")
            p, q = parse(_unquote(prob["p"])), parse(_unquote(prob["q"]))

        if "bc.left" not in raw or "bc.right" not in raw:
            raise ConfigError("missing [bc.left] or [bc.right] section")
        pair = BoundaryConditionPair(_bc("bc.left", raw["bc.left"], "left"), _bc("bc.right", raw["bc.right"], "right"))
        if mode == "dirichlet" and not pair.is_dirichlet:
            raise ConfigError("mode dirichlet needs kind = dirichlet on both sides; use mode functional")

        scfg = {}
        for f in fields(SolverConfig):
            if f.name in raw.get("solver", {}):
                v = _unquote(raw["solver"][f.name])
                if f.type in ("int", int):
                    try:
                        scfg[f.name] = int(v)
                    except ValueError:
                        raise ConfigError(f"[solver] {f.name}: expected an integer, got {v!r}") from None
                elif f.type in ("bool", bool):
                    scfg[f.name] = v.lower() in ("1", "true", "yes")
                else:
                    scfg[f.name] = _float("solver", f.name, v)
        try:
            solver = SolverConfig(**scfg)
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None

        spec = ProblemSpec(c, d, p, q, pair, cert_n=solver.cert_n)

        br = raw.get("bracket", {})
        alpha = beta = None
        if "alpha" in br:
            alpha = _candidate("bracket", "alpha", br["alpha"], c, d, pointwise_max)
        if "beta" in br:
            beta = _candidate("bracket", "beta", br["beta"], c, d, pointwise_min)
        if mode == "functional" and (alpha is None or beta is None):
            raise ConfigError("mode functional needs [bracket] alpha and beta")
        if (alpha is None) != (beta is None):
            raise ConfigError("[bracket] give both alpha and beta or neither")
        k = _float("bracket", "k", br["k"]) if "k" in br else None
    except (ExprSyntaxError, ExprDomainError, ProblemError) as exc:
        raise ConfigError(str(exc)) from None

    out = raw.get("output", {})
    out_dir = out.get("dir") or os.environ.get(OUTPUT_ENV) or "bstc-output"
    outputs = OutputPaths(Path(_unquote(out_dir)))
    for key in ("solution", "report", "trace", "plot"):
        if key in out:
            setattr(outputs, key, _unquote(out[key]))
    return RunConfig(spec, mode, which, solver, outputs, alpha, beta, k, raw)
