"""Command line front end.

    bstc solve   <config> [--override section.key=value ...]
    bstc certify <config>
    bstc verify  <config> <solution.csv>

Exit status: 0 all checks pass, 1 configuration error, 2 certification
failure, 3 non-convergence, 4 verification failure.  Every run writes a JSON
report (also on failure) whose ``error`` entry carries the diagnostic.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .bracket import BracketPair, certify_bracket, dirichlet_bracket
from .config import ConfigError, RunConfig, read_config
from .dirichlet import BracketViolationError, NonConvergenceError, semilinear_residual
from .funcbc import MonotonicityError, ZeroBracketError
from .grid import GridFunction
from .iterate import (
    FixedPointNonConvergenceError,
    NonMonotoneTraceError,
    extremal_fixed_point,
    refine_bracket_alpha1,
)
from .model import nagumo_bounds
from .verify import full_check, quadratic_residual

log = logging.getLogger("bstc")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CERTIFY = 2
EXIT_CONVERGE = 3
EXIT_VERIFY = 4

REPORT_SCHEMA = "bstc.report/1"
SOLUTION_COLUMNS = ("x", "V", "V'", "V''", "semilinear_residual", "quadratic_residual")


class RunFailure(Exception):
    def __init__(self, code: int, kind: str, message: str, **detail):
        super().__init__(message)
        self.code, self.kind, self.detail = code, kind, detail


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to floats, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else format(float(v), ".17g")


def write_solution_csv(path: Path, spec, V: GridFunction) -> None:
    r = semilinear_residual(spec, V)
    rq = quadratic_residual(spec, V)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SOLUTION_COLUMNS)
        for row in zip(V.grid, V.values, V.d1, V.d2, r, rq):
            w.writerow([_fmt(v) for v in row])


def read_solution_csv(path: Path) -> GridFunction:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read solution {path}: {exc}") from None
    if not rows or rows[0][:2] != ["x", "V"]:
        raise ConfigError(f"{path}: expected a header starting with x,V")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
        return GridFunction(data[:, 0], data[:, 1])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: bad solution data ({exc})") from None


def write_table(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_report(path: Path, report: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(report), fh, indent=2)
        fh.write("\n")


def problem_summary(cfg: RunConfig) -> dict:
    spec = cfg.spec
    return {
        "c": spec.c,
        "d": spec.d,
        "p": spec.p.source,
        "q": spec.q.source,
        "mode": cfg.mode,
        "which": cfg.which,
        "bc": {"left": spec.bc.B1.describe(), "right": spec.bc.B2.describe()},
    }


def build_bracket(cfg: RunConfig) -> BracketPair:
    spec = cfg.spec
    if cfg.alpha is not None:
        return certify_bracket(spec, cfg.alpha, cfg.beta, cfg.solver.cert_n, info={"source": "config"})
    try:
        br = dirichlet_bracket(spec, cfg.k, cfg.solver.cert_n)
    except ValueError as exc:
        raise RunFailure(EXIT_CERTIFY, "certification", str(exc)) from None
    br.info["source"] = "closed-form"
    return br


def _nagumo(cfg: RunConfig, br: BracketPair) -> dict:
    spec = cfg.spec
    x = spec.certification_grid()
    sup = float(max(np.max(np.abs(br.alpha(x))), np.max(np.abs(br.beta(x)))))
    nb = nagumo_bounds(spec, float(br.beta(spec.d)), cfg.solver.cert_n, sup)
    bound = nb.derivative_bound(
        spec.c, spec.d, float(br.alpha(spec.c)), float(br.alpha(spec.d)), float(br.beta(spec.c)), float(br.beta(spec.d))
    )
    return {
        "A_hat": nb.A_hat,
        "B_hat": nb.B_hat,
        "y_factor": nb.y_factor,
        "bound_used": nb.bound_used,
        "derivative_bound": bound,
    }


def _certify(cfg: RunConfig, report: dict) -> BracketPair:
    br = build_bracket(cfg)
    report["bracket"] = br.to_dict()
    report["nagumo"] = _nagumo(cfg, br)
    if not br.certified:
        raise RunFailure(EXIT_CERTIFY, "certification", "bracket is not certified", violations=br.violations())
    return br


def _solve_one(cfg: RunConfig, br: BracketPair, which: str, report: dict) -> GridFunction:
    try:
        V, trace = extremal_fixed_point(cfg.spec, br, which, cfg.solver)
    except (ZeroBracketError, MonotonicityError) as exc:
        raise RunFailure(EXIT_CERTIFY, "certification", str(exc)) from None
    except (NonConvergenceError, FixedPointNonConvergenceError) as exc:
        raise RunFailure(EXIT_CONVERGE, "non-convergence", str(exc), which=which) from None
    except NonMonotoneTraceError as exc:
        raise RunFailure(EXIT_VERIFY, "verification", str(exc), which=which) from None
    except BracketViolationError as exc:
        raise RunFailure(EXIT_VERIFY, "verification", str(exc), which=which) from None
    run = {"trace": trace.summary()}
    run["verification"] = full_check(cfg.spec, br, V, res_tol=cfg.solver.res_tol).to_dict()
    run["max_abs_slope"] = float(np.max(np.abs(V.d1)))
    run["V_c"], run["V_d"] = float(V.values[0]), float(V.values[-1])
    run["floor_V_d"] = math.floor(V.values[-1])
    report["runs"][which] = run
    suffix = which if cfg.which == "both" else None
    write_solution_csv(cfg.outputs.path("solution", suffix), cfg.spec, V)
    write_table(
        cfg.outputs.path("trace", suffix),
        ("direction", "step", "gamma_c", "gamma_d", "delta", "max_abs_slope", "open_end"),
        [(trace.direction, r["step"], r["gamma_c"], r["gamma_d"], r["delta"], r["max_abs_slope"], r["open_end"]) for r in trace.to_rows()],
    )
    return V


def _refinement(cfg: RunConfig, br: BracketPair, V: GridFunction, which: str) -> dict:
    ref = refine_bracket_alpha1(cfg.spec, br, V, cfg.solver.cert_n)
    out = {"changed": ref.changed, "reason": ref.reason}
    if ref.changed and ref.bracket.certified:
        try:
            W, _ = extremal_fixed_point(cfg.spec, ref.bracket, which, cfg.solver)
            out["max_change_in_solution"] = float(np.max(np.abs(W.values - V.values)))
        except Exception as exc:  # diagnostic only; the main result stands
            out["rerun_error"] = str(exc)
    return out


def run(cfg: RunConfig, command: str = "solve", solution_csv: Path | None = None) -> tuple[int, dict]:
    """Execute one command; returns the exit status and the report dict."""
    report: dict = {"schema": REPORT_SCHEMA, "command": command, "problem": problem_summary(cfg)}
    report["solver"] = {k: getattr(cfg.solver, k) for k in cfg.solver.__dataclass_fields__}
    code = EXIT_OK
    try:
        br = _certify(cfg, report)
        if command == "solve":
            report["runs"] = {}
            found = {w: _solve_one(cfg, br, w, report) for w in cfg.runs}
            if "greatest" in found:
                report["runs"]["greatest"]["alpha1_refinement"] = _refinement(cfg, br, found["greatest"], "greatest")
            if len(found) == 2:
                gap = float(np.max(found["least"].values - found["greatest"].values))
                report["least_le_greatest"] = {"max_excess": gap, "passed": gap <= 1e-7}
            x = found[cfg.runs[0]].grid
            cols = {"x": x, "alpha": br.alpha(x), "beta": br.beta(x)}
            for w, V in found.items():
                cols[f"V_{w}"] = V.values
            write_table(cfg.outputs.path("plot"), tuple(cols), zip(*cols.values()))
            failed = [w for w, r in report["runs"].items() if not r["verification"]["passed"]]
            if failed or not report.get("least_le_greatest", {"passed": True})["passed"]:
                raise RunFailure(EXIT_VERIFY, "verification", f"verification failed for {', '.join(failed) or 'ordering'}")
        elif command == "verify":
            V = read_solution_csv(solution_csv)
            if abs(V.c - cfg.spec.c) > 1e-12 or abs(V.d - cfg.spec.d) > 1e-12:
                raise ConfigError("solution grid does not span [c, d]")
            rep = full_check(cfg.spec, br, V, res_tol=cfg.solver.res_tol)
            report["verification"] = rep.to_dict()
            if not rep.passed:
                raise RunFailure(EXIT_VERIFY, "verification", f"failed checks: {', '.join(rep.failed())}")
    except RunFailure as exc:
        code = exc.code
        report["error"] = {"kind": exc.kind, "message": str(exc), **exc.detail}
    except ConfigError as exc:
        code = EXIT_CONFIG
        report["error"] = {"kind": "config", "message": str(exc)}
    report["exit_code"] = code
    report["status"] = "ok" if code == EXIT_OK else report["error"]["kind"]
    write_report(cfg.outputs.path("report"), report)
    return code, report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bstc", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve", "build and certify the bracket, solve, verify"),
        ("certify", "build and certify the bracket only"),
        ("verify", "check a solution CSV against the problem"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
        if name == "verify":
            sp.add_argument("solution")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = read_config(args.config, args.override)
    except ConfigError as exc:
        print(json.dumps({"status": "config", "exit_code": EXIT_CONFIG, "error": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    code, report = run(cfg, args.command, Path(args.solution) if args.command == "verify" else None)
    if code != EXIT_OK:
        print(json.dumps(_clean({"status": report["status"], "exit_code": code, "error": report["error"]})), file=sys.stderr)
    else:
        print(f"{args.command}: ok ({cfg.outputs.path('report')})")
    return code


if __name__ == "__main__":
    sys.exit(main())
