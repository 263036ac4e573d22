"""Command-line driver: run experiments from JSON configs and persist traces.

Verbs
-----
``fbsplit run CONFIG``
    Build the problem, solve, certify, and write ``trace.csv`` (or
    ``trace.json``), ``report.txt`` and ``summary.json`` to the output
    directory.  Exit 0 iff every requested certificate passed and the solver
    did not fail; 1 on solver failure or a failed certificate; 2 on an
    invalid config.
``fbsplit compare CONFIG...``
    Run configs that share one problem and write ``comparison.csv``.
``fbsplit list-problems`` / ``fbsplit list-certificates``

The environment variable ``FBSPLIT_OUTPUT_DIR`` overrides ``output_dir``.

Config example::

    {
      "problem": {"family": "Lasso", "parameters": {"n": 50}, "seed": 0},
      "solver": {"method": "Method1", "max_iterations": 500,
                 "params": {"theta": 0.5, "delta": 0.4}},
      "certificates": [{"name": "descent"}, {"name": "fejer"}],
      "output_dir": "out",
      "trace_format": "csv"
    }
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import diagnostics as dg
from .core import CompositeProblem, LinesearchParams, Method, SolverConfig, as_vector, norm, objective
from .problems import FAMILY_PARAMETERS, Family, ProblemSpec, build_problem
from .solvers import SolverTrace, Termination, solve

OUTPUT_ENV = "FBSPLIT_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

TRACE_COLUMNS = (
    "k",
    "objective",
    "stepsize",
    "residual",
    "step_norm",
    "ls_trials",
    "cum_prox",
    "cum_grad",
    "cum_f",
    "dist_to_solution",
    "t_k",
)

_RECORD_FIELDS = {
    "objective": "objective_value",
    "residual": "residual_norm",
}

# name -> (statement, tolerance, accepted options)
CERTIFICATES: Dict[str, tuple] = {
    "descent": ("pairwise sufficient decrease (Method 1 / Method 2 forms)", dg.DESCENT_TOL, set()),
    "fejer": ("Fejer or quasi-Fejer monotonicity to x*", dg.FEJER_TOL, {"mode"}),
    "rate_1k": ("F(x^k) - F* <= C / k with the observed stepsize floor", dg.RATE_TOL, {"alpha_floor"}),
    "rate_accelerated": ("F(x^k) - F* <= C / (k+1)^2 for Method 3", dg.RATE_TOL, set()),
    "linear_rate": ("||x^{k+1}-x*|| <= ||x^k-x*|| / sqrt(1 + alpha mu)", dg.LINEAR_RATE_TOL, {"alpha_floor"}),
    "residual_decay": ("liminf sqrt(k) * residual = 0 (checkpoint proxy)", 0.0, set()),
    "remark41": ("limsup ||x^k-x*||^{1+lambda} / alpha_k < inf", dg.REMARK41_TOL, {"lambda", "bound"}),
    "stepsize_floor": ("stepsizes stay above the Lipschitz floor", dg.FLOOR_TOL, set()),
    "trace_integrity": ("stored values match oracle recomputation", dg.INTEGRITY_RTOL, set()),
}

# certificates that need a minimizer x*
_NEEDS_SOLUTION = {"fejer", "rate_1k", "rate_accelerated", "linear_rate", "remark41"}
_METHODS_FOR = {
    "descent": {Method.METHOD1, Method.METHOD2},
    "rate_1k": {Method.METHOD1, Method.METHOD2},
    "rate_accelerated": {Method.METHOD3},
    "linear_rate": {Method.METHOD1},
    "remark41": {Method.METHOD1},
    "stepsize_floor": {Method.METHOD1, Method.METHOD2, Method.METHOD3},
}


class ConfigError(ValueError):
    """Invalid or unsatisfiable configuration (exit status 2)."""


@dataclass(frozen=True)
class CertificateRequest:
    name: str
    options: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    solver: SolverConfig
    certificates: List[CertificateRequest] = field(default_factory=list)
    output_dir: str = "fbsplit_output"
    trace_format: str = "csv"
    x0: Optional[List[float]] = None


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a decoded config document; raises :class:`ConfigError`."""
    _check_keys(data, {"problem", "solver", "certificates", "output_dir", "trace_format", "x0"}, "config")
    for key in ("problem", "solver"):
        if key not in data:
            raise ConfigError(f"config is missing '{key}'")
    prob = data["problem"]
    _check_keys(prob, {"family", "parameters", "seed"}, "problem")
    solver = data["solver"]
    _check_keys(
        solver,
        {"method", "params", "fixed_stepsize", "residual_tolerance", "max_iterations"},
        "solver",
    )
    params = solver.get("params", {})
    _check_keys(params, {"sigma", "theta", "delta", "max_backtracks", "zero_residual_tol"}, "solver.params")
    try:
        spec = ProblemSpec(Family(prob.get("family")), dict(prob.get("parameters", {})), prob.get("seed"))
        config = SolverConfig(
            method=Method(solver.get("method")),
            params=LinesearchParams(**params),
            fixed_stepsize=solver.get("fixed_stepsize"),
            residual_tolerance=solver.get("residual_tolerance", 1e-10),
            max_iterations=solver.get("max_iterations", 1000),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    certs = []
    for item in data.get("certificates", []):
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError("each certificate needs a 'name'")
        name = item["name"]
        if name not in CERTIFICATES:
            raise ConfigError(f"unknown certificate {name!r}; see list-certificates")
        options = {k: v for k, v in item.items() if k != "name"}
        _check_keys(options, CERTIFICATES[name][2], f"certificate {name}")
        certs.append(CertificateRequest(name, options))
    fmt = data.get("trace_format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("trace_format must be 'csv' or 'json'")
    return RunConfig(spec, config, certs, str(data.get("output_dir", "fbsplit_output")), fmt, data.get("x0"))


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(data)


def validate_certificates(run: RunConfig, problem: CompositeProblem):
    """Reject certificates whose inputs the problem cannot supply."""
    method = run.solver.method
    for req in run.certificates:
        name = req.name
        methods = _METHODS_FOR.get(name)
        if methods is not None and method not in methods:
            raise ConfigError(f"certificate {name} does not apply to {method.value}")
        if name in _NEEDS_SOLUTION and problem.known_solution is None and problem.infimum is not None:
            raise ConfigError(f"certificate {name} needs a minimizer, but {problem.name} has none")
        if name == "stepsize_floor" and problem.smooth.lipschitz_constant is None:
            raise ConfigError(f"certificate stepsize_floor needs a global Lipschitz constant; {problem.name} has none")
        if name == "linear_rate" and not (problem.smooth.strong_convexity or 0) > 0:
            raise ConfigError(f"certificate linear_rate needs strong convexity; {problem.name} has mu = 0 or unknown")
        if name == "remark41":
            lam = req.options.get("lambda", 0.0)
            if not -1.0 <= lam < 1.0:
                raise ConfigError(f"remark41 lambda must lie in [-1, 1), got {lam!r}")
        if name == "fejer" and req.options.get("mode", "Fejer") not in ("Fejer", "QuasiFejer"):
            raise ConfigError("fejer mode must be 'Fejer' or 'QuasiFejer'")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def trace_rows(trace: SolverTrace) -> List[List[Any]]:
    rows = []
    for r in trace.records:
        rows.append([getattr(r, _RECORD_FIELDS.get(c, c)) for c in TRACE_COLUMNS])
    return rows


def write_trace(trace: SolverTrace, path: Path, fmt: str):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(trace):
            w.writerow([_fmt(v) for v in row])
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        doc = {
            "columns": list(TRACE_COLUMNS),
            "rows": trace_rows(trace),
            "termination": trace.termination.value,
            "final_point": trace.final_point.tolist(),
        }
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _reference(problem: CompositeProblem, run: RunConfig):
    if problem.known_solution is not None:
        return dg.reference_solution(problem)
    if problem.infimum is not None:
        return None
    return dg.reference_solution(problem, params=run.solver.params)


def evaluate_certificates(run: RunConfig, problem: CompositeProblem, trace: SolverTrace, ref) -> List[tuple]:
    """Return ``(request, certificate or None, error message)`` per request."""
    out = []
    params = run.solver.params
    method = trace.method
    x_star = ref.x_star if ref is not None else None
    f_star = ref.f_star if ref is not None else None
    dist0 = norm(trace.x0 - x_star) if x_star is not None else None
    for req in run.certificates:
        o = req.options
        try:
            if req.name == "descent":
                cert = dg.certify_descent(trace, method, params.delta)
            elif req.name == "fejer":
                cert = dg.certify_fejer(trace, x_star, o.get("mode", "Fejer"), f_star)
            elif req.name == "rate_1k":
                cert = dg.certify_rate_1k(trace, f_star, o.get("alpha_floor"), dist0, method)
            elif req.name == "rate_accelerated":
                cert = dg.certify_rate_accelerated(trace, f_star, dist0, params.sigma)
            elif req.name == "linear_rate":
                cert = dg.certify_linear_rate(trace, x_star, problem.smooth.strong_convexity, o.get("alpha_floor"))
            elif req.name == "residual_decay":
                cert = dg.certify_residual_decay(trace)
            elif req.name == "remark41":
                cert = dg.certify_remark41(trace, x_star, o.get("lambda", 0.0), o.get("bound"))
            elif req.name == "stepsize_floor":
                cert = dg.certify_stepsize_floor(trace, problem.smooth.lipschitz_constant, params, method)
            else:
                cert = dg.cross_validate(trace, problem)
            out.append((req, cert, None))
        except dg.CertificateError as exc:
            out.append((req, None, str(exc)))
    return out


def format_report(results, ref) -> str:
    lines = []
    provenance = ref.provenance if ref is not None else "none (no minimizer)"
    lines.append(f"x*/F* provenance: {provenance}")
    for req, cert, err in results:
        lines.append("")
        if cert is None:
            lines.append(f"[{req.name}] ERROR")
            lines.append(f"  error: {err}")
            continue
        lines.append(f"[{cert.name}] {'PASS' if cert.passed else 'FAIL'}")
        lines.append(f"  inequality: {cert.statement}")
        lines.append(f"  tolerance: {cert.tolerance:g}")
        lines.append(f"  worst_margin: {cert.worst_margin:.17g}")
        lines.append(f"  worst_index: {cert.worst_index}")
        lines.append(f"  verdict: {cert.verdict}")
        if cert.details:
            lines.append(f"  details: {cert.details}")
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def output_dir(run: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or run.output_dir)


def execute(run: RunConfig) -> tuple:
    """Build, solve and certify; returns ``(problem, trace, ref, results)``."""
    problem = build_problem(run.problem)
    validate_certificates(run, problem)
    x0 = None
    if run.x0 is not None:
        try:
            x0 = as_vector(run.x0, problem.dimension)
        except ValueError as exc:
            raise ConfigError(f"x0: {exc}") from None
        if not problem.nonsmooth.in_domain(x0):
            raise ConfigError("x0 must lie in dom g")
    ref = _reference(problem, run) if any(r.name in _NEEDS_SOLUTION for r in run.certificates) else None
    trace = solve(problem, run.solver, x0)
    results = evaluate_certificates(run, problem, trace, ref)
    return problem, trace, ref, results


def run_command(run: RunConfig, out: Path) -> int:
    problem, trace, ref, results = execute(run)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"trace.{run.trace_format}"
    write_trace(trace, trace_path, run.trace_format)
    (out / "report.txt").write_text(format_report(results, ref), encoding="utf-8")
    last = trace.records[-1] if trace.records else None
    summary = {
        "problem": problem.name,
        "method": trace.method.value,
        "termination": trace.termination.value,
        "failure": trace.failure,
        "iterations": trace.iterations,
        "final_objective": objective(problem, trace.final_point),
        "cum_prox": last.cum_prox if last else 0,
        "cum_grad": last.cum_grad if last else 0,
        "cum_f": last.cum_f if last else 0,
        "reference": ref.provenance if ref is not None else None,
        "certificates": {
            req.name: (cert.passed if cert is not None else None) for req, cert, _ in results
        },
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    solver_ok = trace.termination not in (Termination.LINESEARCH_FAILURE, Termination.DIVERGENCE)
    certs_ok = all(cert is not None and cert.passed for _, cert, _ in results)
    return EXIT_OK if solver_ok and certs_ok else EXIT_FAIL


COMPARE_COLUMNS = (
    "method",
    "termination",
    "iterations",
    "iterations_to_gap",
    "cum_prox",
    "cum_grad",
    "cum_f",
    "final_objective",
    "final_gap",
)


def first_index_below(trace: SolverTrace, f_star: float, gap: float) -> Optional[int]:
    hits = np.nonzero(trace.objectives - f_star <= gap)[0]
    return int(trace.records[hits[0]].k) if hits.size else None


def compare_runs(runs: Sequence[RunConfig], gap: float = 1e-8) -> List[Dict[str, Any]]:
    """Solve every config on the shared problem and tabulate oracle costs."""
    if not runs:
        raise ConfigError("compare needs at least one config")
    base = runs[0].problem
    for r in runs[1:]:
        if json.dumps(_jsonable(r.problem.parameters), sort_keys=True) != json.dumps(
            _jsonable(base.parameters), sort_keys=True
        ) or (r.problem.family, r.problem.seed) != (base.family, base.seed):
            raise ConfigError("compare requires every config to use the same problem and seed")
    problem = build_problem(base)
    ref = _reference(problem, runs[0])
    f_star = ref.f_star if ref is not None else problem.infimum
    rows = []
    for r in runs:
        trace = solve(problem, r.solver, r.x0)
        last = trace.records[-1]
        final = objective(problem, trace.final_point)
        rows.append(
            {
                "method": trace.method.value,
                "termination": trace.termination.value,
                "iterations": trace.iterations,
                "iterations_to_gap": first_index_below(trace, f_star, gap) if f_star is not None else None,
                "cum_prox": last.cum_prox,
                "cum_grad": last.cum_grad,
                "cum_f": last.cum_f,
                "final_objective": final,
                "final_gap": final - f_star if f_star is not None else None,
            }
        )
    return rows


def write_comparison(rows, path: Path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for row in rows:
        w.writerow([row[c] if isinstance(row[c], str) else _fmt(row[c]) for c in COMPARE_COLUMNS])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _list_problems() -> str:
    lines = []
    for fam in Family:
        lines.append(f"{fam.value}: parameters {', '.join(sorted(FAMILY_PARAMETERS[fam]))}")
    return "\n".join(lines)


def _list_certificates() -> str:
    lines = []
    for name, (statement, tol, opts) in CERTIFICATES.items():
        extra = f" options: {', '.join(sorted(opts))}" if opts else ""
        lines.append(f"{name}: {statement} (tolerance {tol:g}){extra}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbsplit", description="Forward-backward splitting experiments")
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="solve one config and certify the trace")
    p_run.add_argument("config")
    p_cmp = sub.add_parser("compare", help="compare methods on one shared problem")
    p_cmp.add_argument("configs", nargs="*")
    p_cmp.add_argument("--gap", type=float, default=1e-8, help="gap threshold for iterations_to_gap")
    p_cmp.add_argument("--output", help="comparison table path (default <output_dir>/comparison.csv)")
    sub.add_parser("list-problems", help="list problem families and their parameters")
    sub.add_parser("list-certificates", help="list certificate names, statements and tolerances")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "list-problems":
            print(_list_problems())
            return EXIT_OK
        if args.verb == "list-certificates":
            print(_list_certificates())
            return EXIT_OK
        if args.verb == "run":
            run = load_config(args.config)
            out = output_dir(run)
            status = run_command(run, out)
            print((out / "report.txt").read_text(encoding="utf-8"), end="")
            print(f"outputs written to {out}")
            return status
        runs = [load_config(p) for p in args.configs]
        rows = compare_runs(runs, args.gap)
        path = Path(args.output) if args.output else output_dir(runs[0]) / "comparison.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_comparison(rows, path)
        print(path.read_text(encoding="utf-8"), end="")
        return EXIT_OK
    except ConfigError as exc:
        print(f"fbsplit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
