"""Acceptance suite: one or more tests per criterion, each recording a pass/fail line.

The summary at the end of the pytest run lists every criterion.
"""

import csv
import functools
import json
import time

import numpy as np
import pytest

import oracles
from fbsplit import cli
from fbsplit import diagnostics as dg
from fbsplit.core import LinesearchParams, Method, SolverConfig, objective
from fbsplit.linesearch import LS2_ROUNDOFF, linesearch1, linesearch2
from fbsplit.problems import ProblemSpec, build_problem
from fbsplit.prox import residual
from fbsplit.solvers import solve

LASSO = ProblemSpec("Lasso", {"m": 30, "n": 50}, seed=0)
QUAD = ProblemSpec("StronglyConvexQuadratic", {"n": 20, "mu": 0.01, "L": 1.0}, seed=0)
PPOWER = ProblemSpec("PPowerNonneg", {"p": 0.5, "start": 1.0})
# from x0 = 1 Method 2 accepts beta = 1 and lands on x* = 0 in one step; any
# start below 4/9 forces beta < 1 and a long run
PPOWER_M2 = ProblemSpec("PPowerNonneg", {"p": 0.5, "start": 0.4})
BOX = ProblemSpec("BoxLeastSquares", {}, seed=0)
EXP = ProblemSpec("ExpUnbounded", {})

DEFAULT = LinesearchParams(sigma=1.0, theta=0.5, delta=0.4)
# alpha_k tends to zero on the p-power problem, so it needs many backtracks
# and no absolute fixed-point cutoff
PPOWER_PARAMS = LinesearchParams(sigma=1.0, theta=0.5, delta=0.4, max_backtracks=2000, zero_residual_tol=0.0)


def memo(fn):
    # ProblemSpec holds a dict, so key the cache on its repr
    cache = {}

    @functools.wraps(fn)
    def wrapper(*args):
        key = repr(args)
        if key not in cache:
            cache[key] = fn(*args)
        return cache[key]

    return wrapper


@memo
def problem(spec):
    return build_problem(spec)


@memo
def reference(spec):
    return dg.reference_solution(problem(spec))


@memo
def trace(spec, method, n):
    params = PPOWER_PARAMS if spec.family.value == "PPowerNonneg" else DEFAULT
    return solve(problem(spec), SolverConfig(method, params=params, residual_tolerance=0.0, max_iterations=n))


def dist0(spec, tr):
    return float(np.linalg.norm(tr.x0 - reference(spec).x_star))


def first_below(tr, f_star, gap):
    hits = np.nonzero(tr.objectives - f_star <= gap)[0]
    return int(hits[0]) if hits.size else None


def kgap(tr, f_star, k):
    return k * (tr.objectives[k] - f_star)


# 1 -------------------------------------------------------------------------


def _random_start(spec, prob, rng):
    x = rng.normal(size=prob.dimension) * rng.choice([0.1, 1.0, 10.0])
    if spec == PPOWER:
        return np.abs(x)
    return prob.nonsmooth.project_domain(x)


def test_criterion_01_linesearch_exactness(record_criterion):
    specs = [LASSO, QUAD, ProblemSpec("PPowerNonneg", {"p": 0.5, "n": 3}), BOX, ProblemSpec("ExpUnbounded", {"n": 2})]
    rng = np.random.default_rng(2024)
    failures, checked, backtracked = [], 0, 0
    t0 = time.perf_counter()
    for i in range(100):
        spec = specs[i % len(specs)]
        prob = problem(spec)
        grad, prox, g = prob.smooth.gradient, prob.nonsmooth.prox, prob.nonsmooth.value
        F = functools.partial(objective, prob)
        x = _random_start(spec, prob, rng)
        params = LinesearchParams(max_backtracks=200)

        out = linesearch1(prob, x, params)
        ok, _ = oracles.ls1_accepts(grad, prox, x, out.stepsize, params.delta)
        if out.trials >= 1:
            prev_ok, _ = oracles.ls1_accepts(grad, prox, x, out.stepsize / params.theta, params.delta)
            ok = ok and not prev_ok
            backtracked += 1
        checked += 1
        if not ok:
            failures.append(("linesearch1", spec.family.value, i))

        out = linesearch2(prob, x, params)
        J = oracles.fb(grad, prox, x, 1.0)

        def accepts(beta):
            trial = (1 - beta) * x + beta * J
            return F(trial) <= oracles.ls2_rhs(F, g, grad, x, J, beta) + LS2_ROUNDOFF * abs(F(x))

        ok = np.array_equal(J, out.accepted_point) and accepts(out.stepsize)
        if out.trials >= 1:
            ok = ok and not accepts(out.stepsize / params.theta)
            backtracked += 1
        checked += 1
        if not ok:
            failures.append(("linesearch2", spec.family.value, i))
    elapsed = time.perf_counter() - t0
    passed = not failures and elapsed < 5.0
    record_criterion(1, "acceptance + minimality", passed, f"{checked} checks, {backtracked} with backtracking, {len(failures)} failures, {elapsed:.2f}s")
    assert backtracked > 0
    assert not failures, failures
    assert elapsed < 5.0


# 2 -------------------------------------------------------------------------


def test_criterion_02_residual_monotonicity(record_criterion):
    specs = [LASSO, QUAD, PPOWER, BOX, EXP]
    rng = np.random.default_rng(7)
    worst, failures = np.inf, 0
    for i in range(1000):
        spec = specs[i % len(specs)]
        prob = problem(spec)
        x = _random_start(spec, prob, rng)
        a1, a2 = np.sort(10.0 ** rng.uniform(-3, 1, size=2))
        r1, r2 = residual(prob, x, a1), residual(prob, x, a2)
        # slack relative to the residual scale; g = 0 makes the right inequality an equality
        slack = min(r2 - r1, (a2 / a1) * r1 - r2) / max(1.0, r2)
        worst = min(worst, slack)
        failures += slack < -1e-10
    record_criterion(2, "1000 triples", failures == 0, f"worst slack {worst:.3g}, {failures} failures")
    assert failures == 0


# 3 -------------------------------------------------------------------------


@pytest.mark.parametrize("spec,n", [(LASSO, 500), (PPOWER, 800)], ids=["lasso", "ppower"])
@pytest.mark.parametrize("method", ["Method1", "Method2"])
def test_criterion_03_descent(record_criterion, spec, n, method):
    if method == "Method2":
        spec, n = (PPOWER_M2 if spec == PPOWER else spec), 500
    tr = trace(spec, method, n)
    cert = dg.certify_descent(tr, Method(method), DEFAULT.delta)
    ok = cert.passed and tr.iterations >= 500
    record_criterion(3, f"{spec.family.value} {method}", ok, f"{tr.iterations} steps, worst margin {cert.worst_margin:.3g}")
    assert tr.iterations >= 500
    assert cert.passed, cert


# 4 -------------------------------------------------------------------------


@pytest.mark.parametrize("spec,n", [(LASSO, 500), (PPOWER, 800)], ids=["lasso", "ppower"])
@pytest.mark.parametrize("method", ["Method1", "Method2"])
def test_criterion_04_fejer(record_criterion, spec, n, method):
    if method == "Method2":
        spec, n = (PPOWER_M2 if spec == PPOWER else spec), 500
    tr = trace(spec, method, n)
    ref = reference(spec)
    mode = "Fejer" if method == "Method1" else "QuasiFejer"
    cert = dg.certify_fejer(tr, ref.x_star, mode, ref.f_star)
    record_criterion(4, f"{spec.family.value} {method} {mode}", cert.passed, f"x* from {ref.provenance}; {cert.details}")
    assert cert.passed, cert


# 5 -------------------------------------------------------------------------


@pytest.mark.parametrize("spec", [QUAD, LASSO], ids=["quadratic", "lasso"])
def test_criterion_05_rate_1k(record_criterion, spec):
    tr = trace(spec, "Method1", 500)
    ref = reference(spec)
    cert = dg.certify_rate_1k(tr, ref.f_star, float(tr.stepsizes.min()), dist0(spec, tr), Method.METHOD1)
    k100, k400 = kgap(tr, ref.f_star, 100), kgap(tr, ref.f_star, 400)
    proxy = k100 > 0 and k400 < 0.5 * k100
    record_criterion(5, f"{spec.family.value} bound", cert.passed, f"worst margin {cert.worst_margin:.3g}")
    record_criterion(5, f"{spec.family.value} k*gap proxy", proxy, f"k*gap(100)={k100:.3g}, k*gap(400)={k400:.3g}")
    assert cert.passed, cert
    assert proxy


# 6 -------------------------------------------------------------------------


def test_criterion_06_accelerated(record_criterion):
    ref = reference(QUAD)
    t3 = trace(QUAD, "Method3", 1000)
    t1 = trace(QUAD, "Method1", 1000)
    cert = dg.certify_rate_accelerated(t3, ref.f_star, dist0(QUAD, t3), DEFAULT.sigma)
    k3, k1 = first_below(t3, ref.f_star, 1e-8), first_below(t1, ref.f_star, 1e-8)
    faster = k3 is not None and (k1 is None or k3 < k1)
    record_criterion(6, "bound", cert.passed, cert.details)
    record_criterion(6, "gap 1e-8 first reached", faster, f"Method3 at k={k3}, Method1 at k={k1}")
    assert cert.passed, cert
    assert faster


# 7 -------------------------------------------------------------------------


def test_criterion_07_linear_rate(record_criterion):
    prob = problem(QUAD)
    tr = trace(QUAD, "Method1", 500)
    mu = prob.smooth.strong_convexity
    cert = dg.certify_linear_rate(tr, prob.known_solution, mu, float(tr.stepsizes.min()))
    record_criterion(7, "quadratic Method1", cert.passed, f"{cert.details}, worst margin {cert.worst_margin:.3g}")
    assert mu == pytest.approx(0.01, rel=1e-9)
    assert cert.passed, cert


# 8 -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "spec,method",
    [(LASSO, "Method1"), (LASSO, "Method2"), (QUAD, "Method1"), (QUAD, "Method2"), (QUAD, "Method3"), (BOX, "Method1"), (BOX, "Method2")],
    ids=lambda v: v if isinstance(v, str) else v.family.value,
)
def test_criterion_08_stepsize_floor(record_criterion, spec, method):
    L = problem(spec).smooth.lipschitz_constant
    tr = trace(spec, method, 1000 if spec == QUAD else 500)
    cert = dg.certify_stepsize_floor(tr, L, DEFAULT, Method(method))
    record_criterion(8, f"{spec.family.value} {method}", cert.passed, cert.details)
    assert cert.passed, cert


# 9 -------------------------------------------------------------------------


def test_criterion_09_iterates_and_stepsizes(record_criterion):
    tr = trace(PPOWER, "Method1", 800)
    x = tr.iterates()[:, 0]
    a = tr.stepsizes
    p, delta = 0.5, PPOWER_PARAMS.delta
    decreasing = bool(np.all(x > 0) and np.all(np.diff(x) < 0))
    upper = bool(np.all(a <= delta / p * x ** (1 - p)))
    k200, k800 = kgap(tr, 0.0, 200), kgap(tr, 0.0, 800)
    record_criterion(9, "positive strictly decreasing iterates", decreasing, f"x_800 = {x[800]:.3g}")
    record_criterion(9, "alpha_k <= delta/p x_k^(1-p)", upper, f"max ratio {np.max(a / (delta / p * x ** (1 - p))):.4f}")
    record_criterion(9, "k*gap(800) < k*gap(200)", k800 < k200, f"{k800:.3g} vs {k200:.3g}")
    # replay of the scalar linesearch confirms the stepsizes themselves
    for k in (0, 10, 100, 400):
        ak, xk1 = oracles.ppower_ls1_oracle(x[k], p, 1.0, 0.5, delta)
        assert ak == a[k] and xk1 == x[k + 1]
    assert decreasing and upper
    assert k800 < k200


def test_criterion_09_remark41_sup_at_most_one_over_theta(record_criterion):
    tr = trace(PPOWER, "Method1", 800)
    theta = PPOWER_PARAMS.theta
    cert = dg.certify_remark41(tr, [0.0], -0.5, bound=1.0 / theta)
    record_criterion(9, "sup |x_k|^(1-p)/alpha_k <= 1/theta", cert.passed, cert.details)
    assert cert.passed, cert


def test_ppower_ratio_within_one_over_delta_theta():
    # backtracking stops at the first alpha with alpha x^(p-1) <= c(delta), and
    # alpha/theta failed, so x^(1-p)/alpha < 1/(delta theta)
    tr = trace(PPOWER, "Method1", 800)
    p = PPOWER_PARAMS
    cert = dg.certify_remark41(tr, [0.0], -0.5, bound=1.0 / (p.delta * p.theta))
    assert cert.passed, cert
    x = tr.iterates()[:, 0]
    ratio = x**0.5 / tr.stepsizes
    assert ratio.max() < 1.0 / (p.delta * p.theta)


# 10 ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "spec,n",
    [(LASSO, 500), (QUAD, 1000), (PPOWER, 800), (BOX, 500), (EXP, 400)],
    ids=["lasso", "quadratic", "ppower", "box", "exp"],
)
def test_criterion_10_residual_decay(record_criterion, spec, n):
    tr = trace(spec, "Method1", n)
    cert = dg.certify_residual_decay(tr)
    record_criterion(10, spec.family.value, cert.passed, cert.details)
    assert tr.iterations >= 400
    assert cert.passed, cert


# 11 ------------------------------------------------------------------------


@pytest.mark.parametrize("spec", [LASSO, QUAD], ids=["lasso", "quadratic"])
def test_criterion_11_compare_accounting(record_criterion, spec):
    def run_config(method):
        return cli.RunConfig(
            problem=spec, solver=SolverConfig(method, params=DEFAULT, residual_tolerance=1e-10, max_iterations=3000)
        )

    runs = [run_config("Method1"), run_config("Method2")]
    rows = {r["method"]: r for r in cli.compare_runs(runs)}
    t1 = solve(build_problem(spec), runs[0].solver)
    m2 = rows["Method2"]["cum_prox"] == rows["Method2"]["iterations"]
    m1 = rows["Method1"]["cum_prox"] == int(np.sum(t1.column("ls_trials") + 1))
    record_criterion(
        11,
        spec.family.value,
        m1 and m2,
        f"Method2 cum_prox {rows['Method2']['cum_prox']} / iterations {rows['Method2']['iterations']}; "
        f"Method1 cum_prox {rows['Method1']['cum_prox']}",
    )
    assert m2 and m1


# 12 ------------------------------------------------------------------------


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_criterion_12_determinism(record_criterion, tmp_path, monkeypatch, fmt):
    doc = {
        "problem": {"family": "Lasso", "parameters": {"m": 30, "n": 50}, "seed": 0},
        "solver": {"method": "Method2", "max_iterations": 400, "residual_tolerance": 0.0},
        "certificates": ["descent", "fejer"],
        "trace_format": fmt,
    }
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(doc))
    blobs = []
    for name in ("first", "second"):
        monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / name))
        assert cli.main(["run", str(cfg)]) == 0
        blobs.append((tmp_path / name / f"trace.{fmt}").read_bytes())
    same = blobs[0] == blobs[1]
    record_criterion(12, fmt, same, f"{len(blobs[0])} bytes")
    if fmt == "csv":
        with open(tmp_path / "first" / "trace.csv") as fh:
            assert len(list(csv.reader(fh))) == 402
    assert same
