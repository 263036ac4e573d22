"""Post-hoc certification of convergence inequalities on solver traces.

Each ``certify_*`` function is a pure function of a :class:`SolverTrace` and
a few scalars; none of them calls a problem oracle.  A certificate records
the statement checked, the tolerance used, the most negative normalized slack
(``worst_margin``) and where it occurred.

Asymptotic statements (liminf / o(1/k)) are checked through finite-sample
proxies.  A proxy that does not hold is reported with the verdict
``"not observed at this horizon"``, distinct from ``"violated"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .core import CompositeProblem, LinesearchParams, Method, SolverConfig, objective, row_norms
from .solvers import SolverTrace, solve_method1

DESCENT_TOL = 1e-9
FEJER_TOL = 1e-9
RATE_TOL = 1e-9
LINEAR_RATE_TOL = 1e-9
REMARK41_TOL = 1e-6
FLOOR_TOL = 1e-12
QUASI_FEJER_SUM_TOL = 1e-6
INTEGRITY_RTOL = 1e-8

PASS = "pass"
VIOLATED = "violated"
NOT_OBSERVED = "not observed at this horizon"
REPORT_ONLY = "report-only"


class CertificateError(ValueError):
    """A certificate's preconditions do not hold for the given trace."""


@dataclass(frozen=True)
class Certificate:
    name: str
    statement: str
    passed: bool
    worst_margin: float
    worst_index: int
    tolerance: float
    verdict: str
    details: str = ""
    values: Dict[str, Any] = field(default_factory=dict)


def _inequality(name, statement, margins, indices, tol, details="", values=None) -> Certificate:
    margins = np.asarray(margins, dtype=np.float64)
    if margins.size == 0:
        worst, where = math.inf, -1
    else:
        i = int(np.argmin(margins))
        worst, where = float(margins[i]), int(indices[i])
    passed = bool(worst >= -tol)
    return Certificate(
        name=name,
        statement=statement,
        passed=passed,
        worst_margin=worst,
        worst_index=where,
        tolerance=tol,
        verdict=PASS if passed else VIOLATED,
        details=details,
        values=dict(values or {}),
    )


def _need_records(trace: SolverTrace, n: int, what: str):
    if len(trace.records) < n:
        raise CertificateError(f"{what} needs at least {n} records, trace has {len(trace.records)}")


def _distances(trace: SolverTrace, x_star) -> np.ndarray:
    if x_star is None:
        raise CertificateError("x_star is required")
    try:
        X = trace.iterates()
    except ValueError as exc:
        raise CertificateError(str(exc)) from None
    return row_norms(X - np.asarray(x_star, dtype=np.float64))


def _method(trace: SolverTrace, method) -> Method:
    return Method(method) if method is not None else trace.method


def certify_descent(trace: SolverTrace, method=None, delta: Optional[float] = None) -> Certificate:
    """Pairwise sufficient decrease.

    Method 1: ``F(x^{k+1}) - F(x^k) <= -(1 - delta) / alpha_k * ||x^{k+1} - x^k||^2``.
    Method 2: ``F(x^k) - F(x^{k+1}) >= 1/2 ||x^{k+1} - x^k||^2``.
    Slack is normalized by ``|F(x^k)| + 1``.
    """
    method = _method(trace, method)
    _need_records(trace, 2, "certify_descent")
    F = trace.objectives
    step2 = trace.step_norms[:-1] ** 2
    scale = np.abs(F[:-1]) + 1.0
    decrease = F[:-1] - F[1:]
    if method is Method.METHOD1:
        if delta is None or not 0 < delta < 0.5:
            raise CertificateError("Method 1 descent needs delta in (0, 1/2)")
        required = (1.0 - delta) / trace.stepsizes[:-1] * step2
        statement = "F(x^{k+1}) - F(x^k) <= -(1-delta)/alpha_k ||x^{k+1}-x^k||^2"
    elif method is Method.METHOD2:
        required = 0.5 * step2
        statement = "F(x^k) - F(x^{k+1}) >= 1/2 ||x^{k+1}-x^k||^2"
    else:
        raise CertificateError(f"no descent inequality is certified for {method.value}")
    margins = (decrease - required) / scale
    return _inequality(
        "descent",
        statement,
        margins,
        np.arange(1, len(F)),
        DESCENT_TOL,
        details=f"{method.value}, {len(margins)} consecutive pairs, slack relative to |F(x^k)|+1",
    )


def certify_fejer(trace: SolverTrace, x_star, mode: str = "Fejer", f_star: Optional[float] = None) -> Certificate:
    """Fejer: ``||x^{k+1} - x*|| <= ||x^k - x*||``.

    Quasi-Fejer: ``||x^{k+1} - x*||^2 <= ||x^k - x*||^2 + eps_k`` with
    ``eps_k = 2 [F(x^k) - F(x^{k+1})]``; also reports ``sum eps_k`` and,
    when ``f_star`` is given, checks it against ``2 [F(x^0) - F*]``.
    """
    _need_records(trace, 2, "certify_fejer")
    d = _distances(trace, x_star)
    idx = np.arange(1, len(d))
    if mode == "Fejer":
        margins = (d[:-1] - d[1:]) / (1.0 + d[:-1])
        return _inequality(
            "fejer",
            "||x^{k+1}-x*|| <= ||x^k-x*||",
            margins,
            idx,
            FEJER_TOL,
            details=f"distance to x* from {d[0]:.6g} to {d[-1]:.6g}",
        )
    if mode != "QuasiFejer":
        raise CertificateError(f"unknown Fejer mode {mode!r}")
    F = trace.objectives
    eps = 2.0 * (F[:-1] - F[1:])
    margins = (d[:-1] ** 2 + eps - d[1:] ** 2) / (1.0 + d[:-1] ** 2)
    total = float(np.sum(eps))
    values = {"sum_eps": total}
    cert = _inequality(
        "quasi_fejer",
        "||x^{k+1}-x*||^2 <= ||x^k-x*||^2 + 2[F(x^k)-F(x^{k+1})]",
        margins,
        idx,
        FEJER_TOL,
        values=values,
    )
    details = f"sum eps_k = {total:.6g}"
    passed = cert.passed
    if f_star is not None:
        budget = 2.0 * (F[0] - f_star)
        values["eps_budget"] = budget
        details += f" (budget 2[F(x0)-F*] = {budget:.6g})"
        if total > budget + QUASI_FEJER_SUM_TOL:
            passed = False
    return Certificate(
        name=cert.name,
        statement=cert.statement,
        passed=passed,
        worst_margin=cert.worst_margin,
        worst_index=cert.worst_index,
        tolerance=cert.tolerance,
        verdict=PASS if passed else VIOLATED,
        details=details,
        values=values,
    )


def kgap_sequence(trace: SolverTrace, f_star: float) -> np.ndarray:
    """``k * [F(x^k) - F*]`` indexed by record."""
    k = trace.column("k")
    return k * (trace.objectives - f_star)


def _o1k_indicator(trace: SolverTrace, f_star: float) -> Dict[str, Any]:
    kg = kgap_sequence(trace, f_star)
    n = len(kg)
    start = max(1, int(math.floor(0.75 * (n - 1))))
    tail = kg[start:]
    return {
        "kgap_first": float(kg[1]) if n > 1 else math.nan,
        "kgap_tail_start": float(tail[0]),
        "kgap_last": float(tail[-1]),
        "tail_decreasing": bool(tail[-1] < tail[0]) if tail.size > 1 else False,
    }


def certify_rate_1k(
    trace: SolverTrace,
    f_star: float,
    alpha_floor: Optional[float] = None,
    dist0: Optional[float] = None,
    method=None,
) -> Certificate:
    """``F(x^k) - F* <= dist(x^0, S*)^2 / (2 alpha k)`` for Method 1, and
    ``(dist^2 + 2[F(x^0) - F*]) / (2 beta k)`` for Method 2, at every ``k >= 1``.

    ``alpha_floor`` defaults to the smallest recorded stepsize.  Also reports
    the ``k * gap`` tail as an o(1/k) indicator (report-only).
    """
    method = _method(trace, method)
    _need_records(trace, 2, "certify_rate_1k")
    if alpha_floor is None:
        alpha_floor = float(np.min(trace.stepsizes))
    if not alpha_floor > 0:
        raise CertificateError("alpha_floor must be positive; without a stepsize floor use certify_remark41")
    if dist0 is None:
        dist0 = trace.records[0].dist_to_solution
        if dist0 is None:
            raise CertificateError("dist0 is required when the trace has no distance to a known solution")
    F = trace.objectives
    k = trace.column("k")[1:]
    gap = F[1:] - f_star
    if method is Method.METHOD1:
        numer = dist0**2
        statement = "F(x^k) - F* <= dist(x0,S*)^2 / (2 alpha k)"
    elif method is Method.METHOD2:
        numer = dist0**2 + 2.0 * (F[0] - f_star)
        statement = "F(x^k) - F* <= (dist(x0,S*)^2 + 2[F(x0)-F*]) / (2 beta k)"
    else:
        raise CertificateError(f"no 1/k rate is certified for {method.value}")
    bound = numer / (2.0 * alpha_floor * k)
    margins = (bound - gap) / (1.0 + abs(f_star))
    values = {"alpha_floor": alpha_floor, "dist0": dist0}
    values.update(_o1k_indicator(trace, f_star))
    return _inequality(
        "rate_1k",
        statement,
        margins,
        k.astype(int),
        RATE_TOL,
        details=f"{method.value}, alpha floor {alpha_floor:.6g}; o(1/k) tail decreasing: {values['tail_decreasing']}",
        values=values,
    )


def certify_rate_accelerated(trace: SolverTrace, f_star: float, dist0: float, sigma: float) -> Certificate:
    """``F(x^k) - F* <= (2/alpha) (||x0 - x*||^2 + 2 sigma [F(x0) - F*]) / (k+1)^2``.

    ``alpha`` is the smallest recorded stepsize (the last one, since Method 3
    stepsizes never increase).  The same gaps are compared, report-only,
    against the bound without the ``2 sigma [...]`` term.
    """
    if trace.method is not Method.METHOD3:
        raise CertificateError(f"accelerated rate applies to Method3 traces, not {trace.method.value}")
    _need_records(trace, 2, "certify_rate_accelerated")
    steps = trace.stepsizes
    if np.any(np.diff(steps) > 0):
        raise CertificateError("Method 3 stepsizes must be nonincreasing")
    alpha = float(steps.min())
    F = trace.objectives
    k = trace.column("k")[1:]
    gap = F[1:] - f_star
    numer = dist0**2 + 2.0 * sigma * (F[0] - f_star)
    bound = (2.0 / alpha) * numer / (k + 1.0) ** 2
    tight = (2.0 / alpha) * dist0**2 / (k + 1.0) ** 2
    above_tight = int(np.sum(gap > tight))
    return _inequality(
        "rate_accelerated",
        "F(x^k) - F* <= (2/alpha)(||x0-x*||^2 + 2 sigma [F(x0)-F*]) / (k+1)^2",
        (bound - gap) / (1.0 + abs(f_star)),
        k.astype(int),
        RATE_TOL,
        details=f"alpha = {alpha:.6g}; {above_tight} iterates exceed the bound without the 2 sigma term (report-only)",
        values={"alpha": alpha, "tighter_bound_exceedances": above_tight},
    )


def certify_linear_rate(trace: SolverTrace, x_star, mu: Optional[float], alpha_floor: Optional[float] = None) -> Certificate:
    """``||x^{k+1} - x*|| <= ||x^k - x*|| / sqrt(1 + alpha mu)`` pairwise."""
    if mu is None or not mu > 0:
        raise CertificateError("a positive strong convexity constant mu is required")
    # a single record (x0 already optimal) passes vacuously
    _need_records(trace, 1, "certify_linear_rate")
    if alpha_floor is None:
        alpha_floor = float(np.min(trace.stepsizes))
    d = _distances(trace, x_star)
    factor = 1.0 / math.sqrt(1.0 + alpha_floor * mu)
    margins = (factor * d[:-1] - d[1:]) / (1.0 + d[:-1])
    return _inequality(
        "linear_rate",
        "||x^{k+1}-x*|| <= ||x^k-x*|| / sqrt(1 + alpha mu)",
        margins,
        np.arange(1, len(d)),
        LINEAR_RATE_TOL,
        details=f"contraction factor {factor:.6g} (alpha {alpha_floor:.6g}, mu {mu:.6g})",
        values={"factor": factor},
    )


def certify_residual_decay(trace: SolverTrace) -> Certificate:
    """Finite-sample proxy for ``liminf sqrt(k) ||x^k - J(x^k, alpha_k)|| = 0``.

    With ``N`` the last index, ``m_K = min_{1 <= k <= K} sqrt(k) r_k`` must
    strictly decrease across ``K = N/4, N/2, N``.  Once ``m_K`` is exactly 0
    the limit is attained and later checkpoints are satisfied.
    """
    _need_records(trace, 10, "certify_residual_decay")
    k = trace.column("k")
    r = trace.residuals
    n = int(k[-1])
    scaled = np.sqrt(k[1:]) * r[1:]
    running = np.minimum.accumulate(scaled)
    checkpoints = [max(1, n // 4), max(1, n // 2), n]
    m = [float(running[c - 1]) for c in checkpoints]
    margins, ok = [], True
    for prev, nxt in zip(m, m[1:]):
        if prev == 0.0:
            margins.append(0.0)
            continue
        margins.append((prev - nxt) / prev)
        ok = ok and nxt < prev
    i = int(np.argmin(margins))
    return Certificate(
        name="residual_decay",
        statement="liminf sqrt(k) ||x^k - J(x^k,alpha_k)|| = 0 (checkpoints N/4, N/2, N)",
        passed=ok,
        worst_margin=float(margins[i]),
        worst_index=checkpoints[i + 1],
        tolerance=0.0,
        verdict=PASS if ok else NOT_OBSERVED,
        details="m_K = " + ", ".join(f"{v:.6g}@{c}" for v, c in zip(m, checkpoints)),
        values={"checkpoints": checkpoints, "m": m},
    )


def certify_remark41(
    trace: SolverTrace,
    x_star,
    lam: float,
    bound: Optional[float] = None,
) -> Certificate:
    """Report ``sup ||x^k - x*||^{1+lam} / alpha_k`` over the last half of the run.

    Without ``bound`` the certificate is report-only and passes when the
    supremum is finite.  With ``bound`` it passes when the supremum is at
    most ``bound + 1e-6``.
    """
    if x_star is None:
        raise CertificateError("x_star is required")
    if not -1.0 <= lam < 1.0:
        raise CertificateError(f"lambda must lie in [-1, 1), got {lam!r}")
    _need_records(trace, 2, "certify_remark41")
    d = _distances(trace, x_star)
    ratio = d ** (1.0 + lam) / trace.stepsizes
    half = len(ratio) // 2
    tail = ratio[half:]
    i = int(np.argmax(tail))
    sup = float(tail[i])
    values = {"sup": sup, "lambda": lam}
    statement = "limsup ||x^k-x*||^{1+lambda} / alpha_k < +inf (sup over last half)"
    if bound is None:
        passed = math.isfinite(sup)
        return Certificate(
            "remark41", statement, passed, 0.0 if passed else -math.inf, half + i, REMARK41_TOL,
            REPORT_ONLY if passed else VIOLATED, details=f"sup = {sup:.6g}", values=values,
        )
    values["bound"] = bound
    margin = float(bound - sup)
    passed = margin >= -REMARK41_TOL
    return Certificate(
        "remark41", statement + f" <= {bound:.6g}", passed, margin, half + i, REMARK41_TOL,
        PASS if passed else VIOLATED, details=f"sup = {sup:.6g}, bound = {bound:.6g}", values=values,
    )


def certify_stepsize_floor(trace: SolverTrace, L: Optional[float], params: LinesearchParams, method=None) -> Certificate:
    """Lower bounds on accepted stepsizes under a global Lipschitz constant ``L``.

    Method 1: ``alpha_k >= min(sigma, delta theta / L)``.
    Method 2: ``beta_k >= min(1, theta / (2 L))``.
    Method 3: only positivity of the final stepsize (no closed-form floor).
    """
    if L is None:
        raise CertificateError(
            "no global Lipschitz constant for this problem; use certify_remark41 for stepsizes tending to zero"
        )
    method = _method(trace, method)
    steps = trace.stepsizes
    if method is Method.METHOD1:
        floor = min(params.sigma, params.delta * params.theta / L)
        statement = "alpha_k >= min(sigma, delta theta / L)"
    elif method is Method.METHOD2:
        floor = min(1.0, params.theta / (2.0 * L))
        statement = "beta_k >= min(1, theta / (2L))"
    elif method is Method.METHOD3:
        final = float(steps[-1])
        passed = final > 0
        return Certificate(
            "stepsize_floor", "alpha_k > 0 (Method 3)", passed, final, len(steps) - 1, 0.0,
            PASS if passed else VIOLATED, details=f"final stepsize {final:.6g}",
        )
    else:
        raise CertificateError(f"no stepsize floor is certified for {method.value}")
    return _inequality(
        "stepsize_floor",
        statement,
        steps - floor,
        np.arange(len(steps)),
        FLOOR_TOL,
        details=f"floor {floor:.6g}, smallest stepsize {steps.min():.6g}",
        values={"floor": floor},
    )


def cross_validate(trace: SolverTrace, problem: CompositeProblem) -> Certificate:
    """Recompute stored objective values and distances from the oracles.

    Mismatch above ``1e-8`` relative flags a corrupted trace.
    """
    X = trace.iterates()
    F = trace.objectives
    recomputed = np.array([objective(problem, x) for x in X])
    margins = -np.abs(recomputed - F) / (1.0 + np.abs(F))
    if problem.known_solution is not None:
        dist = row_norms(X - problem.known_solution)
        stored = trace.column("dist_to_solution")
        margins = np.minimum(margins, -np.abs(dist - stored) / (1.0 + dist))
    return _inequality(
        "trace_integrity",
        "stored F(x^k) and ||x^k-x*|| match oracle recomputation",
        margins,
        np.arange(len(F)),
        INTEGRITY_RTOL,
    )


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    provenance: str


def reference_solution(
    problem: CompositeProblem,
    params: Optional[LinesearchParams] = None,
    tol: float = 1e-12,
    max_iterations: int = 100_000,
    x0=None,
) -> ReferenceSolution:
    """``x*`` and ``F*`` from metadata, else from a tight Method 1 solve."""
    if problem.known_solution is not None:
        return ReferenceSolution(problem.known_solution, float(problem.optimal_value), "metadata")
    if problem.infimum is not None:
        raise CertificateError("the problem has no minimizer (empty solution set)")
    config = SolverConfig(
        method=Method.METHOD1,
        params=params or LinesearchParams(),
        residual_tolerance=tol,
        max_iterations=max_iterations,
        record_iterates=False,
    )
    start = problem.default_start if x0 is None else x0
    trace = solve_method1(problem, config, start)
    x_star = trace.final_point
    return ReferenceSolution(
        x_star,
        objective(problem, x_star),
        f"reference Method 1 solve (tol {tol:g}, {trace.iterations} iterations, {trace.termination.value})",
    )
