"""Backtracking stepsize rules.

``linesearch1``
    Shrinks ``alpha`` until ``alpha * ||grad f(J(x, alpha)) - grad f(x)||``
    is at most ``delta * ||J(x, alpha) - x||``.  One prox and one gradient per
    trial, no function values.
``linesearch2``
    Computes ``J_x = J(x, 1)`` once and backtracks the relaxation parameter
    ``beta`` along the segment ``[x, J_x]`` on an Armijo-type test of
    ``f + g``.  Exactly one prox per call.
``linesearch_descent_lemma``
    The classical sufficient-decrease test on ``f`` alone, kept as a
    comparison baseline.

All three use a strict ``>`` to keep backtracking, so ties accept the current
trial.  The objective test of ``linesearch2`` allows a rounding slack of
``LS2_ROUNDOFF * |(f+g)(x)|``; without it, once ``||x - J_x||^2`` falls below
the spacing of floating-point numbers near ``(f+g)(x)`` the test fails on
noise alone and ``beta`` collapses.  Each returns a :class:`LinesearchOutcome` with exact oracle counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CompositeProblem, LinesearchParams, ProblemError, Vector, norm
from .prox import forward_backward

LS2_ROUNDOFF = 8.0 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class LinesearchOutcome:
    stepsize: float
    accepted_point: Vector
    trials: int
    prox_calls: int
    grad_calls: int
    f_calls: int
    initial: float
    # grad f(accepted_point) for linesearch1; lets Method 1 skip a gradient call
    accepted_grad: Optional[Vector] = None
    # (f + g) at the accepted trial point (linesearch2, descent-lemma rule)
    accepted_value: Optional[float] = None
    # f alone at accepted_point (descent-lemma rule)
    accepted_smooth_value: Optional[float] = None


class LinesearchFailure(RuntimeError):
    """The backtracking budget ran out, or a trial left ``dom g``.

    Carries the last trial state for post-mortem inspection.
    """

    def __init__(self, message: str, *, stepsize: float, point: Vector, trials: int):
        super().__init__(message)
        self.stepsize = stepsize
        self.point = point
        self.trials = trials


class DomainViolation(LinesearchFailure):
    """A convex-combination trial point of linesearch2 fell outside ``dom g``."""


def _budget_exhausted(name, params, alpha, point, trials):
    return LinesearchFailure(
        f"{name}: no acceptable step after {trials} backtracks (last trial {alpha!r}); "
        "the gradient may violate the uniform continuity assumption, or tolerances are too tight",
        stepsize=alpha,
        point=point,
        trials=trials,
    )


def linesearch1(
    problem: CompositeProblem,
    x: Vector,
    params: LinesearchParams,
    initial: Optional[float] = None,
    grad_x: Optional[Vector] = None,
) -> LinesearchOutcome:
    """Gradient-difference backtracking from ``initial`` (defaults to ``sigma``).

    Returns the first ``alpha`` in ``initial * theta**j`` with
    ``alpha * ||grad f(J) - grad f(x)|| <= delta * ||J - x||`` where
    ``J = J(x, alpha)``.  If ``||x - J(x, initial)||`` is below
    ``params.zero_residual_tol`` the initial step is returned untested.

    Pass ``grad_x`` when ``grad f(x)`` is already known; it is then not
    counted in ``grad_calls``.
    """
    x = np.asarray(x, dtype=np.float64)
    alpha = params.sigma if initial is None else float(initial)
    if not alpha > 0:
        raise ValueError("initial stepsize must be positive")
    start = alpha
    grad_calls = 0
    if grad_x is None:
        grad_x = np.asarray(problem.smooth.gradient(x), dtype=np.float64)
        grad_calls += 1
    trials = 0
    prox_calls = 0
    while True:
        J = forward_backward(problem, x, alpha, grad=grad_x)
        prox_calls += 1
        grad_J = np.asarray(problem.smooth.gradient(J), dtype=np.float64)
        grad_calls += 1
        if not np.all(np.isfinite(grad_J)):
            raise ProblemError("gradient is not finite at a trial point")
        step = norm(J - x)
        if trials == 0 and step <= params.zero_residual_tol:
            break
        if not alpha * norm(grad_J - grad_x) > params.delta * step:
            break
        if trials >= params.max_backtracks:
            raise _budget_exhausted("linesearch1", params, alpha, J, trials)
        alpha *= params.theta
        trials += 1
    return LinesearchOutcome(
        stepsize=alpha,
        accepted_point=J,
        trials=trials,
        prox_calls=prox_calls,
        grad_calls=grad_calls,
        f_calls=0,
        initial=start,
        accepted_grad=grad_J,
    )


def linesearch2(
    problem: CompositeProblem,
    x: Vector,
    params: LinesearchParams,
    value_x: Optional[float] = None,
) -> LinesearchOutcome:
    """Relaxation backtracking along ``[x, J(x, 1)]``.

    Returns the first ``beta`` in ``1, theta, theta**2, ...`` with

        (f+g)(x - beta d) <= (f+g)(x) - beta [g(x) - g(J_x)]
                             - beta <grad f(x), d> + (beta / 2) ||d||^2,

    ``d = x - J_x``, up to the rounding slack ``LS2_ROUNDOFF * |(f+g)(x)|``.
    ``accepted_point`` is ``J_x``; the new iterate is
    ``(1 - beta) x + beta J_x`` whose objective value is ``accepted_value``.
    ``value_x``, if given, is ``(f+g)(x)`` and saves one ``f`` call.
    """
    x = np.asarray(x, dtype=np.float64)
    smooth, g = problem.smooth, problem.nonsmooth
    grad_x = np.asarray(smooth.gradient(x), dtype=np.float64)
    grad_calls = 1
    J = forward_backward(problem, x, 1.0, grad=grad_x)
    f_calls = 0
    if value_x is None:
        value_x = float(smooth.value(x)) + float(g.value(x))
        f_calls += 1
    d = x - J
    dn2 = float(np.dot(d, d))
    g_x = float(g.value(x))
    g_J = float(g.value(J))
    slope = float(np.dot(grad_x, d))
    zero = norm(d) <= params.zero_residual_tol
    slack = LS2_ROUNDOFF * abs(value_x)

    beta = 1.0
    trials = 0
    while True:
        trial = (1.0 - beta) * x + beta * J
        if not g.in_domain(trial):
            raise DomainViolation(
                f"linesearch2: trial point at beta={beta!r} left dom g",
                stepsize=beta,
                point=trial,
                trials=trials,
            )
        value_trial = float(smooth.value(trial)) + float(g.value(trial))
        f_calls += 1
        if zero:
            break
        rhs = value_x - beta * (g_x - g_J) - beta * slope + 0.5 * beta * dn2
        if not value_trial > rhs + slack:
            break
        if trials >= params.max_backtracks:
            raise _budget_exhausted("linesearch2", params, beta, trial, trials)
        beta *= params.theta
        trials += 1
    return LinesearchOutcome(
        stepsize=beta,
        accepted_point=J,
        trials=trials,
        prox_calls=1,
        grad_calls=grad_calls,
        f_calls=f_calls,
        initial=1.0,
        accepted_value=value_trial,
    )


def linesearch_descent_lemma(
    problem: CompositeProblem,
    x: Vector,
    params: LinesearchParams,
    grad_x: Optional[Vector] = None,
    smooth_value_x: Optional[float] = None,
) -> LinesearchOutcome:
    """Largest ``alpha`` in ``sigma * theta**j`` with
    ``f(J) <= f(x) + <grad f(x), J - x> + ||J - x||^2 / (2 alpha)``."""
    x = np.asarray(x, dtype=np.float64)
    smooth = problem.smooth
    grad_calls = 0
    f_calls = 0
    if grad_x is None:
        grad_x = np.asarray(smooth.gradient(x), dtype=np.float64)
        grad_calls += 1
    if smooth_value_x is None:
        smooth_value_x = float(smooth.value(x))
        f_calls += 1
    alpha = params.sigma
    trials = 0
    prox_calls = 0
    while True:
        J = forward_backward(problem, x, alpha, grad=grad_x)
        prox_calls += 1
        f_J = float(smooth.value(J))
        f_calls += 1
        d = J - x
        dn2 = float(np.dot(d, d))
        if trials == 0 and norm(d) <= params.zero_residual_tol:
            break
        if not f_J > smooth_value_x + float(np.dot(grad_x, d)) + dn2 / (2.0 * alpha):
            break
        if trials >= params.max_backtracks:
            raise _budget_exhausted("descent-lemma linesearch", params, alpha, J, trials)
        alpha *= params.theta
        trials += 1
    return LinesearchOutcome(
        stepsize=alpha,
        accepted_point=J,
        trials=trials,
        prox_calls=prox_calls,
        grad_calls=grad_calls,
        f_calls=f_calls,
        initial=params.sigma,
        accepted_value=f_J + float(problem.nonsmooth.value(J)),
        accepted_smooth_value=f_J,
    )
