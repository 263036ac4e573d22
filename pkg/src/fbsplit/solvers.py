"""Forward-backward methods that emit full iteration traces.

Record ``k`` describes iterate ``x^k`` together with the step computed *at*
it: the stepsize, the residual used for the stopping test, and the length of
the step to ``x^{k+1}``.  The loop stops after the record whose residual is
at most ``residual_tolerance`` (or after ``max_iterations`` steps), so the
final record's step is computed but not taken.  ``final_point`` is always the
point that step leads to, i.e. the last forward-backward output.

Residuals used for stopping:

* Method 1 / fixed step / descent-lemma rule: ``||x^k - J(x^k, alpha_k)||``
* Method 2: ``||x^k - J(x^k, 1)||``
* Method 3: ``||x^{k+1} - P(y^k)||``, which differs from the step length
  under extrapolation.

Oracle counters are cumulative and count every ``prox``, ``grad f`` and
``f`` evaluation made by the solver, including objective values stored in
the records.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import CompositeProblem, Method, SolverConfig, Vector, as_vector, norm
from .linesearch import (
    LinesearchFailure,
    LinesearchOutcome,
    linesearch1,
    linesearch2,
    linesearch_descent_lemma,
)
from .prox import forward_backward

DIVERGENCE_FACTOR = 1e6


class Termination(str, enum.Enum):
    RESIDUAL_TOLERANCE = "ResidualTolerance"
    MAX_ITERATIONS = "MaxIterations"
    LINESEARCH_FAILURE = "LinesearchFailure"
    DIVERGENCE = "Divergence"


@dataclass(frozen=True)
class IterationRecord:
    k: int
    x: Optional[Vector]
    objective_value: float
    stepsize: float
    residual_norm: float
    step_norm: float
    ls_trials: int
    cum_prox: int
    cum_grad: int
    cum_f: int
    t_k: Optional[float] = None
    dist_to_solution: Optional[float] = None


@dataclass
class SolverTrace:
    records: List[IterationRecord]
    termination: Termination
    final_point: Vector
    method: Method
    failure: Optional[str] = None
    # x0 is kept even when iterates are not recorded; rate envelopes need it
    x0: Optional[Vector] = None

    def __len__(self):
        return len(self.records)

    @property
    def iterations(self) -> int:
        """Forward-backward steps performed; ``final_point`` is ``x^{iterations}``.

        Equals the number of records, since every record computes one step.
        """
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=np.float64)

    @property
    def objectives(self) -> np.ndarray:
        return self.column("objective_value")

    @property
    def stepsizes(self) -> np.ndarray:
        return self.column("stepsize")

    @property
    def residuals(self) -> np.ndarray:
        return self.column("residual_norm")

    @property
    def step_norms(self) -> np.ndarray:
        return self.column("step_norm")

    def iterates(self) -> np.ndarray:
        """Stacked iterates, shape ``(len, dim)``; raises if they were not recorded."""
        if any(r.x is None for r in self.records):
            raise ValueError("trace was produced with record_iterates=False")
        return np.vstack([r.x for r in self.records])


class _Recorder:
    def __init__(self, problem: CompositeProblem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.records: List[IterationRecord] = []
        self.prox = 0
        self.grad = 0
        self.f = 0

    def charge(self, outcome: LinesearchOutcome):
        self.prox += outcome.prox_calls
        self.grad += outcome.grad_calls
        self.f += outcome.f_calls

    def objective(self, x) -> float:
        self.f += 1
        return float(self.problem.smooth.value(x)) + float(self.problem.nonsmooth.value(x))

    def add(self, k, x, value, stepsize, res, step, trials, t_k=None):
        xs = self.problem.known_solution
        dist = None if xs is None else norm(x - xs)
        self.records.append(
            IterationRecord(
                k=k,
                x=np.array(x, copy=True) if self.config.record_iterates else None,
                objective_value=value,
                stepsize=float(stepsize),
                residual_norm=float(res),
                step_norm=float(step),
                ls_trials=int(trials),
                cum_prox=self.prox,
                cum_grad=self.grad,
                cum_f=self.f,
                t_k=t_k,
                dist_to_solution=dist,
            )
        )

    def trace(self, termination, final_point, x0, failure=None) -> SolverTrace:
        return SolverTrace(
            records=self.records,
            termination=termination,
            final_point=np.array(final_point, copy=True),
            method=self.config.method,
            failure=failure,
            x0=np.array(x0, copy=True),
        )


def _start(problem: CompositeProblem, config: SolverConfig, x0, expected: Method) -> Vector:
    if config.method is not expected:
        raise ValueError(f"config.method is {config.method.value}, expected {expected.value}")
    x0 = as_vector(x0, problem.dimension)
    if not problem.nonsmooth.in_domain(x0):
        raise ValueError("x0 must lie in dom g")
    return x0


def _check_value(value: float, k: int):
    if not math.isfinite(value):
        raise FloatingPointError(f"objective is not finite at iterate {k}")


def solve_method1(problem: CompositeProblem, config: SolverConfig, x0) -> SolverTrace:
    """Forward-backward iteration with the gradient-difference linesearch,
    restarted from ``sigma`` at every iterate.

    The linesearch's accepted ``J(x^k, alpha_k)`` becomes ``x^{k+1}`` and its
    gradient is reused at the next iterate.
    """
    x = x_start = _start(problem, config, x0, Method.METHOD1)
    params = config.params
    rec = _Recorder(problem, config)
    value = rec.objective(x)
    grad = np.asarray(problem.smooth.gradient(x), dtype=np.float64)
    rec.grad += 1
    for k in range(config.max_iterations + 1):
        try:
            out = linesearch1(problem, x, params, params.sigma, grad_x=grad)
        except LinesearchFailure as exc:
            return rec.trace(Termination.LINESEARCH_FAILURE, x, x_start, str(exc))
        rec.charge(out)
        x_next = out.accepted_point
        res = norm(x - x_next)
        rec.add(k, x, value, out.stepsize, res, res, out.trials)
        if res <= config.residual_tolerance:
            return rec.trace(Termination.RESIDUAL_TOLERANCE, x_next, x_start)
        if k == config.max_iterations:
            break
        x, grad = x_next, out.accepted_grad
        value = rec.objective(x)
        _check_value(value, k + 1)
    return rec.trace(Termination.MAX_ITERATIONS, x_next, x_start)


def solve_method2(problem: CompositeProblem, config: SolverConfig, x0) -> SolverTrace:
    """Relaxed forward-backward iteration ``x^{k+1} = (1 - beta_k) x^k + beta_k J_k``
    with ``J_k = J(x^k, 1)``; one prox per iteration."""
    x = x_start = _start(problem, config, x0, Method.METHOD2)
    params = config.params
    rec = _Recorder(problem, config)
    value = rec.objective(x)
    for k in range(config.max_iterations + 1):
        try:
            out = linesearch2(problem, x, params, value_x=value)
        except LinesearchFailure as exc:
            return rec.trace(Termination.LINESEARCH_FAILURE, x, x_start, str(exc))
        rec.charge(out)
        beta, J = out.stepsize, out.accepted_point
        x_next = (1.0 - beta) * x + beta * J
        res = norm(x - J)
        rec.add(k, x, value, beta, res, norm(x_next - x), out.trials)
        if res <= config.residual_tolerance:
            return rec.trace(Termination.RESIDUAL_TOLERANCE, x_next, x_start)
        if k == config.max_iterations:
            break
        x, value = x_next, out.accepted_value
        _check_value(value, k + 1)
    return rec.trace(Termination.MAX_ITERATIONS, x_next, x_start)


def next_t(t: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def solve_method3(problem: CompositeProblem, config: SolverConfig, x0) -> SolverTrace:
    """Accelerated variant: extrapolate, project onto ``dom g``, then take a
    forward-backward step whose linesearch starts from the previous stepsize.

    Initialization ``x^{-1} = x^0``, ``t_0 = 1``, ``alpha_{-1} = sigma``.
    Stepsizes are therefore nonincreasing.
    """
    x = x_start = _start(problem, config, x0, Method.METHOD3)
    project = problem.nonsmooth.project_domain
    if project is None:
        raise ValueError("Method3 requires nonsmooth.project_domain")
    params = config.params
    rec = _Recorder(problem, config)
    value = rec.objective(x)
    x_prev = x
    t = 1.0
    alpha = params.sigma
    for k in range(config.max_iterations + 1):
        t_next = next_t(t)
        y = x + ((t - 1.0) / t_next) * (x - x_prev)
        y_tilde = np.asarray(project(y), dtype=np.float64)
        try:
            out = linesearch1(problem, y_tilde, params, alpha)
        except LinesearchFailure as exc:
            return rec.trace(Termination.LINESEARCH_FAILURE, x, x_start, str(exc))
        rec.charge(out)
        alpha = out.stepsize
        x_next = out.accepted_point
        res = norm(x_next - y_tilde)
        rec.add(k, x, value, alpha, res, norm(x_next - x), out.trials, t_k=t)
        if res <= config.residual_tolerance:
            return rec.trace(Termination.RESIDUAL_TOLERANCE, x_next, x_start)
        if k == config.max_iterations:
            break
        x_prev, x, t = x, x_next, t_next
        value = rec.objective(x)
        _check_value(value, k + 1)
    return rec.trace(Termination.MAX_ITERATIONS, x_next, x_start)


def solve_fixed_step(problem: CompositeProblem, config: SolverConfig, x0) -> SolverTrace:
    """Classical iteration with a constant stepsize.

    Stepsizes above ``2 / L`` are allowed on purpose; the run then ends with
    ``Termination.DIVERGENCE`` once the objective exceeds ``1e6`` times its
    initial magnitude.
    """
    x = x_start = _start(problem, config, x0, Method.FIXED_STEP)
    alpha = float(config.fixed_stepsize)
    rec = _Recorder(problem, config)
    value = rec.objective(x)
    limit = DIVERGENCE_FACTOR * max(abs(value), 1.0)
    for k in range(config.max_iterations + 1):
        x_next = forward_backward(problem, x, alpha)
        rec.grad += 1
        rec.prox += 1
        res = norm(x - x_next)
        rec.add(k, x, value, alpha, res, res, 0)
        if res <= config.residual_tolerance:
            return rec.trace(Termination.RESIDUAL_TOLERANCE, x_next, x_start)
        if k == config.max_iterations:
            break
        x = x_next
        value = rec.objective(x)
        if not math.isfinite(value) or value > limit:
            return rec.trace(
                Termination.DIVERGENCE,
                x,
                x_start,
                f"objective {value!r} exceeded {DIVERGENCE_FACTOR:g} x initial magnitude at k={k + 1}",
            )
    return rec.trace(Termination.MAX_ITERATIONS, x_next, x_start)


def solve_descent_lemma(problem: CompositeProblem, config: SolverConfig, x0) -> SolverTrace:
    """Baseline: forward-backward steps with the descent-lemma linesearch from ``sigma``."""
    x = x_start = _start(problem, config, x0, Method.DESCENT_LEMMA_LS)
    params = config.params
    rec = _Recorder(problem, config)
    rec.f += 1
    f_x = float(problem.smooth.value(x))
    value = f_x + float(problem.nonsmooth.value(x))
    for k in range(config.max_iterations + 1):
        try:
            out = linesearch_descent_lemma(problem, x, params, smooth_value_x=f_x)
        except LinesearchFailure as exc:
            return rec.trace(Termination.LINESEARCH_FAILURE, x, x_start, str(exc))
        rec.charge(out)
        x_next = out.accepted_point
        res = norm(x - x_next)
        rec.add(k, x, value, out.stepsize, res, res, out.trials)
        if res <= config.residual_tolerance:
            return rec.trace(Termination.RESIDUAL_TOLERANCE, x_next, x_start)
        if k == config.max_iterations:
            break
        x, value, f_x = x_next, out.accepted_value, out.accepted_smooth_value
        _check_value(value, k + 1)
    return rec.trace(Termination.MAX_ITERATIONS, x_next, x_start)


_SOLVERS = {
    Method.METHOD1: solve_method1,
    Method.METHOD2: solve_method2,
    Method.METHOD3: solve_method3,
    Method.FIXED_STEP: solve_fixed_step,
    Method.DESCENT_LEMMA_LS: solve_descent_lemma,
}


def solve(problem: CompositeProblem, config: SolverConfig, x0=None) -> SolverTrace:
    """Dispatch on ``config.method``; ``x0`` defaults to ``problem.default_start``."""
    if x0 is None:
        if problem.default_start is None:
            raise ValueError("x0 not given and the problem has no default_start")
        x0 = problem.default_start
    return _SOLVERS[config.method](problem, config, x0)
