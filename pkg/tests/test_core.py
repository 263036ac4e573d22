import math

import numpy as np
import pytest

from fbsplit.core import (
    CompositeProblem,
    LinesearchParams,
    Method,
    ProblemError,
    SmoothPart,
    SolverConfig,
    as_vector,
    norm,
    objective,
    row_norms,
)
from fbsplit.prox import prox_indicator_nonneg, prox_zero


def _square(dim=2):
    return SmoothPart(value=lambda x: 0.5 * float(x @ x), gradient=lambda x: x.copy(), lipschitz_constant=1.0)


def test_as_vector_copies_and_flattens():
    src = np.array([[1.0, 2.0]])
    v = as_vector(src, 2)
    v[0] = 9.0
    assert src[0, 0] == 1.0
    assert v.shape == (2,) and v.dtype == np.float64


@pytest.mark.parametrize("bad", [[1.0, math.nan], [math.inf, 0.0]])
def test_as_vector_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        as_vector(bad)


def test_as_vector_dimension_mismatch():
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0, 3.0], 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"theta": 1.2},
        {"theta": 0.0},
        {"delta": 0.5},
        {"delta": 0.0},
        {"sigma": 0.0},
        {"sigma": math.inf},
        {"max_backtracks": 0},
        {"zero_residual_tol": -1.0},
    ],
)
def test_linesearch_params_invariants(kwargs):
    with pytest.raises(ValueError):
        LinesearchParams(**kwargs)


def test_linesearch_params_defaults():
    p = LinesearchParams()
    assert (p.sigma, p.theta, p.delta) == (1.0, 0.5, 0.4)


def test_solver_config_coerces_method_name():
    assert SolverConfig("Method2").method is Method.METHOD2
    with pytest.raises(ValueError):
        SolverConfig("Method9")


def test_fixed_step_needs_stepsize():
    with pytest.raises(ValueError):
        SolverConfig(Method.FIXED_STEP)
    with pytest.raises(ValueError):
        SolverConfig(Method.FIXED_STEP, fixed_stepsize=-1.0)
    assert SolverConfig(Method.FIXED_STEP, fixed_stepsize=0.5).fixed_stepsize == 0.5


def test_solver_config_rejects_bad_limits():
    with pytest.raises(ValueError):
        SolverConfig(Method.METHOD1, max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(Method.METHOD1, residual_tolerance=-1.0)


def test_smooth_part_metadata_checked():
    with pytest.raises(ValueError):
        SmoothPart(lambda x: 0.0, lambda x: x, lipschitz_constant=0.0)
    with pytest.raises(ValueError):
        SmoothPart(lambda x: 0.0, lambda x: x, strong_convexity=-1.0)


def test_objective_is_inf_outside_domain():
    prob = CompositeProblem(_square(), prox_indicator_nonneg(), 2)
    assert objective(prob, np.array([1.0, 2.0])) == 2.5
    assert objective(prob, np.array([-1.0, 2.0])) == math.inf


def test_objective_rejects_non_finite_smooth_value():
    smooth = SmoothPart(value=lambda x: math.nan, gradient=lambda x: x)
    prob = CompositeProblem(smooth, prox_zero(), 1)
    with pytest.raises(ProblemError):
        objective(prob, np.array([0.0]))


def test_objective_checks_shape():
    prob = CompositeProblem(_square(), prox_zero(), 2)
    with pytest.raises(ValueError):
        objective(prob, np.zeros(3))


def test_known_solution_must_be_feasible():
    with pytest.raises(ValueError):
        CompositeProblem(_square(), prox_indicator_nonneg(), 1, known_solution=[-1.0])


def test_known_optimal_value_must_match():
    with pytest.raises(ValueError):
        CompositeProblem(_square(), prox_zero(), 1, known_solution=[0.0], known_optimal_value=1.0)
    prob = CompositeProblem(_square(), prox_zero(), 1, known_solution=[0.0], known_optimal_value=0.0)
    assert prob.optimal_value == 0.0


def test_optimal_value_from_solution():
    prob = CompositeProblem(_square(), prox_zero(), 1, known_solution=[2.0])
    assert prob.optimal_value == 2.0
    assert CompositeProblem(_square(), prox_zero(), 1).optimal_value is None


def test_norm_survives_tiny_and_huge_entries():
    assert norm(np.array([1e-200])) == 1e-200
    assert np.linalg.norm(np.array([1e-200])) == 0.0  # the failure mode being avoided
    assert norm(np.array([3e200, 4e200])) == pytest.approx(5e200, rel=1e-15)
    assert norm(np.zeros(3)) == 0.0
    np.testing.assert_allclose(row_norms([[3.0, 4.0], [0.0, 1e-170]]), [5.0, 1e-170])
