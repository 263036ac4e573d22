"""Catalog of test problems with analytic metadata.

Families
--------
Lasso
    ``1/2 ||Ax - b||^2 + lam ||x||_1``.  Explicit ``A``/``b`` or a seeded
    random instance (``m``, ``n``).  The solution is known analytically when
    ``A^T A`` is diagonal.
PPowerNonneg
    ``sum |x_i|^{1+p} / (1+p)`` restricted to ``x >= 0`` with ``0 < p < 1``.
    Unique solution ``0``; the gradient is not globally Lipschitz.
BoxLeastSquares
    ``1/2 ||Ax - b||^2`` over a box.  Random instances plant a feasible
    ``x_true`` and set ``b = A x_true``, so the solution is known when ``A``
    has full column rank.
StronglyConvexQuadratic
    ``1/2 x^T Q x - b^T x + offset`` with ``Q`` positive definite, plus
    ``g = 0`` or ``g = weight/2 ||x||^2``.
ExpUnbounded
    ``sum exp(x_i)`` with ``g = 0``: infimum 0, no minimizer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .core import CompositeProblem, NonsmoothPart, SmoothPart, as_vector
from .prox import (
    prox_indicator_box,
    prox_indicator_nonneg,
    prox_l1,
    prox_quadratic,
    prox_zero,
    soft_threshold,
)


class Family(str, enum.Enum):
    LASSO = "Lasso"
    PPOWER_NONNEG = "PPowerNonneg"
    BOX_LEAST_SQUARES = "BoxLeastSquares"
    STRONGLY_CONVEX_QUADRATIC = "StronglyConvexQuadratic"
    EXP_UNBOUNDED = "ExpUnbounded"


# accepted keys per family; anything else is rejected
FAMILY_PARAMETERS = {
    Family.LASSO: {"A", "b", "m", "n", "lam", "sparsity", "noise"},
    Family.PPOWER_NONNEG: {"p", "n", "start"},
    Family.BOX_LEAST_SQUARES: {"A", "b", "m", "n", "lower", "upper"},
    Family.STRONGLY_CONVEX_QUADRATIC: {"Q", "b", "n", "mu", "L", "g_weight", "offset"},
    Family.EXP_UNBOUNDED: {"n", "start"},
}


@dataclass(frozen=True)
class ProblemSpec:
    family: Family
    parameters: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        unknown = set(self.parameters) - FAMILY_PARAMETERS[self.family]
        if unknown:
            raise ValueError(f"unknown parameters for {self.family.value}: {sorted(unknown)}")
        if self.family is Family.PPOWER_NONNEG:
            p = self.parameters.get("p", 0.5)
            if not 0 < p < 1:
                raise ValueError(f"PPowerNonneg requires 0 < p < 1, got {p!r}")
        if self.family is Family.LASSO:
            lam = self.parameters.get("lam", 0.1)
            if not lam > 0:
                raise ValueError(f"Lasso requires lam > 0, got {lam!r}")


def spectral_norm_squared(A: np.ndarray) -> float:
    """``||A^T A||_2`` (largest singular value of ``A``, squared)."""
    return float(np.linalg.norm(A, 2) ** 2)


def _least_squares(A: np.ndarray, b: np.ndarray) -> SmoothPart:
    L = spectral_norm_squared(A)
    eig_min = float(np.linalg.eigvalsh(A.T @ A)[0]) if A.shape[0] >= A.shape[1] else 0.0

    def value(x):
        r = A @ x - b
        return 0.5 * float(np.dot(r, r))

    def gradient(x):
        return A.T @ (A @ x - b)

    return SmoothPart(
        value=value,
        gradient=gradient,
        lipschitz_constant=L if L > 0 else None,
        strong_convexity=max(eig_min, 0.0),
    )


def _matrix_and_rhs(params, rng, default_m, default_n):
    if "A" in params:
        A = np.atleast_2d(np.asarray(params["A"], dtype=np.float64))
        if "b" not in params:
            raise ValueError("explicit A requires b")
        b = as_vector(params["b"], A.shape[0])
        return A, b
    m = int(params.get("m", default_m))
    n = int(params.get("n", default_n))
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    return A, None


def _build_lasso(params, rng) -> CompositeProblem:
    lam = float(params.get("lam", 0.1))
    A, b = _matrix_and_rhs(params, rng, 80, 50)
    n = A.shape[1]
    if b is None:
        k = max(1, int(round(params.get("sparsity", 0.2) * n)))
        x_true = np.zeros(n)
        x_true[rng.choice(n, size=k, replace=False)] = rng.standard_normal(k)
        b = A @ x_true + float(params.get("noise", 0.05)) * rng.standard_normal(A.shape[0])
    smooth = _least_squares(A, b)
    known = None
    AtA = A.T @ A
    diag = np.diag(AtA)
    off = AtA - np.diag(diag)
    if np.all(diag > 0) and np.max(np.abs(off), initial=0.0) <= 1e-14 * np.max(diag):
        # separable case: x_i = soft(a_i^T b, lam) / d_i
        known = soft_threshold(A.T @ b, lam) / diag
    return CompositeProblem(
        smooth=smooth,
        nonsmooth=prox_l1(lam),
        dimension=n,
        known_solution=known,
        default_start=np.zeros(n),
        name="Lasso",
    )


def _build_ppower(params, rng) -> CompositeProblem:
    p = float(params.get("p", 0.5))
    n = int(params.get("n", 1))

    def value(x):
        return float(np.sum(np.abs(x) ** (1.0 + p))) / (1.0 + p)

    def gradient(x):
        x = np.asarray(x, dtype=np.float64)
        # |x|^p vanishes at 0 for p > 0, so no 0^(p-1) term is ever formed
        return np.sign(x) * np.abs(x) ** p

    start = params.get("start", 1.0)
    return CompositeProblem(
        smooth=SmoothPart(value=value, gradient=gradient),
        nonsmooth=prox_indicator_nonneg(),
        dimension=n,
        known_solution=np.zeros(n),
        known_optimal_value=0.0,
        default_start=np.broadcast_to(np.asarray(start, dtype=np.float64), (n,)),
        name="PPowerNonneg",
    )


def _build_box_ls(params, rng) -> CompositeProblem:
    A, b = _matrix_and_rhs(params, rng, 60, 40)
    n = A.shape[1]
    lower = np.broadcast_to(np.asarray(params.get("lower", 0.0), dtype=np.float64), (n,))
    upper = np.broadcast_to(np.asarray(params.get("upper", 1.0), dtype=np.float64), (n,))
    g = prox_indicator_box(lower, upper)
    known = None
    optimal = None
    if b is None:
        if not np.all(np.isfinite(upper - lower)):
            raise ValueError("random BoxLeastSquares instances need finite bounds")
        x_true = np.clip(rng.normal(0.5 * (lower + upper), upper - lower), lower, upper)
        b = A @ x_true
        if np.linalg.matrix_rank(A) == n:
            known, optimal = x_true, 0.0
    return CompositeProblem(
        smooth=_least_squares(A, b),
        nonsmooth=g,
        dimension=n,
        known_solution=known,
        known_optimal_value=optimal,
        default_start=g.project_domain(np.zeros(n)),
        name="BoxLeastSquares",
    )


def _build_quadratic(params, rng) -> CompositeProblem:
    if "Q" in params:
        Q = np.atleast_2d(np.asarray(params["Q"], dtype=np.float64))
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-14):
            raise ValueError("Q must be symmetric")
        n = Q.shape[0]
    else:
        n = int(params.get("n", 20))
        mu, L = float(params.get("mu", 0.01)), float(params.get("L", 1.0))
        if not 0 < mu <= L:
            raise ValueError("need 0 < mu <= L")
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        Q = (U * np.linspace(mu, L, n)) @ U.T
        Q = 0.5 * (Q + Q.T)
    eig = np.linalg.eigvalsh(Q)
    if eig[0] <= 0:
        raise ValueError("Q must be positive definite")
    if "b" in params:
        b = as_vector(params["b"], n)
    elif "Q" in params:
        b = np.zeros(n)
    else:
        b = rng.standard_normal(n)
    offset = float(params.get("offset", 0.0))
    weight = params.get("g_weight")

    def value(x):
        return 0.5 * float(x @ Q @ x) - float(b @ x) + offset

    def gradient(x):
        return Q @ x - b

    if weight is None or weight == 0:
        g: NonsmoothPart = prox_zero()
        known = np.linalg.solve(Q, b)
    else:
        g = prox_quadratic(float(weight))
        known = np.linalg.solve(Q + float(weight) * np.eye(n), b)
    return CompositeProblem(
        smooth=SmoothPart(value, gradient, lipschitz_constant=float(eig[-1]), strong_convexity=float(eig[0])),
        nonsmooth=g,
        dimension=n,
        known_solution=known,
        default_start=np.ones(n) if "Q" in params else np.zeros(n),
        name="StronglyConvexQuadratic",
    )


def _build_exp(params, rng) -> CompositeProblem:
    n = int(params.get("n", 1))

    def value(x):
        return float(np.sum(np.exp(x)))

    return CompositeProblem(
        smooth=SmoothPart(value=value, gradient=lambda x: np.exp(np.asarray(x, dtype=np.float64))),
        nonsmooth=prox_zero(),
        dimension=n,
        infimum=0.0,
        default_start=np.broadcast_to(np.asarray(params.get("start", 0.0), dtype=np.float64), (n,)),
        name="ExpUnbounded",
    )


_BUILDERS = {
    Family.LASSO: _build_lasso,
    Family.PPOWER_NONNEG: _build_ppower,
    Family.BOX_LEAST_SQUARES: _build_box_ls,
    Family.STRONGLY_CONVEX_QUADRATIC: _build_quadratic,
    Family.EXP_UNBOUNDED: _build_exp,
}


def build_problem(spec: ProblemSpec) -> CompositeProblem:
    """Instantiate ``spec``; random instances are reproducible from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    return _BUILDERS[spec.family](dict(spec.parameters), rng)
