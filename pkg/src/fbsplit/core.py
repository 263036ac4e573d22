"""Domain types shared by every other module.

A composite problem is ``min f(x) + g(x)`` where ``f`` is smooth (value and
gradient oracles) and ``g`` is convex with an inexpensive proximal operator.
Vectors are dense one-dimensional ``float64`` numpy arrays.

``g`` is extended-real valued: outside its domain ``value`` returns
``math.inf``.  Nothing else in the package produces infinities; objective
values stored in traces are always finite.

The smooth part is assumed to have a gradient that is uniformly continuous on
bounded subsets of ``dom g``.  This cannot be verified from oracles and is not
checked anywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Vector = np.ndarray


class ProblemError(ValueError):
    """Raised when oracles return values that violate the problem contract."""


def as_vector(x, dimension: Optional[int] = None) -> Vector:
    """Return ``x`` as a finite 1-D float64 array, checking its dimension."""
    v = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    if dimension is not None and v.shape[0] != dimension:
        raise ValueError(f"expected a vector of dimension {dimension}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    return v


def norm(v) -> float:
    """Euclidean norm, scaled so that tiny or huge entries do not under/overflow.

    ``np.linalg.norm`` squares the entries first, which returns 0 for vectors
    near ``1e-162`` and would make a nonzero step look like a fixed point.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    scale = float(np.max(np.abs(v)))
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    w = v / scale
    return scale * math.sqrt(float(np.dot(w, w)))


def row_norms(M) -> np.ndarray:
    """:func:`norm` of every row of a 2-D array."""
    return np.array([norm(row) for row in np.atleast_2d(M)])


@dataclass(frozen=True)
class SmoothPart:
    """Smooth term ``f`` with optional curvature metadata.

    ``lipschitz_constant`` and ``strong_convexity`` are consumed only by
    diagnostics; no solver reads them.
    """

    value: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    lipschitz_constant: Optional[float] = None
    strong_convexity: Optional[float] = None

    def __post_init__(self):
        if self.lipschitz_constant is not None and not self.lipschitz_constant > 0:
            raise ValueError("lipschitz_constant must be positive")
        if self.strong_convexity is not None and not self.strong_convexity >= 0:
            raise ValueError("strong_convexity must be nonnegative")


@dataclass(frozen=True)
class NonsmoothPart:
    """Nonsmooth term ``g``.

    ``prox(alpha, z)`` returns ``argmin_x g(x) + |x - z|^2 / (2 alpha)`` and
    ``project_domain`` is the Euclidean projection onto ``dom g`` (needed only
    by the accelerated method).
    """

    value: Callable[[Vector], float]
    prox: Callable[[float, Vector], Vector]
    in_domain: Callable[[Vector], bool]
    project_domain: Optional[Callable[[Vector], Vector]] = None
    name: str = "g"


@dataclass(frozen=True)
class CompositeProblem:
    smooth: SmoothPart
    nonsmooth: NonsmoothPart
    dimension: int
    known_solution: Optional[Vector] = None
    known_optimal_value: Optional[float] = None
    # inf(f+g) for problems whose infimum is not attained (empty solution set)
    infimum: Optional[float] = None
    default_start: Optional[Vector] = None
    name: str = "problem"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.known_solution is not None:
            xs = as_vector(self.known_solution, self.dimension)
            object.__setattr__(self, "known_solution", xs)
            if not self.nonsmooth.in_domain(xs):
                raise ValueError("known_solution is outside dom g")
            if self.known_optimal_value is not None:
                fx = objective(self, xs)
                ref = self.known_optimal_value
                if abs(fx - ref) > 1e-10 * max(1.0, abs(ref)):
                    raise ValueError(
                        f"objective at known_solution ({fx!r}) disagrees with "
                        f"known_optimal_value ({ref!r})"
                    )
        if self.default_start is not None:
            object.__setattr__(self, "default_start", as_vector(self.default_start, self.dimension))

    @property
    def optimal_value(self) -> Optional[float]:
        if self.known_optimal_value is not None:
            return self.known_optimal_value
        if self.known_solution is not None:
            return objective(self, self.known_solution)
        return None


def objective(problem: CompositeProblem, x: Vector) -> float:
    """Evaluate ``(f + g)(x)``; returns ``math.inf`` when ``x`` is outside ``dom g``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.dimension,):
        raise ValueError(f"expected shape ({problem.dimension},), got {x.shape}")
    if not problem.nonsmooth.in_domain(x):
        return math.inf
    fx = float(problem.smooth.value(x))
    if not math.isfinite(fx):
        raise ProblemError(f"smooth part is not finite at an in-domain point (f = {fx})")
    return fx + float(problem.nonsmooth.value(x))


@dataclass(frozen=True)
class LinesearchParams:
    """Backtracking constants.

    ``sigma`` is the first trial stepsize of the gradient-difference
    linesearch, ``theta`` the shrink factor and ``delta`` its acceptance
    constant.  ``zero_residual_tol`` is the absolute cutoff below which the
    starting point is treated as a fixed point of the forward-backward map.
    """

    sigma: float = 1.0
    theta: float = 0.5
    delta: float = 0.4
    max_backtracks: int = 60
    zero_residual_tol: float = 1e-14

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta!r}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 1/2), got {self.delta!r}")
        if int(self.max_backtracks) != self.max_backtracks or self.max_backtracks < 1:
            raise ValueError(f"max_backtracks must be a positive integer, got {self.max_backtracks!r}")
        if not self.zero_residual_tol >= 0:
            raise ValueError("zero_residual_tol must be nonnegative")


class Method(str, enum.Enum):
    METHOD1 = "Method1"
    METHOD2 = "Method2"
    METHOD3 = "Method3"
    FIXED_STEP = "FixedStep"
    DESCENT_LEMMA_LS = "DescentLemmaLS"


@dataclass(frozen=True)
class SolverConfig:
    method: Method
    params: LinesearchParams = field(default_factory=LinesearchParams)
    fixed_stepsize: Optional[float] = None
    residual_tolerance: float = 1e-10
    max_iterations: int = 1000
    record_iterates: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.method is Method.FIXED_STEP:
            if self.fixed_stepsize is None:
                raise ValueError("FixedStep requires fixed_stepsize")
            if not self.fixed_stepsize > 0:
                raise ValueError("fixed_stepsize must be positive")
        if not self.residual_tolerance >= 0:
            raise ValueError("residual_tolerance must be nonnegative")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
