"""Closed-form proximal operators and the forward-backward map.

Every builder returns a fully populated :class:`NonsmoothPart`, including
``project_domain``, so the accelerated method runs on any of them.  Indicator
proxes ignore the stepsize by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .core import CompositeProblem, NonsmoothPart, ProblemError, Vector, as_vector, norm


def _check_step(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"prox stepsize must be positive and finite, got {alpha!r}")
    return alpha


def _identity(x: Vector) -> Vector:
    return np.array(x, dtype=np.float64, copy=True)


def _always(x: Vector) -> bool:
    return True


def soft_threshold(z: Vector, tau: float) -> Vector:
    """Coordinatewise ``sign(z) * max(|z| - tau, 0)``; ``|z| == tau`` maps to 0."""
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def prox_zero() -> NonsmoothPart:
    """``g = 0``; the prox is the identity."""

    def prox(alpha, z):
        _check_step(alpha)
        return _identity(z)

    return NonsmoothPart(
        value=lambda x: 0.0, prox=prox, in_domain=_always, project_domain=_identity, name="zero"
    )


def prox_l1(weight: float) -> NonsmoothPart:
    """``g = weight * ||x||_1`` with soft-thresholding prox."""
    weight = float(weight)
    if not weight > 0:
        raise ValueError("l1 weight must be positive")

    def prox(alpha, z):
        return soft_threshold(z, _check_step(alpha) * weight)

    return NonsmoothPart(
        value=lambda x: weight * float(np.sum(np.abs(x))),
        prox=prox,
        in_domain=_always,
        project_domain=_identity,
        name=f"l1(weight={weight:g})",
    )


def prox_indicator_nonneg() -> NonsmoothPart:
    """Indicator of the nonnegative orthant."""

    def project(z):
        return np.maximum(np.asarray(z, dtype=np.float64), 0.0)

    def in_domain(x):
        return bool(np.all(np.asarray(x) >= 0.0))

    def prox(alpha, z):
        _check_step(alpha)
        return project(z)

    return NonsmoothPart(
        value=lambda x: 0.0 if in_domain(x) else math.inf,
        prox=prox,
        in_domain=in_domain,
        project_domain=project,
        name="indicator(x >= 0)",
    )


def prox_indicator_box(lower, upper) -> NonsmoothPart:
    """Indicator of the box ``lower <= x <= upper`` (prox is the clamp)."""
    lo = as_vector(lower)
    hi = as_vector(upper)
    if lo.shape != hi.shape:
        raise ValueError("box bounds must have the same dimension")
    if np.any(lo > hi):
        raise ValueError("box bounds violate lower <= upper")

    def project(z):
        return np.clip(np.asarray(z, dtype=np.float64), lo, hi)

    def in_domain(x):
        x = np.asarray(x)
        return bool(np.all((x >= lo) & (x <= hi)))

    def prox(alpha, z):
        _check_step(alpha)
        return project(z)

    return NonsmoothPart(
        value=lambda x: 0.0 if in_domain(x) else math.inf,
        prox=prox,
        in_domain=in_domain,
        project_domain=project,
        name="indicator(box)",
    )


def prox_quadratic(weight: float) -> NonsmoothPart:
    """``g = (weight / 2) ||x||^2``; prox is ``z / (1 + alpha * weight)``."""
    weight = float(weight)
    if not weight > 0:
        raise ValueError("quadratic weight must be positive")

    def prox(alpha, z):
        return np.asarray(z, dtype=np.float64) / (1.0 + _check_step(alpha) * weight)

    return NonsmoothPart(
        value=lambda x: 0.5 * weight * float(np.dot(x, x)),
        prox=prox,
        in_domain=_always,
        project_domain=_identity,
        name=f"quadratic(weight={weight:g})",
    )


@dataclass(frozen=True)
class ProxCatalogEntry:
    name: str
    builder: Callable[..., NonsmoothPart]


PROX_CATALOG: Dict[str, ProxCatalogEntry] = {
    e.name: e
    for e in (
        ProxCatalogEntry("zero", prox_zero),
        ProxCatalogEntry("l1", prox_l1),
        ProxCatalogEntry("nonneg", prox_indicator_nonneg),
        ProxCatalogEntry("box", prox_indicator_box),
        ProxCatalogEntry("quadratic", prox_quadratic),
    )
}


def forward_backward(problem: CompositeProblem, x: Vector, alpha: float, grad: Vector = None) -> Vector:
    """``J(x, alpha) = prox_{alpha g}(x - alpha * grad f(x))``.

    ``grad`` may carry a precomputed ``grad f(x)`` to avoid a second oracle call.
    """
    alpha = _check_step(alpha)
    x = np.asarray(x, dtype=np.float64)
    if grad is None:
        grad = problem.smooth.gradient(x)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x.shape:
        raise ProblemError(f"gradient has shape {grad.shape}, expected {x.shape}")
    if not np.all(np.isfinite(grad)):
        raise ProblemError("gradient is not finite at x")
    return np.asarray(problem.nonsmooth.prox(alpha, x - alpha * grad), dtype=np.float64)


def residual(problem: CompositeProblem, x: Vector, alpha: float) -> float:
    """``||x - J(x, alpha)||``, zero exactly at minimizers."""
    x = np.asarray(x, dtype=np.float64)
    return norm(x - forward_backward(problem, x, alpha))
