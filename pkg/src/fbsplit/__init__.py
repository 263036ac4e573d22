"""Forward-backward splitting with linesearches and trace certification."""

from .core import (
    CompositeProblem,
    LinesearchParams,
    Method,
    NonsmoothPart,
    ProblemError,
    SmoothPart,
    SolverConfig,
    objective,
)
from .diagnostics import Certificate, CertificateError, reference_solution
from .linesearch import LinesearchFailure, LinesearchOutcome, linesearch1, linesearch2
from .problems import Family, ProblemSpec, build_problem
from .prox import forward_backward, residual
from .solvers import IterationRecord, SolverTrace, Termination, solve

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "CertificateError",
    "CompositeProblem",
    "Family",
    "IterationRecord",
    "LinesearchFailure",
    "LinesearchOutcome",
    "LinesearchParams",
    "Method",
    "NonsmoothPart",
    "ProblemError",
    "ProblemSpec",
    "SmoothPart",
    "SolverConfig",
    "SolverTrace",
    "Termination",
    "build_problem",
    "forward_backward",
    "linesearch1",
    "linesearch2",
    "objective",
    "reference_solution",
    "residual",
    "solve",
]
