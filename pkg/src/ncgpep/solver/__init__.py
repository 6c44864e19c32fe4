"""Spatial branch and bound for the PEP QCQPs."""

from .bnb import SolverOptions, solve
from .report import SolveReport

__all__ = ["SolveReport", "SolverOptions", "solve"]
