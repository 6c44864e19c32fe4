"""Worst-case analysis of nonlinear conjugate gradient methods by performance estimation."""

from .bounds import (
    asd_rate,
    fr_direction_recursion,
    fr_rate,
    gdel_rate,
    lower_complexity_rate,
    polyak_rate,
    prp_direction_bound,
    prp_rate,
)
from .counterexample import extract_triplets, load_example1, validate_counterexample
from .function_model import ClassParams, Extension, TripletSet, check_interpolable, interpolation_residuals
from .ncgm import MethodConfig, RunTrace, run

__version__ = "0.1.0"

__all__ = [
    "ClassParams", "Extension", "MethodConfig", "RunTrace", "TripletSet",
    "asd_rate", "check_interpolable", "extract_triplets", "fr_direction_recursion", "fr_rate",
    "gdel_rate", "interpolation_residuals", "load_example1", "lower_complexity_rate", "polyak_rate",
    "prp_direction_bound", "prp_rate", "run", "validate_counterexample",
]
