"""PEP construction: Gram-lifted QCQPs for the method families."""

from .builders import build_direction_pep, build_exact_upper, build_lower_fixed_beta, build_lyapunov_upper
from .qcqp import QcqpProblem

__all__ = ["QcqpProblem", "build_direction_pep", "build_exact_upper", "build_lower_fixed_beta",
           "build_lyapunov_upper"]
