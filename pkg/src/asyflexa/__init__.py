"""Asynchronous parallel successive convex approximation for block-structured problems."""

from .engine import RunConfig, Trace, run_simulated, run_threaded
from .estimator import AsyncSCALasso
from .exceptions import ConvergenceError, DomainError, InvariantViolation, StructuralError
from .metrics import (TheoryConstants, check_lyapunov_descent, complexity_constants, delay_stats,
                      k_epsilon, lyapunov, max_stepsize, speedup_report, stationarity, stationarity_ncc)
from .problem import BlockPartition, ProblemSpec, load_problem, save_problem
from .scheduler import SchedulerConfig, ScheduleEvent, make_scheduler, replay, validate_trace
from .subproblem import BestResponseRequest, best_response, best_response_ncc
from .surrogate import build_constraint_surrogate, build_surrogate

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "Trace", "run_simulated", "run_threaded", "AsyncSCALasso",
    "ConvergenceError", "DomainError", "InvariantViolation", "StructuralError",
    "TheoryConstants", "check_lyapunov_descent", "complexity_constants", "delay_stats", "k_epsilon",
    "lyapunov", "max_stepsize", "speedup_report", "stationarity", "stationarity_ncc",
    "BlockPartition", "ProblemSpec", "load_problem", "save_problem",
    "SchedulerConfig", "ScheduleEvent", "make_scheduler", "replay", "validate_trace",
    "BestResponseRequest", "best_response", "best_response_ncc",
    "build_constraint_surrogate", "build_surrogate",
]
