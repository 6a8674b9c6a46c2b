"""Block-structured problem instances."""

from .constraints import CallableConstraint, QuadraticConstraint
from .io import load_problem, problem_from_dict, problem_to_dict, save_problem
from .partition import BlockPartition
from .regularizers import GroupL2Reg, L1Reg, ZeroReg, soft_threshold
from .sets import Ball, Box, Halfspace, Intersection, Polyhedron, WholeSpace
from .smooth import CallableSmooth, DCSmooth, LeastSquares, LogCosh, Quadratic, SmoothTerm
from .spec import FeasibilityReport, ProblemSpec, check_feasibility, eval_objective

__all__ = [
    "BlockPartition", "ProblemSpec", "FeasibilityReport", "eval_objective", "check_feasibility",
    "SmoothTerm", "Quadratic", "LeastSquares", "LogCosh", "DCSmooth", "CallableSmooth",
    "ZeroReg", "L1Reg", "GroupL2Reg", "soft_threshold",
    "WholeSpace", "Box", "Ball", "Halfspace", "Polyhedron", "Intersection",
    "QuadraticConstraint", "CallableConstraint",
    "load_problem", "save_problem", "problem_to_dict", "problem_from_dict",
]
