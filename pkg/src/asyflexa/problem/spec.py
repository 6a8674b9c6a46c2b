"""Problem instances F(x) = f(x) + sum_i g_i(x_i) with block sets and constraints."""

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import StructuralError
from .regularizers import ZeroReg
from .sets import WholeSpace


@dataclass
class FeasibilityReport:
    in_set: np.ndarray
    violation: np.ndarray
    tol: float

    @property
    def feasible(self):
        return bool(np.all(self.in_set) and np.all(self.violation <= self.tol))

    @property
    def max_violation(self):
        return float(np.max(self.violation)) if self.violation.size else 0.0


@dataclass
class ProblemSpec:
    """A block-structured instance.

    ``constraints`` is ``None`` for the convexly constrained problem, or a
    list with one (possibly empty) list of constraint objects per block.
    When constraints are present ``x0`` must be feasible.
    """

    partition: object
    smooth: object
    regs: list = None
    sets: list = None
    constraints: list = None
    x0: np.ndarray = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.partition.N
        if self.regs is None:
            self.regs = [ZeroReg() for _ in range(N)]
        if self.sets is None:
            self.sets = [WholeSpace() for _ in range(N)]
        if len(self.regs) != N or len(self.sets) != N:
            raise StructuralError("need one regularizer and one set per block")
        if self.constraints is not None and len(self.constraints) != N:
            raise StructuralError("need one constraint list per block")
        if self.x0 is None:
            if self.constraints is not None:
                raise StructuralError("constrained instances must carry a feasible x0")
            self.x0 = np.concatenate([s.project(np.zeros(n)) for s, n in zip(self.sets, self.partition.sizes)])
        self.x0 = self.partition.check(self.x0).copy()

    @property
    def N(self):
        return self.partition.N

    @property
    def n(self):
        return self.partition.n

    @property
    def is_ncc(self):
        return self.constraints is not None

    @property
    def lipschitz(self):
        return self.smooth.lipschitz

    def block_constraints(self, i):
        return [] if self.constraints is None else self.constraints[i]

    def reg_value(self, x):
        return sum(g.value(x[s]) for g, s in zip(self.regs, self.partition.slices))

    def objective(self, x):
        x = self.partition.check(x)
        return self.smooth.value(x) + self.reg_value(x)

    def feasibility(self, x, tol=1e-9):
        x = self.partition.check(x)
        N = self.N
        in_set = np.zeros(N, dtype=bool)
        viol = np.zeros(N)
        for i, s in enumerate(self.partition.slices):
            in_set[i] = self.sets[i].contains(x[s], tol)
            cons = self.block_constraints(i)
            if cons:
                viol[i] = max(0.0, max(c.value(x[s]) for c in cons))
        return FeasibilityReport(in_set, viol, tol)


def eval_objective(spec, x):
    """F(x) = f(x) + sum_i g_i(x_i)."""
    return spec.objective(x)


def check_feasibility(spec, x, tol=1e-9):
    return spec.feasibility(x, tol)
