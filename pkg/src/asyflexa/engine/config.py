"""Run configuration and stepsize resolution."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import StructuralError
from ..metrics import max_stepsize
from ..scheduler import SchedulerConfig
from ..surrogate import build_surrogate, normalize_kind


@dataclass
class RunConfig:
    """Settings of one run.

    Parameters
    ----------
    gamma : float or "auto"
        Stepsize in (0, 1]; ``"auto"`` uses 0.9 times the stepsize bound.
    surrogate : str
        Surrogate kind for the smooth term.
    beta : float, optional
        Proximal weight; ``0.5 * L_f`` when omitted.
    budget : int
        Number of iterations (writes).
    scheduler : SchedulerConfig or dict, optional
        Event stream of the simulated engine.
    workers, access, cost_model :
        Threaded engine: worker count, ``"shared"`` or ``"partitioned"``
        block access, and ``{"unit": seconds, "costs": [...]}`` artificial
        per-block compute cost.
    delay_estimate : int, optional
        Delay used for the automatic stepsize of threaded runs
        (defaults to ``delta_cap``).
    metric_cadence : int
        Stationarity is evaluated every ``metric_cadence`` iterations.
    objective_cadence : int
        Objective (and Lyapunov value) every ``objective_cadence`` iterations.
    """

    gamma: object = "auto"
    surrogate: str = "prox_linear"
    beta: float = None
    budget: int = 1000
    scheduler: object = None
    seed: int = 0
    target_stationarity: float = None
    metric_cadence: int = 10
    objective_cadence: int = 1
    inner_tol: float = None
    inner_max_iters: int = 5000
    barrier_mu0: float = 1.0
    constraint_surrogate: str = None
    record_iterates: bool = False
    workers: int = 1
    access: str = "shared"
    cost_model: dict = None
    delta_cap: int = 64
    delay_estimate: int = None
    weights: list = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.surrogate = normalize_kind(self.surrogate)
        if isinstance(self.scheduler, dict):
            self.scheduler = SchedulerConfig(**self.scheduler)
        if self.budget < 0:
            raise StructuralError("budget must be nonnegative")
        if self.access not in ("shared", "partitioned"):
            raise StructuralError("access must be 'shared' or 'partitioned'")
        if self.gamma != "auto":
            g = float(self.gamma)
            if not (0.0 < g <= 1.0):
                raise StructuralError(f"gamma must lie in (0, 1], got {g}")
            self.gamma = g

    def block_costs(self, N):
        cm = self.cost_model or {}
        costs = cm.get("costs")
        if costs is None:
            return 0.0, np.zeros(N)
        costs = np.asarray(costs, dtype=float)
        if costs.shape != (N,):
            raise StructuralError("cost model needs one multiplier per block")
        return float(cm.get("unit", 1e-4)), costs


def surrogate_modulus(spec, cfg):
    """Smallest strong convexity modulus of the surrogates over the blocks at x0."""
    if cfg.surrogate == "prox_linear":
        beta = cfg.beta if cfg.beta is not None else 0.5 * spec.lipschitz
        return 2.0 * beta
    return min(build_surrogate(cfg.surrogate, spec, i, spec.x0, cfg.beta).modulus for i in range(spec.N))


def resolve_gamma(spec, cfg, delta):
    """Numerical stepsize for a run with maximum delay ``delta``."""
    c = surrogate_modulus(spec, cfg)
    bound = max_stepsize(c, spec.lipschitz, delta)
    if cfg.gamma == "auto":
        return min(1.0, 0.9 * bound)
    if cfg.gamma >= bound:
        warnings.warn(f"gamma={cfg.gamma} is not below the stepsize bound {bound:.6g}", stacklevel=2)
    return float(cfg.gamma)
