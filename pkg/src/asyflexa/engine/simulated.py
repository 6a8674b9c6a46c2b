"""Deterministic single-threaded execution of the asynchronous iteration."""

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConvergenceError, InvariantViolation, StructuralError
from ..metrics import stationarity, stationarity_ncc
from ..scheduler import ReplayScheduler, make_scheduler
from ..subproblem import BestResponseRequest, best_response
from ..surrogate import build_constraint_surrogate, build_surrogate
from .config import resolve_gamma, surrogate_modulus
from .history import VersionedHistory
from .trace import Trace


def block_update(spec, cfg, gamma, i, view, current):
    """Best response of block ``i`` at ``view`` and the relaxed new block value.

    Shared by both engines so that a recorded threaded run replays with
    identical floating-point operations.
    """
    model = build_surrogate(cfg.surrogate, spec, i, view, cfg.beta)
    cs = [build_constraint_surrogate(cfg.constraint_surrogate or c.surrogate, c, j, current, block=i)
          for j, c in enumerate(spec.block_constraints(i))]
    req = BestResponseRequest(i, view, current, model, spec.regs[i], spec.sets[i], cs,
                              inner_tol=cfg.inner_tol, max_iter=cfg.inner_max_iters,
                              barrier_mu0=cfg.barrier_mu0)
    x_hat = best_response(req)
    new = current + gamma * (x_hat - current)
    return x_hat, new


def compose_delayed_view(hist, d):
    return hist.compose(d)


@dataclass
class StepOutcome:
    i: int
    x_hat: np.ndarray
    step_norm: float


class AsyncState:
    """Mutable state of a simulated run: history ring and current iterate."""

    def __init__(self, spec, depth, x0=None):
        self.spec = spec
        x0 = spec.x0 if x0 is None else spec.partition.check(x0)
        self.hist = VersionedHistory(x0, spec.partition, depth)

    @property
    def k(self):
        return self.hist.k

    @property
    def x(self):
        return self.hist.current


def step(state, event, cfg, gamma):
    """Apply one event: only block ``event.i`` moves, by ``gamma`` toward its best response."""
    spec = state.spec
    i = int(event.i)
    d = np.asarray(event.d, dtype=np.int64)
    if d[i] != 0:
        raise StructuralError(f"event {event.k} reads its own block with delay {int(d[i])}")
    view = state.hist.compose(d)
    current = state.x[spec.partition.slices[i]].copy()
    x_hat, new = block_update(spec, cfg, gamma, i, view, current)
    state.hist.advance(i, new)
    return StepOutcome(i, x_hat, float(np.linalg.norm(x_hat - current)))


def _stationarity(spec, x):
    return stationarity_ncc(spec, x) if spec.is_ncc else stationarity(spec, x)


class _Recorder:
    """Accumulates per-step records and maintains the Lyapunov window."""

    def __init__(self, spec, cfg, gamma, delta, modulus):
        self.spec, self.cfg, self.gamma, self.delta = spec, cfg, gamma, int(delta)
        self.L = float(spec.lipschitz)
        self.modulus = modulus
        self.rows = {name: [] for name in ("k", "worker", "i", "D", "step_norm", "F", "Ftilde", "MF", "wall_ns", "feas")}
        self.window = deque(maxlen=max(self.delta, 1))
        self.weights = np.arange(1, self.delta + 1, dtype=float)
        self.iterates = [] if cfg.record_iterates else None
        self.F0 = spec.objective(spec.x0)
        self.MF0 = _stationarity(spec, spec.x0)
        self.block_viol = np.array([
            max([c.value(spec.x0[s]) for c in spec.block_constraints(j)], default=0.0)
            for j, s in enumerate(spec.partition.slices)
        ])
        if self.iterates is not None:
            self.iterates.append(spec.x0.copy())

    def lyapunov_tail(self):
        if self.delta == 0:
            return 0.0
        w = np.zeros(self.delta)
        vals = list(self.window)
        if vals:
            w[self.delta - len(vals):] = vals
        return self.delta * 0.5 * self.L * float(w @ self.weights)

    def add(self, k, worker, i, d, step_norm, x, wall_ns=0, force_metrics=False):
        r = self.rows
        r["k"].append(k)
        r["worker"].append(worker)
        r["i"].append(i)
        r["D"].append(np.asarray(d, dtype=int))
        r["step_norm"].append(step_norm)
        if self.delta:
            self.window.append((self.gamma * step_norm) ** 2)
        it = k + 1
        if it % self.cfg.objective_cadence == 0 or force_metrics:
            F = self.spec.objective(x)
            r["F"].append(F)
            r["Ftilde"].append(F + self.lyapunov_tail())
        else:
            r["F"].append(np.nan)
            r["Ftilde"].append(np.nan)
        mf = np.nan
        if it % self.cfg.metric_cadence == 0 or force_metrics:
            mf = _stationarity(self.spec, x)
        r["MF"].append(mf)
        r["wall_ns"].append(wall_ns)
        if self.spec.is_ncc:
            s = self.spec.partition.slices[i]
            self.block_viol[i] = max([c.value(x[s]) for c in self.spec.block_constraints(i)], default=0.0)
            in_set = self.spec.sets[i].contains(x[s], 1e-9)
            r["feas"].append(float(np.max(self.block_viol)) if in_set else np.inf)
        if self.iterates is not None:
            self.iterates.append(np.array(x))
        return mf

    def finish_metrics(self, x):
        # make sure the last record carries the objective and stationarity
        r = self.rows
        if r["k"] and np.isnan(r["MF"][-1]):
            r["MF"][-1] = _stationarity(self.spec, x)
        if r["k"] and np.isnan(r["F"][-1]):
            F = self.spec.objective(x)
            r["F"][-1] = F
            r["Ftilde"][-1] = F + self.lyapunov_tail()

    def build(self, x, engine, status, message=""):
        r = self.rows
        N = self.spec.N
        D = np.array(r["D"], dtype=int).reshape(len(r["D"]), N)
        return Trace(
            k=np.array(r["k"], dtype=int), worker=np.array(r["worker"], dtype=int), i=np.array(r["i"], dtype=int),
            D=D, step_norm=np.array(r["step_norm"], dtype=float), F=np.array(r["F"], dtype=float),
            Ftilde=np.array(r["Ftilde"], dtype=float), MF=np.array(r["MF"], dtype=float),
            wall_ns=np.array(r["wall_ns"], dtype=np.int64), x0=self.spec.x0.copy(), x=np.array(x),
            F0=self.F0, MF0=self.MF0, gamma=self.gamma, modulus=self.modulus, lipschitz=self.L,
            delta=self.delta, engine=engine, status=status, message=message,
            feas_violation=np.array(r["feas"], dtype=float) if self.spec.is_ncc else None,
            iterates=self.iterates, extra={"N": N, "surrogate": self.cfg.surrogate},
        )


def run_simulated(spec, cfg, scheduler=None):
    """Run the iteration on a single thread, driven by an event stream.

    Stops after ``cfg.budget`` events, when the stream ends, or when
    ``||M_F|| <= cfg.target_stationarity`` at a cadence point.  Subproblem
    failures end the run with ``status="error"`` and a partial trace.
    """
    if scheduler is None:
        if cfg.scheduler is None:
            raise StructuralError("a simulated run needs a scheduler")
        scheduler = make_scheduler(cfg.scheduler)
    if isinstance(scheduler, ReplayScheduler):
        delta = max((max(e.d) for e in scheduler.events), default=0)
    else:
        delta = scheduler.cfg.delta
    if spec.is_ncc and not spec.feasibility(spec.x0, 1e-9).feasible:
        raise InvariantViolation("constrained runs need a feasible starting point")
    gamma = resolve_gamma(spec, cfg, delta)
    modulus = surrogate_modulus(spec, cfg)
    state = AsyncState(spec, delta + 1)
    rec = _Recorder(spec, cfg, gamma, delta, modulus)
    status, message = "censored", ""
    if cfg.target_stationarity is not None and rec.MF0 <= cfg.target_stationarity:
        status = "target"
    else:
        for _ in range(cfg.budget):
            try:
                ev = next(scheduler)
            except StopIteration:
                status = "ok"
                break
            try:
                out = step(state, ev, cfg, gamma)
            except (ConvergenceError, InvariantViolation) as exc:
                status, message = "error", f"{type(exc).__name__}: {exc}"
                break
            mf = rec.add(ev.k, 0, out.i, ev.d, out.step_norm, state.x)
            if cfg.target_stationarity is not None and mf <= cfg.target_stationarity:
                status = "target"
                break
        else:
            if cfg.target_stationarity is None:
                status = "ok"
    rec.finish_metrics(state.x)
    return rec.build(state.x, "sim", status, message)
