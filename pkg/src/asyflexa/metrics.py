"""Convergence diagnostics: stationarity, Lyapunov descent, delays, complexity constants."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, InvariantViolation, StructuralError
from .problem.sets import Intersection
from .subproblem import prox_on_set


@dataclass
class TheoryConstants:
    """Constants entering the stepsize and iteration-complexity bounds.

    Parameters
    ----------
    c : float
        Strong convexity modulus of the surrogates.
    L_f, L_B, L_E, L_g : float
        Lipschitz constants of the block gradients of f, of the surrogate
        gradient in the base point and in the block variable, and of g.
    delta : int
        Maximum delay.
    T : int
        Selection window.
    p_min : float
        Selection floor.
    gamma : float
        Stepsize.
    N : int
        Number of blocks.
    alpha : float
        Free parameter in (0, 1).
    """

    c: float
    L_f: float
    L_B: float
    L_E: float
    delta: int
    T: int
    p_min: float
    gamma: float
    N: int = 1
    L_g: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie strictly inside (0, 1)")
        if self.c <= 0 or self.L_f <= 0:
            raise DomainError("c and L_f must be positive")
        if min(self.L_B, self.L_E, self.L_g) < 0:
            raise DomainError("Lipschitz constants must be nonnegative")
        if not (0.0 < self.gamma <= 1.0):
            raise DomainError("gamma must lie in (0, 1]")
        if not (0.0 < self.p_min <= 1.0) or self.T < 1 or self.delta < 0 or self.N < 1:
            raise DomainError("need p_min in (0, 1], T >= 1, delta >= 0, N >= 1")


def max_stepsize(c, L_f, delta):
    """Largest admissible stepsize (exclusive): c / (L_f + delta^2 L_f / 2)."""
    if c <= 0 or L_f <= 0 or delta < 0:
        raise DomainError("need c > 0, L_f > 0, delta >= 0")
    return c / (L_f + 0.5 * delta * delta * L_f)


def descent_coefficient(gamma, c, L_f, delta):
    """gamma * (c - gamma * (L_f + delta^2 L_f / 2)), the guaranteed Lyapunov decrease rate."""
    return gamma * (c - gamma * (L_f + 0.5 * delta * delta * L_f))


def complexity_constants(tc):
    """The two constants (C1, C2) of the iteration-complexity bound."""
    if tc.gamma >= max_stepsize(tc.c, tc.L_f, tc.delta):
        raise DomainError("gamma must be strictly below the stepsize bound")
    g, a, p = tc.gamma, tc.alpha, tc.p_min
    denom = descent_coefficient(g, tc.c, tc.L_f, tc.delta) * (p - p * a)
    C1 = 2.0 * (1.0 + (1.0 + tc.L_E) * (1.0 + tc.L_B + tc.L_E)
                + g * g * tc.N * p / a * (1.0 + (tc.L_f + 1.0) ** 2)) / denom
    C2 = 2.0 * tc.T * tc.L_B * (1.0 + tc.L_B + tc.L_E) / denom
    return C1, C2


def kepsilon_bound(tc, C, gap, eps):
    """Worst-case iterations to reach E||M_F||^2 <= eps given F(x0) - F* = gap and counter bound C."""
    C1, C2 = complexity_constants(tc)
    return (C1 * (tc.T + 1) + C2 * tc.gamma ** 2 * C * (tc.T + tc.delta)) * gap / eps


def prox_map(spec, x, grad=None):
    """Unit-weight prox-projection y(x) = argmin_y grad f(x)'(y-x) + g(y) + ||y-x||^2/2 over X."""
    g = spec.smooth.grad(x) if grad is None else grad
    return np.concatenate([
        prox_on_set(spec.regs[i], spec.sets[i], x[s] - g[s], 1.0)
        for i, s in enumerate(spec.partition.slices)
    ])


def stationarity(spec, x):
    """||M_F(x)||: distance between x and its unit prox-projection."""
    x = spec.partition.check(x)
    return float(np.linalg.norm(x - prox_map(spec, x)))


def stationarity_ncc(spec, x, constraint_kind=None, tol=1e-9, inner_tol=1e-10):
    """||M_F^c(x)||, with the constraint sets convexified at the blocks of x."""
    from .subproblem import BestResponseRequest, best_response_ncc
    from .surrogate import build_constraint_surrogate, build_surrogate

    x = spec.partition.check(x)
    if not spec.is_ncc:
        return stationarity(spec, x)
    rep = spec.feasibility(x, tol)
    if not rep.feasible:
        raise InvariantViolation(f"stationarity_ncc needs a feasible point (violation {rep.max_violation:.3e})")
    g = spec.smooth.grad(x)
    out = np.empty_like(x)
    for i, s in enumerate(spec.partition.slices):
        cons = spec.block_constraints(i)
        if not cons:
            out[s] = prox_on_set(spec.regs[i], spec.sets[i], x[s] - g[s], 1.0)
            continue
        cs = [build_constraint_surrogate(constraint_kind or c.surrogate, c, j, x[s], block=i)
              for j, c in enumerate(cons)]
        if all(c.convex_set is not None for c in cs):
            K = Intersection([spec.sets[i]] + [c.convex_set for c in cs])
            out[s] = prox_on_set(spec.regs[i], K, x[s] - g[s], 1.0)
        else:
            model = build_surrogate("prox_linear", spec, i, x, beta=0.5)
            req = BestResponseRequest(i, x, x[s], model, spec.regs[i], spec.sets[i], cs,
                                      inner_tol=inner_tol, feas_tol=tol)
            out[s] = best_response_ncc(req)
    return float(np.linalg.norm(x - out))


def lyapunov(hist, spec, delta, L_f=None):
    """Lyapunov value from the last ``delta + 1`` iterates ``[x^{k-delta}, ..., x^k]``.

    Entries before the start must be padded with ``x^0``.
    """
    L_f = spec.lipschitz if L_f is None else L_f
    if len(hist) < delta + 1:
        raise StructuralError(f"need {delta + 1} iterates, got {len(hist)}")
    hist = [np.asarray(h, dtype=float) for h in hist[len(hist) - delta - 1:]]
    total = 0.0
    for w in range(1, delta + 1):
        diff = hist[w] - hist[w - 1]
        total += w * (diff @ diff)
    return spec.objective(hist[-1]) + delta * 0.5 * L_f * total


def lyapunov_sequence(F, sq_moves, delta, L_f):
    """Lyapunov values for a run.

    Parameters
    ----------
    F : array, length K + 1
        Objective at x^0 ... x^K.
    sq_moves : array, length K
        ||x^{l+1} - x^l||^2 for l = 0 ... K-1.
    """
    F = np.asarray(F, dtype=float)
    s = np.asarray(sq_moves, dtype=float)
    K = s.size
    out = F.copy()
    if delta == 0 or K == 0:
        return out
    padded = np.concatenate([np.zeros(delta), s])
    w = np.arange(1, delta + 1, dtype=float)
    # out[k] uses moves l = k-delta .. k-1, i.e. padded[k .. k+delta-1]
    win = np.lib.stride_tricks.sliding_window_view(padded, delta)[: K + 1]
    out += delta * 0.5 * L_f * (win @ w)
    return out


@dataclass
class DescentReport:
    slacks: np.ndarray = field(repr=False)
    tol: float
    coefficient: float

    @property
    def min_slack(self):
        return float(np.min(self.slacks)) if self.slacks.size else 0.0

    @property
    def violations(self):
        return int(np.sum(self.slacks < -self.tol))

    @property
    def passed(self):
        return self.violations == 0


def check_lyapunov_descent(trace, spec=None, tc=None, tol=None):
    """Per-step slack of the Lyapunov decrease inequality.

    ``s_k = Ftilde_k - Ftilde_{k+1} - gamma (c - gamma (L_f + delta^2 L_f/2)) ||xhat - x_i^k||^2``.
    The Lyapunov values are rebuilt from the recorded objective values and
    step norms (one block moves per step, by ``gamma * step_norm``).
    """
    if tc is not None:
        gamma, c, L_f, delta = tc.gamma, tc.c, tc.L_f, tc.delta
    else:
        gamma, c, L_f, delta = trace.gamma, trace.modulus, trace.lipschitz, trace.delta
    F = np.concatenate([[trace.F0], trace.F])
    if np.any(np.isnan(F)):
        raise StructuralError("descent check needs the objective at every iteration")
    steps = np.asarray(trace.step_norm, dtype=float)
    Ft = lyapunov_sequence(F, (gamma * steps) ** 2, delta, L_f)
    coef = descent_coefficient(gamma, c, L_f, delta)
    slacks = Ft[:-1] - Ft[1:] - coef * steps ** 2
    if tol is None:
        tol = 1e-9 * (1.0 + abs(trace.F0))
    return DescentReport(slacks, float(tol), coef)


@dataclass
class DelayReport:
    mean_delay: float
    max_delay: int
    block_update_delay: np.ndarray
    block_read_delay: np.ndarray
    counters: np.ndarray = field(repr=False)
    C: int
    delta: int
    T: int

    def to_dict(self):
        return {
            "mean_delay": self.mean_delay,
            "max_delay": self.max_delay,
            "block_update_delay": self.block_update_delay.tolist(),
            "block_read_delay": self.block_read_delay.tolist(),
            "C": self.C,
            "delta": self.delta,
            "T": self.T,
        }


def _delays_and_blocks(obj):
    if hasattr(obj, "D"):
        return np.asarray(obj.D, dtype=int), np.asarray(obj.i, dtype=int)
    events = list(obj)
    return np.array([e.d for e in events], dtype=int), np.array([e.i for e in events], dtype=int)


def delay_stats(trace, T=None, delta=None):
    """Average/maximum delays and the windowed update counters.

    The counter of block i at iteration l is the number of updates of i in
    ``[l - delta, l - 1]``; ``M_i^k`` is its maximum over ``l = k .. k+T``
    and ``C`` the maximum over all blocks and iterations.  ``delta``
    defaults to the largest observed delay.
    """
    D, I = _delays_and_blocks(trace)
    if D.size == 0:
        raise StructuralError("delay statistics need a nonempty trace")
    K, N = D.shape
    max_delay = int(D.max())
    delta = max_delay if delta is None else int(delta)
    T = N if T is None else int(T)
    view_mean = D.mean(axis=1)
    upd = np.full(N, np.nan)
    for i in range(N):
        m = I == i
        if m.any():
            upd[i] = view_mean[m].mean()
    onehot = np.zeros((K + 1, N))
    np.add.at(onehot, (np.arange(1, K + 1), I), 1.0)
    csum = np.cumsum(onehot, axis=0)
    l = np.arange(K + 1)
    lo = np.maximum(l - delta, 0)
    counts = csum[l] - csum[lo]
    if K + 1 >= T + 1:
        M = np.lib.stride_tricks.sliding_window_view(counts, T + 1, axis=0).max(axis=-1)
    else:
        M = counts.max(axis=0, keepdims=True)
    return DelayReport(float(D.mean()), max_delay, upd, D.mean(axis=0), M.astype(int),
                       int(M.max()), delta, T)


@dataclass
class KEpsTable:
    eps: np.ndarray
    K: np.ndarray
    censored: np.ndarray
    bound: np.ndarray
    slope: float

    def rows(self):
        return [
            {"eps": float(e), "K": (None if c else int(k)), "censored": bool(c),
             "bound": (None if np.isnan(b) else float(b))}
            for e, k, c, b in zip(self.eps, self.K, self.censored, self.bound)
        ]


def mean_squared_stationarity(runs):
    """Seed average of ||M_F||^2 on the iteration grid shared by all runs."""
    grids = [np.asarray(r.mf_iterations()[0]) for r in runs]
    common = grids[0]
    for g in grids[1:]:
        common = np.intersect1d(common, g)
    vals = []
    for r in runs:
        it, mf = r.mf_iterations()
        idx = np.searchsorted(it, common)
        vals.append(np.asarray(mf)[idx] ** 2)
    return common, np.mean(vals, axis=0)


def k_epsilon(runs, eps_levels, tc=None, C=None, gap=None):
    """First iteration where the seed-averaged ||M_F||^2 is at most each eps.

    When ``tc`` and ``gap`` (F(x0) - F*) are given, the worst-case bound
    is reported next to each level.
    """
    its, msq = mean_squared_stationarity(list(runs))
    eps = np.asarray(sorted(eps_levels, reverse=True), dtype=float)
    K = np.zeros(eps.size, dtype=int)
    cens = np.zeros(eps.size, dtype=bool)
    bound = np.full(eps.size, np.nan)
    for j, e in enumerate(eps):
        hit = np.flatnonzero(msq <= e)
        if hit.size:
            K[j] = its[hit[0]]
        else:
            cens[j] = True
            K[j] = -1
        if tc is not None and gap is not None:
            bound[j] = kepsilon_bound(tc, tc.delta if C is None else C, gap, e)
    ok = (~cens) & (K > 0)
    slope = np.nan
    if ok.sum() >= 2:
        slope = float(np.polyfit(np.log(1.0 / eps[ok]), np.log(K[ok]), 1)[0])
    return KEpsTable(eps, K, cens, bound, slope)


@dataclass
class SpeedupRow:
    workers: int
    time_s: float
    speedup: float
    efficiency: float
    censored: bool


def time_to_target(trace, target):
    """Seconds of wall clock until ||M_F|| first drops to ``target`` (None if never)."""
    if trace.MF0 <= target:
        return 0.0
    mf = np.asarray(trace.MF)
    hit = np.flatnonzero(mf <= target)
    if not hit.size:
        return None
    return float(trace.wall_ns[hit[0]]) * 1e-9


def speedup_report(traces, target):
    """Time-to-target, speedup and efficiency for runs keyed by worker count."""
    times = {w: time_to_target(t, target) for w, t in sorted(traces.items())}
    base_w = min(times)
    base = times[base_w]
    rows = []
    for w, t in times.items():
        if t is None or base is None:
            rows.append(SpeedupRow(w, np.nan if t is None else t, np.nan, np.nan, True))
            continue
        s = base / t if t > 0 else np.inf
        rows.append(SpeedupRow(w, t, s, s * base_w / w, False))
    return rows
