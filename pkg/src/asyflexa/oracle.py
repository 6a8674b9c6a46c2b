"""Independent reference computations for cross-checking the main pipeline.

Nothing here reuses the surrogate, subproblem, scheduler or engine code;
only the problem evaluators (values, block gradients, projections for
simple sets) are shared.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .exceptions import StructuralError


@dataclass
class OracleResult:
    x: np.ndarray
    value: float
    method: str
    tolerance: float
    iterations: int = 0
    censored: bool = False


def _shrink(v, tau):
    out = np.zeros_like(v)
    pos = v > tau
    neg = v < -tau
    out[pos] = v[pos] - tau
    out[neg] = v[neg] + tau
    return out


def _simple_prox(reg, set_, v, t):
    # own closed forms for g in {0, l1} and X in {whole, box, ball}
    kind_g = getattr(reg, "kind", "zero")
    lam = getattr(reg, "lam", 0.0)
    kind_x = getattr(set_, "kind", "whole")
    if kind_g == "l1" and lam > 0:
        z = _shrink(v, t * lam)
        if kind_x == "whole":
            return z
        if kind_x == "box":
            return np.minimum(np.maximum(z, set_.lo), set_.hi)
        raise StructuralError("oracle supports l1 only with box or whole-space sets")
    if kind_g not in ("zero", "l1") and lam > 0:
        raise StructuralError(f"oracle does not support regularizer {kind_g!r}")
    if kind_x == "whole":
        return np.array(v, dtype=float)
    if kind_x == "box":
        return np.minimum(np.maximum(v, set_.lo), set_.hi)
    if kind_x == "ball":
        d = v - set_.center
        r = np.sqrt(d @ d)
        return np.array(v) if r <= set_.radius else set_.center + d * (set_.radius / r)
    raise StructuralError(f"oracle does not support set kind {kind_x!r}")


def _slsqp_block(grad_i, y_i, beta, set_, constraints, start):
    # min grad'(x - y) + beta ||x - y||^2  s.t. majorized constraints, x in the set
    def obj(x):
        d = x - y_i
        return grad_i @ d + beta * (d @ d)

    def jac(x):
        return grad_i + 2.0 * beta * (x - y_i)

    cons = []
    for c in constraints:
        cy, gy, L = c.value(y_i), c.grad(y_i), c.curvature
        cons.append({
            "type": "ineq",
            "fun": lambda x, cy=cy, gy=gy, L=L: -(cy + gy @ (x - y_i) + 0.5 * L * (x - y_i) @ (x - y_i)),
            "jac": lambda x, gy=gy, L=L: -(gy + L * (x - y_i)),
        })
    bounds = None
    kind_x = getattr(set_, "kind", "whole")
    if kind_x == "box":
        bounds = list(zip(np.broadcast_to(set_.lo, y_i.shape), np.broadcast_to(set_.hi, y_i.shape)))
    elif kind_x == "ball":
        cons.append({"type": "ineq", "fun": lambda x: set_.radius ** 2 - (x - set_.center) @ (x - set_.center),
                     "jac": lambda x: -2.0 * (x - set_.center)})
    elif kind_x != "whole":
        raise StructuralError(f"oracle does not support set kind {kind_x!r}")
    res = minimize(obj, start, jac=jac, bounds=bounds, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 1000})
    return res.x


def _block_map(spec, x, i, grad_i, beta):
    """Best response of block i for the proximal-linear model with weight beta."""
    s = spec.partition.slices[i]
    cons = spec.block_constraints(i)
    if not cons:
        return _simple_prox(spec.regs[i], spec.sets[i], x[s] - grad_i / (2.0 * beta), 1.0 / (2.0 * beta))
    if getattr(spec.regs[i], "lam", 0.0) > 0:
        raise StructuralError("oracle does not support regularizers together with constraints")
    for c in cons:
        if c.curvature is None:
            raise StructuralError("oracle needs curvature constants for constrained blocks")
    return _slsqp_block(grad_i, x[s], beta, spec.sets[i], cons, x[s].copy())


def sca_trajectory(spec, gamma, beta, steps, x0=None):
    """Cyclic synchronous block updates; returns the iterate after each update."""
    x = np.array(spec.x0 if x0 is None else x0, dtype=float)
    out = np.empty((steps, x.size))
    for k in range(steps):
        i = k % spec.N
        s = spec.partition.slices[i]
        g = spec.smooth.grad_block(x, i)
        xh = _block_map(spec, x, i, g, beta)
        x[s] = x[s] + gamma * (xh - x[s])
        out[k] = x
    return out


def reference_stationarity(spec, x):
    """Unit-weight prox-projection residual (constraints convexified at x)."""
    g = spec.smooth.grad(x)
    y = np.concatenate([_block_map(spec, x, i, g[s], 0.5) for i, s in enumerate(spec.partition.slices)])
    return float(np.linalg.norm(x - y))


def reference_solve(spec, tol=1e-8, gamma=None, beta=None, max_sweeps=100000, check_every=10,
                    stall_checks=100):
    """Synchronous full sweeps of block SCA from x0 until the stationarity residual is below ``tol``.

    Defaults: ``beta = L_f / 2`` and ``gamma = 0.5``.  Gives up (censored)
    after ``stall_checks`` checks without a 1% improvement.
    """
    L = float(spec.smooth.lipschitz)
    beta = 0.5 * L if beta is None else beta
    gamma = 0.5 if gamma is None else gamma
    x = spec.x0.copy()
    res = reference_stationarity(spec, x)
    sweeps = 0
    best, stalled = res, 0
    while res > tol and sweeps < max_sweeps:
        for i, s in enumerate(spec.partition.slices):
            g = spec.smooth.grad_block(x, i)
            xh = _block_map(spec, x, i, g, beta)
            x[s] = x[s] + gamma * (xh - x[s])
        sweeps += 1
        if sweeps % check_every == 0:
            res = reference_stationarity(spec, x)
            # stop when the residual sits at the inner solver's precision floor
            stalled = 0 if res < 0.99 * best else stalled + 1
            best = min(best, res)
            if stalled >= stall_checks:
                break
    res = reference_stationarity(spec, x)
    return OracleResult(x, spec.objective(x), "sync-block-sca", max(res, np.finfo(float).eps),
                        sweeps, censored=res > tol)


def brute_force_best_response(req, resolution=1e-4, points=2001):
    """Grid minimizer of the block subproblem (block dimension at most 2).

    The grid covers the bounding box of the block set intersected with the
    convexified constraints and is refined around the incumbent until the
    cell width is below ``resolution``.
    """
    model = req.surrogate
    ni = np.asarray(req.current).size
    if ni > 2:
        raise StructuralError("brute force is limited to blocks of dimension 1 or 2")
    boxes = []
    b = req.set.bounding_box(ni)
    if b is not None:
        boxes.append(b)
    for c in req.constraint_surrogates:
        if c.convex_set is not None and c.convex_set.bounding_box(ni) is not None:
            boxes.append(c.convex_set.bounding_box(ni))
    if not boxes:
        raise StructuralError("brute force needs a bounded feasible set")
    lo = np.max([np.asarray(bx[0], dtype=float) for bx in boxes], axis=0)
    hi = np.min([np.asarray(bx[1], dtype=float) for bx in boxes], axis=0)
    if np.any(lo > hi):
        raise StructuralError("the feasible box is empty")
    per_dim = points if ni == 1 else int(np.sqrt(points * 20))

    def evaluate(lo, hi):
        axes = [np.linspace(lo[d], hi[d], per_dim) for d in range(ni)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, ni)
        best, best_val = None, np.inf
        for z in mesh:
            if not req.set.contains(z, 0.0):
                continue
            if any(c.value(z) > 0.0 for c in req.constraint_surrogates):
                continue
            v = model.value(z) + req.reg.value(z)
            if v < best_val:
                best, best_val = z, v
        return best, (hi - lo) / (per_dim - 1)

    best, cell = evaluate(lo, hi)
    if best is None:
        raise StructuralError("no grid point is feasible")
    width = cell
    recenters = 0
    while np.max(width) > resolution:
        lo2 = np.maximum(best - 4 * width, lo)
        hi2 = np.minimum(best + 4 * width, hi)
        cand, new_width = evaluate(lo2, hi2)
        if cand is None:
            break
        # keep the window size while the incumbent slides along a curved boundary
        on_edge = np.any((np.abs(cand - lo2) < 0.5 * new_width) & (lo2 > lo)) or \
            np.any((np.abs(cand - hi2) < 0.5 * new_width) & (hi2 < hi))
        best = cand
        if on_edge and recenters < 200:
            recenters += 1
            continue
        width = new_width
    return best
