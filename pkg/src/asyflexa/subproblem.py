"""Best responses: minimizers of the strongly convex block subproblems."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, InvariantViolation, StructuralError
from .problem.regularizers import L1Reg, ZeroReg, soft_threshold
from .problem.sets import Ball, Box, Intersection, WholeSpace

FEAS_TOL = 1e-9


def _prox_dykstra(reg, set_, v, t, tol=1e-15, max_iter=100000):
    # proximal Dykstra splitting for the sum of g and the set indicator
    x = np.array(v, dtype=float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = reg.prox(x + p, t)
        p_new = x + p - y
        x_new = set_.project(y + q)
        q_new = y + q - x_new
        # stop only when the iterate and both increments are stationary
        change = np.sqrt(np.sum((x_new - x) ** 2) + np.sum((p_new - p) ** 2) + np.sum((q_new - q) ** 2))
        x, p, q = x_new, p_new, q_new
        if change <= tol * (1.0 + np.linalg.norm(x)):
            return x
    return x


def prox_on_set(reg, set_, v, t):
    """argmin_z  g(z) + ||z - v||^2 / (2t)  subject to z in the set.

    Closed forms cover g = 0 with any set, l1 with a box or the whole
    space, and the group norm on the whole space.  Other pairs use a
    proximal Dykstra iteration.
    """
    v = np.asarray(v, dtype=float)
    if isinstance(reg, ZeroReg) or reg.lam == 0.0:
        return set_.project(v)
    if isinstance(set_, WholeSpace) or (isinstance(set_, Intersection) and not set_.sets):
        return reg.prox(v, t)
    if isinstance(reg, L1Reg) and isinstance(set_, Box):
        return np.clip(soft_threshold(v, t * reg.lam), set_.lo, set_.hi)
    return _prox_dykstra(reg, set_, v, t)


@dataclass
class BestResponseRequest:
    """Inputs of one block subproblem.

    ``view`` is the (possibly delayed) base point, ``current`` the current
    value of the updated block.  ``constraint_surrogates`` is empty for the
    convexly constrained problem.
    """

    block: int
    view: np.ndarray
    current: np.ndarray
    surrogate: object
    reg: object = field(default_factory=ZeroReg)
    set: object = field(default_factory=WholeSpace)
    constraint_surrogates: list = field(default_factory=list)
    inner_tol: float = None
    max_iter: int = 5000
    barrier_mu0: float = 1.0
    feas_tol: float = FEAS_TOL
    method: str = "auto"

    def tolerance(self):
        if self.inner_tol is not None:
            return float(self.inner_tol)
        return 1e-10 * (1.0 + float(np.linalg.norm(self.surrogate.linear)))


def optimality_residual(model, reg, set_, z, t=None):
    """||z - prox_{t(g + set)}(z - t grad f~(z))|| with t = 1/(c + L_E) by default."""
    if t is None:
        t = 1.0 / (model.modulus + model.lip_E)
    return float(np.linalg.norm(z - prox_on_set(reg, set_, z - t * model.grad(z), t)))


def _apg(model, reg, set_, x0, tol, max_iter):
    # accelerated proximal gradient with adaptive (gradient-based) restart
    step = 1.0 / model.lip_E
    t_res = 1.0 / (model.modulus + model.lip_E)
    x = prox_on_set(reg, set_, x0, step)
    y = x.copy()
    theta = 1.0
    best, best_res = x, np.inf
    for _ in range(max_iter):
        x_new = prox_on_set(reg, set_, y - step * model.grad(y), step)
        res = np.linalg.norm(x_new - prox_on_set(reg, set_, x_new - t_res * model.grad(x_new), t_res))
        if res < best_res:
            best, best_res = x_new, res
        if res <= tol:
            return x_new
        if (y - x_new) @ (x_new - x) > 0.0:
            theta = 1.0
            y = x_new
        else:
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            theta = theta_new
        x = x_new
    raise ConvergenceError(f"inner solver stopped at residual {best_res:.3e} > {tol:.3e}", best, best_res)


def _solve_on_set(req, set_):
    model = req.surrogate
    if model.kind == "prox_linear":
        two_b = 2.0 * model.beta
        return prox_on_set(req.reg, set_, model.base_block - model.linear / two_b, 1.0 / two_b)
    return _apg(model, req.reg, set_, np.array(req.current, dtype=float), req.tolerance(), req.max_iter)


def best_response(req):
    """Minimizer of f~_i(.; view) + g_i over X_i (and the convexified constraints).

    Prox-linear models are solved in closed form through the joint prox;
    other models use accelerated proximal gradient until the optimality
    residual is below ``req.tolerance()``.
    """
    if req.constraint_surrogates:
        return best_response_ncc(req)
    return _solve_on_set(req, req.set)


def _strict_start(req):
    # a point of X_i with every surrogate constraint strictly negative
    cs = req.constraint_surrogates
    x = np.array(req.current, dtype=float)
    if max(c.value(x) for c in cs) < 0:
        return x
    direction = -sum(c.grad(x) for c in cs)
    scale = 1.0 + np.linalg.norm(x)
    for s in scale * 0.5 ** np.arange(1, 60):
        z = req.set.project(x + s * direction / max(np.linalg.norm(direction), 1e-300))
        if max(c.value(z) for c in cs) < 0:
            return z
    raise ConvergenceError("no strictly feasible point for the barrier method", x)


def _fd_hessian(grad, x, h=1e-6):
    n = x.size
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h * max(1.0, abs(x[j]))
        H[:, j] = (grad(x + e) - grad(x - e)) / (2.0 * e[j])
    return 0.5 * (H + H.T)


def _set_barrier_terms(set_, x):
    # value, gradient and Hessian of the log-barrier of a box or ball (None if x is outside)
    if isinstance(set_, WholeSpace) or (isinstance(set_, Intersection) and not set_.sets):
        return 0.0, np.zeros_like(x), np.zeros((x.size, x.size))
    if isinstance(set_, Box):
        lo, hi = np.broadcast_to(set_.lo, x.shape), np.broadcast_to(set_.hi, x.shape)
        fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
        a = np.where(fin_lo, x - lo, 1.0)
        b = np.where(fin_hi, hi - x, 1.0)
        if np.any(a <= 0) or np.any(b <= 0):
            return None
        val = -np.sum(np.log(a[fin_lo])) - np.sum(np.log(b[fin_hi]))
        g = np.where(fin_lo, -1.0 / a, 0.0) + np.where(fin_hi, 1.0 / b, 0.0)
        H = np.diag(np.where(fin_lo, 1.0 / a ** 2, 0.0) + np.where(fin_hi, 1.0 / b ** 2, 0.0))
        return val, g, H
    d = x - set_.center
    s = set_.radius ** 2 - d @ d
    if s <= 0:
        return None
    g = 2.0 * d / s
    return -np.log(s), g, 2.0 * np.eye(x.size) / s + np.outer(g, g)


def _newton_barrier(req):
    # damped Newton on t*model + barrier; an l1 term enters through its epigraph s >= |x|
    model, cs = req.surrogate, req.constraint_surrogates
    set_ = req.set
    n_i = np.asarray(req.current).size
    lam = req.reg.lam if isinstance(req.reg, L1Reg) else 0.0
    l1 = lam > 0
    if model.quadratic is not None:
        Hm = np.atleast_2d(model.quadratic)
    elif model.kind == "prox_linear":
        Hm = model.modulus * np.eye(n_i)
    else:
        Hm = None
    Hc = [c.hess if c.hess is not None else None for c in cs]
    m = len(cs) + (0 if isinstance(set_, WholeSpace) else (2 * n_i if isinstance(set_, Box) else 1))
    m += 2 * n_i if l1 else 0
    # suboptimality gap giving the requested distance, floored where double precision gives out
    gap_tol = max(0.5 * model.modulus * req.tolerance() ** 2, 1e-13)

    def parts(w, t):
        x = w[:n_i]
        vals = np.array([c.value(x) for c in cs])
        sb = _set_barrier_terms(set_, x)
        if np.any(vals >= 0) or sb is None:
            return np.inf, None, None
        val = t * model.value(x) - np.sum(np.log(-vals)) + sb[0]
        g = t * model.grad(x) + sb[1]
        H = t * (Hm if Hm is not None else _fd_hessian(model.grad, x)) + sb[2]
        for c, v, hc in zip(cs, vals, Hc):
            gc = c.grad(x)
            g = g + gc / (-v)
            H = H + np.outer(gc, gc) / v ** 2 + (hc if hc is not None else _fd_hessian(c.grad, x)) / (-v)
        if not l1:
            return val, g, H
        s = w[n_i:]
        a, b = s - x, s + x
        if np.any(a <= 0) or np.any(b <= 0):
            return np.inf, None, None
        val += t * lam * np.sum(s) - np.sum(np.log(a)) - np.sum(np.log(b))
        ia, ib = 1.0 / a ** 2, 1.0 / b ** 2
        G = np.concatenate([g + 1.0 / a - 1.0 / b, t * lam - 1.0 / a - 1.0 / b])
        HH = np.zeros((2 * n_i, 2 * n_i))
        HH[:n_i, :n_i] = H + np.diag(ia + ib)
        HH[:n_i, n_i:] = HH[n_i:, :n_i] = np.diag(ib - ia)
        HH[n_i:, n_i:] = np.diag(ia + ib)
        return val, G, HH

    x = _strict_start(req)
    if _set_barrier_terms(set_, x) is None:
        raise ConvergenceError("barrier start is on the boundary of the block set", x)
    w = np.concatenate([x, np.abs(x) + 1.0]) if l1 else x
    t = 1.0 / float(req.barrier_mu0)
    for _ in range(200):
        for _ in range(min(req.max_iter, 100)):
            val, g, H = parts(w, t)
            dw = -np.linalg.solve(H, g)
            dec = float(-g @ dw)
            # absolute decrement test: the barrier objective is self-concordant
            if dec <= 1e-14:
                break
            s = 1.0
            while True:
                v_new = parts(w + s * dw, t)[0]
                if v_new <= val - 0.25 * s * dec:
                    break
                s *= 0.5
                if s < 1e-12:
                    break
            if s < 1e-12:
                break
            w = w + s * dw
        if m / t <= gap_tol:
            return w[:n_i].copy()
        t *= 10.0
    raise ConvergenceError("barrier outer loop did not reach the target gap", w[:n_i])


def _barrier(req):
    smooth_reg = isinstance(req.reg, (ZeroReg, L1Reg))
    smooth_set = isinstance(req.set, (WholeSpace, Box, Ball)) or (isinstance(req.set, Intersection)
                                                                    and not req.set.sets)
    if smooth_reg and smooth_set:
        return _newton_barrier(req)
    return _barrier_prox(req)


def _barrier_prox(req):
    model = req.surrogate
    cs = req.constraint_surrogates
    tol = req.tolerance()
    reg, set_ = req.reg, req.set

    def phi(x, mu):
        vals = np.array([c.value(x) for c in cs])
        if np.any(vals >= 0):
            return np.inf
        return model.value(x) - mu * np.sum(np.log(-vals))

    def dphi(x, mu):
        return model.grad(x) + mu * sum(c.grad(x) / (-c.value(x)) for c in cs)

    x = _strict_start(req)
    mu = float(req.barrier_mu0)
    step = 1.0 / model.lip_E
    while True:
        for _ in range(req.max_iter):
            gx = dphi(x, mu)
            fx = phi(x, mu)
            while True:
                z = prox_on_set(reg, set_, x - step * gx, step)
                d = z - x
                fz = phi(z, mu)
                if np.isfinite(fz) and fz <= fx + gx @ d + (d @ d) / (2.0 * step) + 1e-15 * abs(fx):
                    break
                step *= 0.5
                if step < 1e-300:
                    raise ConvergenceError("barrier line search failed", x)
            moved = np.linalg.norm(z - x)
            x = z
            if moved <= max(tol, 1e-3 * mu) * step:
                break
            step *= 2.0
        if mu <= tol:
            return x
        mu = max(mu * 0.2, tol * 0.999)


def best_response_ncc(req):
    """Best response over X_i intersected with the convexified constraints.

    The surrogate constraints are built at the current block value, which
    must be feasible.  Balls and halfspaces are handled by exact projection;
    general convex surrogates fall back to a log-barrier loop.
    """
    cs = req.constraint_surrogates
    cur = np.asarray(req.current, dtype=float)
    worst = max(c.value(cur) for c in cs)
    if worst > req.feas_tol or not req.set.contains(cur, req.feas_tol):
        raise InvariantViolation(f"current block {req.block} is infeasible (violation {worst:.3e})")
    closed = all(c.convex_set is not None for c in cs)
    if req.method == "barrier" or (req.method == "auto" and not closed):
        z = _barrier(req)
    elif req.method in ("auto", "projection"):
        if not closed:
            raise StructuralError("projection method needs ball or halfspace surrogate constraints")
        z = _solve_on_set(req, Intersection([req.set] + [c.convex_set for c in cs]))
    else:
        raise StructuralError(f"unknown method {req.method!r}")
    viol = max(c.value(z) for c in cs)
    if viol > req.feas_tol:
        raise ConvergenceError(f"best response violates a surrogate constraint by {viol:.3e}", z, viol)
    return z


@dataclass
class PropertyReport:
    descent_margins: np.ndarray
    ratios: np.ndarray
    ratio_bound: float
    holder: bool = False
    tol: float = 1e-9
    slack: float = 0.05

    @property
    def min_margin(self):
        return float(np.min(self.descent_margins)) if self.descent_margins.size else np.inf

    @property
    def max_ratio(self):
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    @property
    def descent_violations(self):
        return int(np.sum(self.descent_margins < -self.tol))

    @property
    def ratio_violations(self):
        if self.holder:
            return 0
        return int(np.sum(self.ratios > self.ratio_bound * (1.0 + self.slack)))


def _random_point(rng, spec, scale=1.0, max_tries=1000):
    parts = []
    for i, s in enumerate(spec.partition.slices):
        ni = spec.partition.sizes[i]
        box = spec.sets[i].bounding_box(ni)
        cons = spec.block_constraints(i)
        for _ in range(max_tries):
            if box is not None and np.all(np.isfinite(box[0])):
                z = rng.uniform(box[0], box[1])
            else:
                z = spec.x0[s] + scale * rng.standard_normal(ni)
            z = spec.sets[i].project(z)
            if all(c.value(z) <= 0 for c in cons):
                break
        else:
            z = spec.x0[s].copy()
        parts.append(z)
    return np.concatenate(parts)


def solve_block(spec, kind, i, y, beta=None, constraint_kind=None, **kw):
    """Best response of block ``i`` at base ``y`` for a problem instance."""
    from .surrogate import build_constraint_surrogate, build_surrogate

    model = build_surrogate(kind, spec, i, y, beta)
    sl = spec.partition.slices[i]
    cs = [build_constraint_surrogate(constraint_kind or c.surrogate, c, j, y[sl], block=i)
          for j, c in enumerate(spec.block_constraints(i))]
    req = BestResponseRequest(i, y, y[sl], model, spec.regs[i], spec.sets[i], cs, **kw)
    return best_response(req), model


def verify_best_response_properties(spec, kind="prox_linear", trials=100, seed=0, beta=None,
                                    scale=1.0, tol=1e-9):
    """Sample the descent inequality and the Lipschitz (or Hoelder-1/2) behaviour of best responses.

    For each trial a block and two base points y, z are drawn.  The descent
    margin is ``-( (xh - y_i)'grad_i f(y) + g_i(xh) - g_i(y_i) + c ||xh - y_i||^2 )``
    and the ratio is ``||xh(y) - xh(z)|| / ||y - z||`` (power 1/2 for
    constrained instances, where only the Hoelder form is tested).
    """
    rng = np.random.default_rng(seed)
    margins, ratios = [], []
    bound = 0.0
    holder = spec.is_ncc
    for _ in range(int(trials)):
        i = int(rng.integers(spec.N))
        sl = spec.partition.slices[i]
        y = _random_point(rng, spec, scale)
        z = _random_point(rng, spec, scale)
        xy, my = solve_block(spec, kind, i, y, beta)
        xz, _ = solve_block(spec, kind, i, z, beta)
        d = xy - y[sl]
        lhs = d @ my.linear + spec.regs[i].value(xy) - spec.regs[i].value(y[sl]) + my.modulus * (d @ d)
        margins.append(-lhs)
        dist = np.linalg.norm(y - z)
        if dist > 0:
            ratios.append(np.linalg.norm(xy - xz) / (np.sqrt(dist) if holder else dist))
        bound = max(bound, my.lip_B / my.modulus)
    return PropertyReport(np.asarray(margins), np.asarray(ratios), bound, holder, tol)
