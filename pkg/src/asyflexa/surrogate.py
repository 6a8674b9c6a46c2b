"""Strongly convex block surrogates of f and convex surrogates of constraints."""

from dataclasses import dataclass

import numpy as np

from .exceptions import StructuralError
from .problem.constraints import QuadraticConstraint
from .problem.sets import Ball, Halfspace

SURROGATE_KINDS = ("prox_linear", "second_order", "partial_convexity", "dc_split")
CONSTRAINT_KINDS = ("descent_lemma", "dc_split")

# max |d/dt sech^2(t)| = 4 / (3 sqrt(3))
_SECH2_SLOPE = 4.0 / (3.0 * np.sqrt(3.0))


def normalize_kind(kind, allowed=SURROGATE_KINDS):
    k = str(kind).replace("-", "_").lower()
    if k not in allowed:
        raise StructuralError(f"unknown surrogate kind {kind!r}; expected one of {allowed}")
    return k


def _hess_lipschitz(smooth):
    """Lipschitz constant of the block Hessian, or None when unknown."""
    kind = getattr(smooth, "kind", "")
    if kind in ("quadratic", "least_squares"):
        return 0.0
    if kind == "logcosh":
        return smooth.mu * _SECH2_SLOPE
    if kind == "dc":
        a, b = _hess_lipschitz(smooth.plus), _hess_lipschitz(smooth.minus)
        return None if a is None or b is None else a + b
    return getattr(smooth, "hess_lipschitz", None)


def _diameter(set_, dim):
    box = set_.bounding_box(dim)
    if box is None:
        return np.inf
    return float(np.linalg.norm(np.asarray(box[1]) - np.asarray(box[0])))


class SurrogateModel:
    """Strongly convex model ``x_i -> f~_i(x_i; y)`` of f around ``y`` in block ``i``.

    Attributes
    ----------
    kind : str
    block : int
    base : ndarray
        Full base point y (a private copy).
    base_block : ndarray
    modulus : float
        Strong convexity modulus.
    lip_E : float
        Lipschitz constant of the model gradient in its first argument.
    lip_B : float
        Lipschitz constant of the model gradient in the base point.
    linear : ndarray
        Block gradient of f at the base point.
    quadratic : ndarray or None
        Hessian of the model when it is a quadratic in ``x_i`` (``None`` for
        the proximal-linear model, whose Hessian is ``modulus * I``).
    """

    def __init__(self, kind, spec, i, y, beta, value, grad, modulus, lip_E, lip_B, linear, quadratic=None):
        self.kind = kind
        self.block = i
        self.base = y
        self.base_block = y[spec.partition.slices[i]]
        self.beta = float(beta)
        self.value = value
        self.grad = grad
        self.modulus = float(modulus)
        self.lip_E = float(lip_E)
        self.lip_B = float(lip_B)
        self.linear = linear
        self.quadratic = quadratic
        self._spec = spec

    def rebuild(self, y):
        """Same kind, block and beta at another base point."""
        return build_surrogate(self.kind, self._spec, self.block, y, self.beta)

    def __repr__(self):
        return f"SurrogateModel(kind={self.kind!r}, block={self.block}, c={self.modulus:.4g})"


def build_surrogate(kind, spec, i, y, beta=None):
    """Build the block-``i`` surrogate of the smooth term at ``y``.

    Parameters
    ----------
    kind : {"prox_linear", "second_order", "partial_convexity", "dc_split"}
    spec : ProblemSpec
    i : int
    y : ndarray
        Base point (full vector).
    beta : float, optional
        Proximal weight; defaults to ``0.5 * L_f``.
    """
    kind = normalize_kind(kind)
    f = spec.smooth
    L = float(f.lipschitz)
    if beta is None:
        beta = 0.5 * L
    if beta <= 0:
        raise StructuralError("beta must be positive")
    y = np.array(y, dtype=float)
    y.setflags(write=False)
    sl = spec.partition.slices[i]
    yi = y[sl]
    g = f.grad_block(y, i)
    g.setflags(write=False)
    two_b = 2.0 * beta
    ni = yi.size

    if kind == "prox_linear":
        def value(x):
            d = x - yi
            return float(g @ d + beta * (d @ d))

        def grad(x):
            return g + two_b * (x - yi)

        lip_B = max(two_b, abs(L - two_b)) if f.convex else L + two_b
        # the Hessian is 2*beta*I; left implicit to keep the hot path cheap
        return SurrogateModel(kind, spec, i, y, beta, value, grad, two_b, two_b, lip_B, g)

    if kind == "second_order":
        if not f.has_hessian:
            raise StructuralError("second-order surrogate needs a block Hessian")
        H = np.atleast_2d(np.asarray(f.hess_block(y, i), dtype=float))
        H = 0.5 * (H + H.T)
        lam = np.linalg.eigvalsh(H) if ni else np.zeros(0)
        if lam.size and lam.min() < -1e-12 * max(1.0, abs(lam).max()):
            raise StructuralError("second-order surrogate needs a positive semidefinite block Hessian")
        Hb = H + two_b * np.eye(ni)

        def value(x):
            d = x - yi
            return float(g @ d + 0.5 * d @ (Hb @ d))

        def grad(x):
            return g + Hb @ (x - yi)

        M = _hess_lipschitz(f)
        lip_E = two_b + L
        if M is None:
            lip_B = np.inf
        elif M == 0.0:
            lip_B = L + two_b
        else:
            lip_B = L + two_b + M * _diameter(spec.sets[i], ni)
        return SurrogateModel(kind, spec, i, y, beta, value, grad, two_b, lip_E, lip_B, g, quadratic=Hb)

    if kind == "partial_convexity":
        mod = two_b + f.block_modulus(i)
        if mod <= 0:
            raise StructuralError("f is not block-convex enough for a partial-convexity surrogate at this beta")
        fval, fgrad = f.restricted(y, i)

        def value(x):
            d = x - yi
            return float(fval(x) + beta * (d @ d))

        def grad(x):
            return fgrad(x) + two_b * (x - yi)

        quad = None
        if getattr(f, "kind", "") in ("quadratic", "least_squares"):
            quad = f.hess_block(y, i) + two_b * np.eye(ni)
        return SurrogateModel(kind, spec, i, y, beta, value, grad, mod, L + two_b, L + two_b, g, quadratic=quad)

    # dc_split
    if f.dc is None:
        raise StructuralError("dc-split surrogate needs a DC decomposition of f")
    plus, minus = f.dc
    mod = two_b + plus.block_modulus(i)
    if mod <= 0:
        raise StructuralError("convex part is not block-convex")
    pval, pgrad = plus.restricted(y, i)
    gm = minus.grad_block(y, i)

    def value(x):
        d = x - yi
        return float(pval(x) - gm @ d + beta * (d @ d))

    def grad(x):
        return pgrad(x) - gm + two_b * (x - yi)

    quad = None
    if getattr(plus, "kind", "") in ("quadratic", "least_squares"):
        quad = plus.hess_block(y, i) + two_b * np.eye(ni)
    return SurrogateModel(kind, spec, i, y, beta, value, grad, mod, plus.lipschitz + two_b,
                          plus.lipschitz + minus.lipschitz + two_b, g, quadratic=quad)


class ConstraintSurrogate:
    """Convex upper model ``x -> c~(x; y)`` of a constraint around ``y``.

    ``convex_set`` is a :class:`Ball` or :class:`Halfspace` equal to the
    sublevel set ``{c~ <= 0}`` when one exists, else ``None``.  ``hess`` is
    the (constant) Hessian when known.
    """

    def __init__(self, kind, block, index, base, value, grad, convex_set=None, hess=None):
        self.hess = hess
        self.kind = kind
        self.block = block
        self.index = index
        self.base = base
        self.value = value
        self.grad = grad
        self.convex_set = convex_set

    def __repr__(self):
        return f"ConstraintSurrogate(kind={self.kind!r}, block={self.block}, index={self.index})"


def build_constraint_surrogate(kind, constraint, j, y_i, block=None):
    """Convex surrogate of ``constraint`` at the block value ``y_i``.

    descent_lemma: c(y) + grad c(y)'(x - y) + (L/2)||x - y||^2.
    dc_split: c+(x) - c-(y) - grad c-(y)'(x - y).
    """
    kind = normalize_kind(kind or constraint.surrogate, CONSTRAINT_KINDS)
    y = np.array(y_i, dtype=float)
    y.setflags(write=False)
    cy = constraint.value(y)
    gy = constraint.grad(y)

    if kind == "descent_lemma":
        L = constraint.curvature
        if L is None:
            raise StructuralError("descent-lemma surrogate needs a curvature constant")
        half_L = 0.5 * L

        def value(x):
            d = x - y
            return float(cy + gy @ d + half_L * (d @ d))

        def grad(x):
            return gy + L * (x - y)

        if L > 0:
            center = y - gy / L
            r2 = (gy @ gy) / L ** 2 - 2.0 * cy / L
            cs = Ball(center, np.sqrt(r2)) if r2 >= 0 else None
        else:
            cs = Halfspace(gy, gy @ y - cy)
        return ConstraintSurrogate(kind, block, j, y, value, grad, cs, hess=L * np.eye(y.size))

    if constraint.dc is None:
        raise StructuralError("dc-split constraint surrogate needs a DC decomposition")
    (pv, pg), (mv, mg) = constraint.dc
    cm = float(mv(y))
    gm = np.asarray(mg(y), dtype=float)

    def value(x):
        return float(pv(x) - cm - gm @ (x - y))

    def grad(x):
        return np.asarray(pg(x), dtype=float) - gm

    cs = None
    hess = None
    if isinstance(constraint, QuadraticConstraint):
        Pp = constraint.P_plus
        hess = Pp
        n = y.size
        a = float(np.trace(Pp)) / n
        lin = constraint.q - gm
        const = constraint.r - cm + gm @ y
        if np.allclose(Pp, 0.0, atol=1e-14):
            cs = Halfspace(lin, -const)
        elif np.allclose(Pp, a * np.eye(n), rtol=0, atol=1e-12 * a):
            center = -lin / a
            r2 = center @ center - 2.0 * const / a
            cs = Ball(center, np.sqrt(r2)) if r2 >= 0 else None
    return ConstraintSurrogate(kind, block, j, y, value, grad, cs, hess=hess)


@dataclass
class AuditReport:
    b2_residual: float
    modulus_estimate: float
    lip_E_estimate: float
    lip_B_estimate: float
    modulus: float
    lip_E: float
    lip_B: float
    slack: float = 0.05

    @property
    def passed(self):
        return (
            self.b2_residual <= 1e-10
            and self.modulus_estimate >= self.modulus / (1.0 + self.slack)
            and self.lip_E_estimate <= self.lip_E * (1.0 + self.slack)
            and self.lip_B_estimate <= self.lip_B * (1.0 + self.slack)
        )


def _sample_block(rng, spec, i, center, radius):
    ni = spec.partition.sizes[i]
    box = spec.sets[i].bounding_box(ni)
    if box is not None and np.all(np.isfinite(box[0])) and np.all(np.isfinite(box[1])):
        z = rng.uniform(box[0], box[1])
    else:
        z = center + radius * rng.standard_normal(ni)
    return spec.sets[i].project(z)


def audit_surrogate(model, spec, samples=100, seed=0, radius=1.0):
    """Secant-based check of the declared surrogate constants.

    Samples pairs in the block set (or a ``radius`` neighbourhood of the
    base when the set is unbounded) for the modulus and ``L_E``, and pairs
    of base points differing in every block for ``L_B``.
    """
    rng = np.random.default_rng(seed)
    i = model.block
    sl = spec.partition.slices[i]
    y = np.array(model.base)
    b2 = float(np.linalg.norm(model.grad(model.base_block) - spec.smooth.grad_block(y, i)))
    c_est, le_est, lb_est = np.inf, 0.0, 0.0
    for _ in range(max(int(samples), 1)):
        a = _sample_block(rng, spec, i, y[sl], radius)
        b = _sample_block(rng, spec, i, y[sl], radius)
        d = a - b
        dd = d @ d
        if dd > 1e-20:
            gd = model.grad(a) - model.grad(b)
            c_est = min(c_est, (gd @ d) / dd)
            le_est = max(le_est, np.linalg.norm(gd) / np.sqrt(dd))
        z1 = np.concatenate([_sample_block(rng, spec, j, y[s], radius) for j, s in enumerate(spec.partition.slices)])
        z2 = np.concatenate([_sample_block(rng, spec, j, y[s], radius) for j, s in enumerate(spec.partition.slices)])
        dz = np.linalg.norm(z1 - z2)
        if dz > 1e-10:
            x = _sample_block(rng, spec, i, y[sl], radius)
            m1, m2 = model.rebuild(z1), model.rebuild(z2)
            lb_est = max(lb_est, np.linalg.norm(m1.grad(x) - m2.grad(x)) / dz)
    return AuditReport(b2, float(c_est), float(le_est), float(lb_est), model.modulus, model.lip_E, model.lip_B)
