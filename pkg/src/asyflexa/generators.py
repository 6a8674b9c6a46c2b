"""Seeded instance generators."""

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import StructuralError
from .problem import (Ball, BlockPartition, Box, DCSmooth, L1Reg, LeastSquares, LogCosh, ProblemSpec,
                      Quadratic, QuadraticConstraint, ZeroReg)

GENERATOR_KINDS = ("lasso-dense", "lasso-sparse-rows", "dc-least-squares", "ncc-ball-qp")


@dataclass
class GeneratorSpec:
    """Parameters of a generated instance.

    Parameters
    ----------
    kind : str
        ``lasso-dense``, ``lasso-sparse-rows``, ``dc-least-squares`` or ``ncc-ball-qp``.
    n, N : int
        Dimension and number of blocks.
    lam : float
        l1 weight (ignored by ``ncc-ball-qp``).
    m : int, optional
        Rows of the data matrix (default ``n``).
    sparse_fraction : float
        Fraction of blocks whose Hessian rows are nearly empty (``lasso-sparse-rows``).
    condition : float, optional
        Target condition number of ``A'A``; singular values are then spaced
        geometrically, ``m = n`` and ``b`` is a random vector of norm ``rhs_norm``.
    rhs_norm : float
        Norm of ``b`` for conditioned designs.
    mu : float
        Weight of the concave part (``dc-least-squares``).
    radius : float
        Half-width of the box (``dc-least-squares``) or outer ball radius (``ncc-ball-qp``).
    seed : int
    """

    kind: str = "lasso-dense"
    n: int = 100
    N: int = 10
    lam: float = 0.1
    m: int = None
    sparse_fraction: float = 0.0
    condition: float = None
    rhs_norm: float = 1.0
    mu: float = 0.5
    radius: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise StructuralError(f"unknown generator kind {self.kind!r}")
        if self.n < 1 or self.N < 1 or self.N > self.n:
            raise StructuralError("need 1 <= N <= n")
        if not (0.0 <= self.sparse_fraction <= 1.0):
            raise StructuralError("sparse_fraction must lie in [0, 1]")


def _design(rng, g):
    n = g.n
    if g.condition is not None:
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        V, _ = np.linalg.qr(rng.standard_normal((n, n)))
        s = np.sqrt(np.geomspace(1.0, 1.0 / g.condition, n))
        A = (U * s) @ V.T
        x_true = np.zeros(n)
        g_ = rng.standard_normal(n)
        b = g.rhs_norm * (U @ g_) / np.linalg.norm(g_)
        return A, b, x_true
    m = g.m or n
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    x_true = np.zeros(n)
    support = rng.choice(n, size=max(1, n // 10), replace=False)
    x_true[support] = rng.standard_normal(support.size)
    b = A @ x_true + 0.1 * rng.standard_normal(m)
    return A, b, x_true


def _lasso(rng, g, part):
    A, b, _ = _design(rng, g)
    cheap = []
    if g.kind == "lasso-sparse-rows" and g.sparse_fraction > 0:
        n_cheap = int(round(g.sparse_fraction * g.N))
        cheap = sorted(int(j) for j in rng.choice(g.N, size=n_cheap, replace=False))
        cols = np.concatenate([np.arange(part.offsets[j], part.offsets[j + 1]) for j in cheap]) if cheap else []
        A = A.copy()
        A[:, cols] = 0.0
        # every cheap column gets one private row, so its Hessian row holds only the diagonal
        extra = sp.csr_matrix((rng.uniform(0.5, 1.0, len(cols)), (np.arange(len(cols)), cols)),
                              shape=(len(cols), g.n))
        A = sp.vstack([sp.csr_matrix(A), extra]).tocsr()
        b = np.concatenate([b, 0.1 * rng.standard_normal(len(cols))])
    smooth = LeastSquares(A, b, part)
    spec = ProblemSpec(part, smooth, regs=[L1Reg(g.lam) for _ in range(g.N)], name=g.kind)
    if sp.issparse(smooth.Q):
        nnz = [int(smooth.Q[s].nnz) for s in part.slices]
    else:
        nnz = [int(np.count_nonzero(smooth.Q[s])) for s in part.slices]
    spec.meta = {"generator": asdict(g), "cheap_blocks": cheap, "block_nnz": nnz}
    return spec


def _dc(rng, g, part):
    A, b, _ = _design(rng, g)
    plus = LeastSquares(A, b, part)
    minus = LogCosh(g.mu, part)
    r = g.radius
    sets = [Box(-r * np.ones(n_i), r * np.ones(n_i)) for n_i in part.sizes]
    spec = ProblemSpec(part, DCSmooth(plus, minus, part), regs=[L1Reg(g.lam) for _ in range(g.N)],
                       sets=sets, name=g.kind)
    spec.meta = {"generator": asdict(g)}
    return spec


def _ncc(rng, g, part):
    n = g.n
    B = rng.standard_normal((n, n)) / np.sqrt(n)
    Q = B.T @ B + 0.1 * np.eye(n)
    c = 0.5 * rng.standard_normal(n)
    smooth = Quadratic(Q, c, part, convex=True)
    x0 = np.empty(n)
    for s in part.slices:
        u = rng.standard_normal(s.stop - s.start)
        x0[s] = 2.0 * u / np.linalg.norm(u)
    sets = [Ball(np.zeros(n_i), g.radius) for n_i in part.sizes]
    cons = [[QuadraticConstraint.ring(1.0, np.zeros(n_i))] for n_i in part.sizes]
    spec = ProblemSpec(part, smooth, regs=[ZeroReg() for _ in range(g.N)], sets=sets,
                       constraints=cons, x0=x0, name=g.kind)
    spec.meta = {"generator": asdict(g)}
    return spec


def generate(g):
    """Build the instance described by ``g`` and check it before returning."""
    if isinstance(g, dict):
        g = GeneratorSpec(**g)
    rng = np.random.default_rng(g.seed)
    part = BlockPartition.uniform(g.n, g.N)
    if g.kind in ("lasso-dense", "lasso-sparse-rows"):
        spec = _lasso(rng, g, part)
    elif g.kind == "dc-least-squares":
        spec = _dc(rng, g, part)
    else:
        spec = _ncc(rng, g, part)
    check_instance(spec, seed=g.seed)
    return spec


def gradient_check(spec, x, coords=None, h=1e-6):
    """Max relative error between the gradient and central differences on ``coords``."""
    g = spec.smooth.grad(x)
    if coords is None:
        coords = range(spec.n)
    worst = 0.0
    for j in coords:
        e = np.zeros(spec.n)
        e[j] = h * max(1.0, abs(x[j]))
        fd = (spec.smooth.value(x + e) - spec.smooth.value(x - e)) / (2 * e[j])
        worst = max(worst, abs(fd - g[j]) / max(1.0, abs(g[j]), abs(fd)))
    return worst


def check_instance(spec, seed=0, probes=3, coords=10, tol=1e-5):
    """Gradient, projection and feasibility checks run on every generated instance."""
    rng = np.random.default_rng(seed + 1)
    for _ in range(probes):
        x = rng.standard_normal(spec.n)
        x = np.concatenate([spec.sets[i].project(x[s]) for i, s in enumerate(spec.partition.slices)])
        cs = rng.choice(spec.n, size=min(coords, spec.n), replace=False)
        err = gradient_check(spec, x, cs)
        if err > tol:
            raise StructuralError(f"gradient check failed (relative error {err:.2e})")
    for i, s in enumerate(spec.partition.slices):
        v = 3.0 * rng.standard_normal(s.stop - s.start)
        p = spec.sets[i].project(v)
        if np.linalg.norm(spec.sets[i].project(p) - p) > 1e-12:
            raise StructuralError("projection is not idempotent")
    if spec.is_ncc and not spec.feasibility(spec.x0, 1e-12).feasible:
        raise StructuralError("starting point is infeasible")
    return True
