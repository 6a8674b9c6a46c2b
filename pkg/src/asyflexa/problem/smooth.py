"""Smooth terms f with block gradients and a global Lipschitz constant.

Every term exposes

* ``value(x)``, ``grad(x)``, ``grad_block(x, i)``
* ``lipschitz``: a constant ``L_f`` such that every block gradient is
  ``L_f``-Lipschitz in the full vector,
* ``convex``: whether f is convex,
* ``block_modulus(i)``: a lower bound on the strong convexity modulus of
  ``f(., y_{-i})`` (negative for block-nonconvex terms),
* ``hess_block(x, i)`` when a block Hessian is available,
* ``dc``: an optional ``(plus, minus)`` pair of convex terms with
  ``f = plus - minus``.
"""

import numpy as np
import scipy.sparse as sp

from ..exceptions import StructuralError
from ._matrix import as_matrix, decode_matrix, encode_matrix, spectral_norm_sym


class SmoothTerm:
    kind = "abstract"
    convex = False
    dc = None
    lipschitz = None

    def __init__(self, partition):
        self.partition = partition

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def grad_block(self, x, i):
        return self.grad(x)[self.partition.slices[i]]

    def hess_block(self, x, i):
        raise NotImplementedError(f"{type(self).__name__} has no block Hessian")

    @property
    def has_hessian(self):
        return False

    def block_modulus(self, i):
        return 0.0 if self.convex else -float(self.lipschitz)

    def restricted(self, y, i):
        """Value and gradient of ``x_i -> f(x_i, y_{-i})``."""
        sl = self.partition.slices[i]
        z = np.array(y, dtype=float)

        def value(xi):
            z[sl] = xi
            return self.value(z)

        def grad(xi):
            z[sl] = xi
            return self.grad_block(z, i)

        return value, grad

    def to_dict(self):
        raise StructuralError(f"{type(self).__name__} cannot be serialized")


class Quadratic(SmoothTerm):
    """f(x) = 1/2 x'Qx - c'x + const with symmetric Q (dense or sparse)."""

    kind = "quadratic"

    def __init__(self, Q, c, partition, const=0.0, convex=None, lipschitz=None):
        super().__init__(partition)
        self.Q = as_matrix(Q)
        self.c = np.asarray(c, dtype=float).ravel()
        self.const = float(const)
        n = partition.n
        if self.Q.shape != (n, n) or self.c.shape != (n,):
            raise StructuralError(f"quadratic data does not match n={n}")
        self.sparse = sp.issparse(self.Q)
        # row slices used by block gradients; CSR rows keep the per-row cost
        self._rows = [self.Q[s] for s in partition.slices]
        self._diag = [self._dense(self.Q[s][:, s]) for s in partition.slices]
        self.lipschitz = float(lipschitz) if lipschitz is not None else spectral_norm_sym(self.Q)
        if convex is None:
            convex = self._min_eig() >= -1e-12 * max(self.lipschitz, 1.0)
        self.convex = bool(convex)
        self._moduli = {}

    @staticmethod
    def _dense(M):
        return M.toarray() if sp.issparse(M) else np.array(M)

    def _min_eig(self):
        return float(np.linalg.eigvalsh(self._dense(self.Q)).min())

    def value(self, x):
        return float(0.5 * x @ (self.Q @ x) - self.c @ x + self.const)

    def grad(self, x):
        return np.asarray(self.Q @ x).ravel() - self.c

    def grad_block(self, x, i):
        return np.asarray(self._rows[i] @ x).ravel() - self.c[self.partition.slices[i]]

    @property
    def has_hessian(self):
        return True

    def hess_block(self, x, i):
        return self._diag[i]

    def block_modulus(self, i):
        if i not in self._moduli:
            self._moduli[i] = float(np.linalg.eigvalsh(self._diag[i]).min())
        return self._moduli[i]

    def restricted(self, y, i):
        sl = self.partition.slices[i]
        H = self._diag[i]
        yi = np.array(y[sl])
        g = self.grad_block(y, i)
        base = self.value(y)

        def value(xi):
            d = xi - yi
            return base + g @ d + 0.5 * d @ (H @ d)

        def grad(xi):
            return g + H @ (xi - yi)

        return value, grad

    def to_dict(self):
        return {
            "kind": self.kind,
            "Q": encode_matrix(self.Q),
            "c": self.c.tolist(),
            "const": self.const,
            "convex": self.convex,
            "L_f": self.lipschitz,
        }


class LeastSquares(Quadratic):
    """f(x) = scale/2 * ||Ax - b||^2, stored together with its Gram matrix."""

    kind = "least_squares"

    def __init__(self, A, b, partition, scale=1.0, lipschitz=None):
        self.A = as_matrix(A)
        self.b = np.asarray(b, dtype=float).ravel()
        self.scale = float(scale)
        if self.A.shape[0] != self.b.shape[0]:
            raise StructuralError("A and b have incompatible shapes")
        At = self.A.T
        if sp.issparse(self.A) and self.A.nnz > 0.05 * self.A.shape[0] * self.A.shape[1]:
            # mostly dense design: BLAS Gram product, kept in CSR for the cheap rows
            D = self.A.toarray()
            Q = sp.csr_matrix(self.scale * (D.T @ D))
        else:
            Q = self.scale * (At @ self.A)
            if sp.issparse(Q):
                Q = sp.csr_matrix(Q)
        c = self.scale * np.asarray(At @ self.b).ravel()
        super().__init__(Q, c, partition, const=0.5 * self.scale * float(self.b @ self.b),
                         convex=True, lipschitz=lipschitz)

    def value(self, x):
        r = np.asarray(self.A @ x).ravel() - self.b
        return float(0.5 * self.scale * (r @ r))

    def to_dict(self):
        return {
            "kind": self.kind,
            "A": encode_matrix(self.A),
            "b": self.b.tolist(),
            "scale": self.scale,
            "L_f": self.lipschitz,
        }


class LogCosh(SmoothTerm):
    """f(x) = mu * sum_j log(cosh(x_j)); convex, gradient mu*tanh(x)."""

    kind = "logcosh"
    convex = True

    def __init__(self, mu, partition):
        super().__init__(partition)
        self.mu = float(mu)
        self.lipschitz = self.mu

    def value(self, x):
        return float(self.mu * np.sum(np.logaddexp(x, -x) - np.log(2.0)))

    def grad(self, x):
        return self.mu * np.tanh(x)

    def grad_block(self, x, i):
        return self.mu * np.tanh(x[self.partition.slices[i]])

    @property
    def has_hessian(self):
        return True

    def hess_block(self, x, i):
        return np.diag(self.mu / np.cosh(x[self.partition.slices[i]]) ** 2)

    def to_dict(self):
        return {"kind": self.kind, "mu": self.mu, "L_f": self.lipschitz}


class DCSmooth(SmoothTerm):
    """Difference f = plus - minus of two convex smooth terms."""

    kind = "dc"

    def __init__(self, plus, minus, partition=None):
        super().__init__(partition if partition is not None else plus.partition)
        if not (plus.convex and minus.convex):
            raise StructuralError("both parts of a DC split must be convex")
        self.plus = plus
        self.minus = minus
        self.dc = (plus, minus)
        self.lipschitz = float(plus.lipschitz + minus.lipschitz)
        self.convex = False

    def value(self, x):
        return self.plus.value(x) - self.minus.value(x)

    def grad(self, x):
        return self.plus.grad(x) - self.minus.grad(x)

    def grad_block(self, x, i):
        return self.plus.grad_block(x, i) - self.minus.grad_block(x, i)

    @property
    def has_hessian(self):
        return self.plus.has_hessian and self.minus.has_hessian

    def hess_block(self, x, i):
        return self.plus.hess_block(x, i) - self.minus.hess_block(x, i)

    def block_modulus(self, i):
        return self.plus.block_modulus(i) - self.minus.lipschitz

    def to_dict(self):
        return {"kind": self.kind, "plus": self.plus.to_dict(), "minus": self.minus.to_dict(),
                "L_f": self.lipschitz}


class CallableSmooth(SmoothTerm):
    """Smooth term built from user callables (used for small analytic examples).

    Parameters
    ----------
    value, grad : callable
        Full-vector value and gradient.
    lipschitz : float
        Lipschitz constant of the gradient.
    hess : callable, optional
        Full Hessian ``hess(x) -> (n, n) array``.
    convex : bool
    modulus : float, optional
        Lower bound on the block strong convexity modulus.
    hess_lipschitz : float, optional
        Lipschitz constant of the Hessian on the region of interest.
    """

    kind = "callable"

    def __init__(self, value, grad, lipschitz, partition, hess=None, convex=False,
                 modulus=None, hess_lipschitz=None):
        super().__init__(partition)
        self._value = value
        self._grad = grad
        self._hess = hess
        self.lipschitz = float(lipschitz)
        self.convex = bool(convex)
        self._modulus = modulus
        self.hess_lipschitz = hess_lipschitz

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)

    @property
    def has_hessian(self):
        return self._hess is not None

    def hess_block(self, x, i):
        if self._hess is None:
            return super().hess_block(x, i)
        sl = self.partition.slices[i]
        return np.atleast_2d(np.asarray(self._hess(x), dtype=float))[sl, sl]

    def block_modulus(self, i):
        if self._modulus is not None:
            return float(self._modulus)
        return super().block_modulus(i)


def smooth_from_dict(d, partition):
    kind = d["kind"]
    L = d.get("L_f")
    if kind == "quadratic":
        return Quadratic(decode_matrix(d["Q"]), d["c"], partition, const=d.get("const", 0.0),
                         convex=d.get("convex"), lipschitz=L)
    if kind == "least_squares":
        return LeastSquares(decode_matrix(d["A"]), d["b"], partition, scale=d.get("scale", 1.0), lipschitz=L)
    if kind == "logcosh":
        return LogCosh(d["mu"], partition)
    if kind == "dc":
        return DCSmooth(smooth_from_dict(d["plus"], partition), smooth_from_dict(d["minus"], partition), partition)
    raise StructuralError(f"unknown smooth term kind {kind!r}")
