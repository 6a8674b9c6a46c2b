"""Private, possibly nonconvex, block constraints c(x_i) <= 0."""

import numpy as np

from ..exceptions import StructuralError

SURROGATE_TAGS = ("descent_lemma", "dc_split")


def _tag(tag):
    tag = tag.replace("-", "_")
    if tag not in SURROGATE_TAGS:
        raise StructuralError(f"unknown constraint surrogate tag {tag!r}")
    return tag


class QuadraticConstraint:
    """c(x) = 1/2 x'Px + q'x + r with symmetric (possibly indefinite) P.

    The curvature constant is ``||P||_2`` and the DC split uses the
    positive and negative parts of the eigendecomposition of P.
    """

    kind = "quadratic"

    def __init__(self, P, q, r, surrogate="descent_lemma"):
        self.P = np.atleast_2d(np.asarray(P, dtype=float))
        self.q = np.asarray(q, dtype=float).ravel()
        self.r = float(r)
        if self.P.shape != (self.q.size, self.q.size):
            raise StructuralError("P and q have incompatible shapes")
        self.P = 0.5 * (self.P + self.P.T)
        self.surrogate = _tag(surrogate)
        w, V = np.linalg.eigh(self.P)
        self.curvature = float(np.max(np.abs(w))) if w.size else 0.0
        self.P_plus = (V * np.maximum(w, 0.0)) @ V.T
        self.P_minus = (V * np.maximum(-w, 0.0)) @ V.T
        self.dc = (
            (lambda x: 0.5 * x @ self.P_plus @ x + self.q @ x + self.r, lambda x: self.P_plus @ x + self.q),
            (lambda x: 0.5 * x @ self.P_minus @ x, lambda x: self.P_minus @ x),
        )

    @classmethod
    def ring(cls, radius, center, surrogate="descent_lemma"):
        """radius^2 - ||x - center||^2 <= 0, i.e. stay outside the open ball."""
        c0 = np.atleast_1d(np.asarray(center, dtype=float))
        n = c0.size
        return cls(-2.0 * np.eye(n), 2.0 * c0, radius ** 2 - c0 @ c0, surrogate)

    @classmethod
    def ball(cls, radius, center, surrogate="descent_lemma"):
        """||x - center||^2 - radius^2 <= 0."""
        c0 = np.atleast_1d(np.asarray(center, dtype=float))
        n = c0.size
        return cls(2.0 * np.eye(n), -2.0 * c0, c0 @ c0 - radius ** 2, surrogate)

    def value(self, x):
        return float(0.5 * x @ self.P @ x + self.q @ x + self.r)

    def grad(self, x):
        return self.P @ x + self.q

    def to_dict(self):
        return {"kind": self.kind, "P": self.P.tolist(), "q": self.q.tolist(), "r": self.r,
                "surrogate": self.surrogate}


class CallableConstraint:
    """Constraint from callables.

    Parameters
    ----------
    value, grad : callable
    curvature : float, optional
        Lipschitz constant of ``grad`` (needed by the descent-lemma surrogate).
    dc : tuple, optional
        ``((plus_value, plus_grad), (minus_value, minus_grad))`` with convex parts.
    surrogate : str
    """

    kind = "callable"

    def __init__(self, value, grad, curvature=None, dc=None, surrogate="descent_lemma"):
        self._value = value
        self._grad = grad
        self.curvature = None if curvature is None else float(curvature)
        self.dc = dc
        self.surrogate = _tag(surrogate)

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)

    def to_dict(self):
        raise StructuralError("callable constraints cannot be serialized")


def constraint_from_dict(d):
    if d.get("kind") == "quadratic":
        return QuadraticConstraint(d["P"], d["q"], d["r"], d.get("surrogate", "descent_lemma"))
    if d.get("kind") == "ring":
        return QuadraticConstraint.ring(d["radius"], d["center"], d.get("surrogate", "descent_lemma"))
    if d.get("kind") == "ball":
        return QuadraticConstraint.ball(d["radius"], d["center"], d.get("surrogate", "descent_lemma"))
    raise StructuralError(f"unknown constraint kind {d.get('kind')!r}")
