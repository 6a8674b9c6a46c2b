"""Convex block regularizers g_i with proximal operators."""

import numpy as np

from ..exceptions import StructuralError


def soft_threshold(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


class ZeroReg:
    """g = 0; prox is the identity."""

    kind = "zero"
    lam = 0.0

    def value(self, z):
        return 0.0

    def prox(self, v, t):
        return np.array(v, dtype=float)

    def lipschitz(self, dim):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind}


class L1Reg:
    """g(z) = lam * ||z||_1."""

    kind = "l1"

    def __init__(self, lam):
        if lam < 0:
            raise StructuralError("lambda must be nonnegative")
        self.lam = float(lam)

    def value(self, z):
        return self.lam * float(np.sum(np.abs(z)))

    def prox(self, v, t):
        return soft_threshold(np.asarray(v, dtype=float), t * self.lam)

    def lipschitz(self, dim):
        return self.lam * np.sqrt(dim)

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}


class GroupL2Reg:
    """g(z) = lam * ||z||_2 (block soft thresholding)."""

    kind = "group_l2"

    def __init__(self, lam):
        if lam < 0:
            raise StructuralError("lambda must be nonnegative")
        self.lam = float(lam)

    def value(self, z):
        return self.lam * float(np.linalg.norm(z))

    def prox(self, v, t):
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv <= t * self.lam:
            return np.zeros_like(v)
        return (1.0 - t * self.lam / nv) * v

    def lipschitz(self, dim):
        return self.lam

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}


def reg_from_dict(d):
    if d is None:
        return ZeroReg()
    kind = d.get("kind", "zero")
    if kind == "zero":
        return ZeroReg()
    if kind == "l1":
        return L1Reg(d["lambda"])
    if kind == "group_l2":
        return GroupL2Reg(d["lambda"])
    raise StructuralError(f"unknown regularizer kind {kind!r}")
