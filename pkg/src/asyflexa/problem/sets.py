"""Closed convex block sets with Euclidean projections."""

import numpy as np

from ..exceptions import StructuralError


class WholeSpace:
    kind = "whole"

    def contains(self, x, tol=0.0):
        return bool(np.all(np.isfinite(x)))

    def project(self, v):
        return np.array(v, dtype=float)

    def bounding_box(self, dim):
        return None

    def to_dict(self):
        return {"kind": self.kind, "params": {}}


class Box:
    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise StructuralError("box with lo > hi is empty")

    def contains(self, x, tol=0.0):
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def project(self, v):
        return np.clip(v, self.lo, self.hi)

    def bounding_box(self, dim):
        return np.broadcast_to(self.lo, (dim,)).copy(), np.broadcast_to(self.hi, (dim,)).copy()

    def to_dict(self):
        return {"kind": self.kind, "params": {"lo": np.atleast_1d(self.lo).tolist() if self.lo.ndim else float(self.lo),
                                              "hi": np.atleast_1d(self.hi).tolist() if self.hi.ndim else float(self.hi)}}


class Ball:
    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius < 0:
            raise StructuralError("ball radius must be nonnegative")

    def contains(self, x, tol=0.0):
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)

    def project(self, v):
        v = np.asarray(v, dtype=float)
        d = v - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return np.array(v)
        return self.center + (self.radius / nd) * d

    def bounding_box(self, dim):
        c = np.broadcast_to(self.center, (dim,))
        return c - self.radius, c + self.radius

    def to_dict(self):
        c = self.center.tolist() if self.center.ndim else float(self.center)
        return {"kind": self.kind, "params": {"center": c, "radius": self.radius}}


class Halfspace:
    """{x : a'x <= b}."""

    kind = "halfspace"

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)
        self._aa = float(self.a @ self.a)

    def contains(self, x, tol=0.0):
        return bool(self.a @ x - self.b <= tol)

    def project(self, v):
        v = np.asarray(v, dtype=float)
        excess = self.a @ v - self.b
        if excess <= 0.0 or self._aa == 0.0:
            return np.array(v)
        return v - (excess / self._aa) * self.a

    def bounding_box(self, dim):
        return None


def dykstra(v, projections, tol=1e-14, max_iter=200000):
    """Projection onto an intersection by Dykstra's alternating scheme."""
    x = np.array(v, dtype=float)
    incs = [np.zeros_like(x) for _ in projections]
    for _ in range(max_iter):
        x_prev = x
        change = 0.0
        for j, proj in enumerate(projections):
            y = proj(x + incs[j])
            new_inc = x + incs[j] - y
            change += float(np.sum((new_inc - incs[j]) ** 2))
            incs[j] = new_inc
            x = y
        # the iterate can stall while the increments still move, so test both
        change += float(np.sum((x - x_prev) ** 2))
        if np.sqrt(change) <= tol * (1.0 + np.linalg.norm(x)):
            break
    return x


class Polyhedron:
    """Intersection of halfspaces {x : Ax <= b} ("halfspace-intersection")."""

    kind = "polyhedron"

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).ravel()
        self._halves = [Halfspace(a, bb) for a, bb in zip(self.A, self.b)]

    def contains(self, x, tol=0.0):
        return bool(np.all(self.A @ x - self.b <= tol))

    def project(self, v):
        if self.contains(v):
            return np.array(v, dtype=float)
        if len(self._halves) == 1:
            return self._halves[0].project(v)
        return dykstra(v, [h.project for h in self._halves])

    def bounding_box(self, dim):
        return None

    def to_dict(self):
        return {"kind": self.kind, "params": {"A": self.A.tolist(), "b": self.b.tolist()}}


def _project_two_balls(v, b1, b2):
    p = b1.project(v)
    if b2.contains(p, 1e-15 * (1 + b2.radius)):
        return p
    p = b2.project(v)
    if b1.contains(p, 1e-15 * (1 + b1.radius)):
        return p
    # the projection lies on both spheres: project onto their intersection rim
    diff = b2.center - b1.center
    D = np.linalg.norm(diff)
    if D == 0.0 or v.shape[0] == 1:
        return dykstra(v, [b1.project, b2.project])
    e = diff / D
    a = (D * D + b1.radius ** 2 - b2.radius ** 2) / (2.0 * D)
    rho = np.sqrt(max(b1.radius ** 2 - a * a, 0.0))
    m = b1.center + a * e
    w = (v - m) - ((v - m) @ e) * e
    nw = np.linalg.norm(w)
    if nw == 0.0:
        w = np.zeros_like(v)
        j = int(np.argmin(np.abs(e)))
        w[j] = 1.0
        w -= (w @ e) * e
        nw = np.linalg.norm(w)
    return m + (rho / nw) * w


class Intersection:
    """Intersection of convex sets; closed form for two balls, Dykstra otherwise."""

    kind = "intersection"

    def __init__(self, sets):
        self.sets = [s for s in sets if not isinstance(s, WholeSpace)]

    def contains(self, x, tol=0.0):
        return all(s.contains(x, tol) for s in self.sets)

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if not self.sets:
            return np.array(v)
        if len(self.sets) == 1:
            return self.sets[0].project(v)
        if self.contains(v):
            return np.array(v)
        if len(self.sets) == 2 and all(isinstance(s, Ball) for s in self.sets):
            return _project_two_balls(v, *self.sets)
        return dykstra(v, [s.project for s in self.sets])

    def bounding_box(self, dim):
        boxes = [s.bounding_box(dim) for s in self.sets]
        boxes = [b for b in boxes if b is not None]
        if not boxes:
            return None
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        return lo, hi


def set_from_dict(d):
    if d is None:
        return WholeSpace()
    kind = d.get("kind", "whole")
    p = d.get("params", {})
    if kind == "whole":
        return WholeSpace()
    if kind == "box":
        return Box(p["lo"], p["hi"])
    if kind == "ball":
        return Ball(p["center"], p["radius"])
    if kind in ("polyhedron", "halfspace"):
        return Polyhedron(p["A"], p["b"])
    raise StructuralError(f"unknown set kind {kind!r}")
