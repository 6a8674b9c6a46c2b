"""Ring buffer of recent iterates used to compose delayed views."""

import numpy as np

from ..exceptions import StructuralError


class VersionedHistory:
    """The last ``depth`` full iterates plus per-block write counters.

    All rows start equal to ``x0``, which realizes the convention
    ``x^l = x^0`` for ``l < 0``.
    """

    def __init__(self, x0, partition, depth):
        self.partition = partition
        self.depth = int(depth)
        if self.depth < 1:
            raise StructuralError("history depth must be at least 1")
        self.buf = np.tile(np.asarray(x0, dtype=float), (self.depth, 1))
        self.k = 0
        self.versions = np.zeros(partition.N, dtype=np.int64)

    @property
    def current(self):
        return self.buf[self.k % self.depth]

    def iterate(self, l):
        """Stored iterate ``x^l`` (``l`` within the last ``depth`` indices)."""
        if l > self.k or l < self.k - self.depth + 1:
            raise StructuralError(f"iterate {l} is not in the history window")
        return self.buf[max(l, 0) % self.depth] if l >= 0 else self.buf[l % self.depth]

    def compose(self, d):
        """View whose block ``j`` equals block ``j`` of ``x^{k - d_j}``."""
        d = np.asarray(d, dtype=np.int64)
        if d.shape != (self.partition.N,):
            raise StructuralError("delay vector has the wrong length")
        lo, hi = int(d.min()), int(d.max())
        if lo < 0 or hi >= self.depth:
            raise StructuralError(f"delay {hi if hi >= self.depth else lo} is outside [0, {self.depth - 1}]")
        view = self.current.copy()
        if hi == 0:
            return view
        for j in np.flatnonzero(d):
            sl = self.partition.slices[j]
            view[sl] = self.buf[(self.k - d[j]) % self.depth, sl]
        return view

    def advance(self, i, value):
        """Append ``x^{k+1}``, equal to ``x^k`` with block ``i`` replaced."""
        nxt = self.current.copy()
        nxt[self.partition.slices[i]] = value
        self.k += 1
        self.buf[self.k % self.depth] = nxt
        self.versions[i] += 1
        return nxt
