"""Block partition of the decision variable."""

import numpy as np

from ..exceptions import StructuralError


class BlockPartition:
    """Split of a vector of length ``n`` into ``N`` contiguous blocks.

    Parameters
    ----------
    sizes : sequence of int
        Block dimensions, all positive.
    """

    def __init__(self, sizes):
        sizes = [int(s) for s in sizes]
        if not sizes:
            raise StructuralError("a partition needs at least one block")
        if any(s < 1 for s in sizes):
            raise StructuralError(f"block sizes must be positive, got {sizes}")
        self.sizes = tuple(sizes)
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)]))
        self.slices = tuple(slice(self.offsets[i], self.offsets[i + 1]) for i in range(len(sizes)))

    @classmethod
    def uniform(cls, n, n_blocks):
        """Nearly equal contiguous blocks (the first ``n % N`` blocks get one extra entry)."""
        if n_blocks < 1 or n_blocks > n:
            raise StructuralError(f"cannot split n={n} into {n_blocks} blocks")
        base, extra = divmod(n, n_blocks)
        return cls([base + (1 if i < extra else 0) for i in range(n_blocks)])

    @property
    def N(self):
        return len(self.sizes)

    @property
    def n(self):
        return self.offsets[-1]

    def block(self, x, i):
        """View of block ``i`` of ``x``."""
        return x[self.slices[i]]

    def owner(self):
        """Array mapping each coordinate to its block index."""
        return np.repeat(np.arange(self.N), self.sizes)

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.n:
            raise StructuralError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return x

    def split(self, x):
        return [x[s] for s in self.slices]

    def __eq__(self, other):
        return isinstance(other, BlockPartition) and self.sizes == other.sizes

    def __hash__(self):
        return hash(self.sizes)

    def __repr__(self):
        return f"BlockPartition(N={self.N}, n={self.n})"
