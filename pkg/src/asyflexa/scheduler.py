"""Index/delay event streams and their validation.

A scheduler is an iterator of :class:`ScheduleEvent` objects ``(k, i, d)``:
block ``i`` is updated at iteration ``k`` from the view whose block ``j``
is taken from iterate ``k - d[j]``.

Randomness uses numpy's PCG64.  Stream ``w`` of a seed is
``PCG64(SeedSequence(seed, spawn_key=(w,)))``; stream 0 drives block
selection, stream 1 drives delays, and threaded worker ``w`` uses stream
``w`` for its own block choices.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import StructuralError

SCHEDULER_KINDS = ("cyclic", "random_sequential", "random_parallel", "shared_uniform", "partitioned_shuffle")
DELAY_LAWS = ("constant", "uniform", "geometric", "cost")


def rng_stream(seed, stream=0):
    """Generator for sub-stream ``stream`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


def draw_block(rng, N, weights=None):
    """One block index, uniform or following normalized ``weights``."""
    if weights is None:
        return int(rng.integers(N))
    return int(rng.choice(N, p=weights))


@dataclass(frozen=True)
class ScheduleEvent:
    k: int
    i: int
    d: tuple

    def __post_init__(self):
        d = self.d.tolist() if isinstance(self.d, np.ndarray) else self.d
        object.__setattr__(self, "d", tuple(map(int, d)))


@dataclass
class SchedulerConfig:
    """Configuration of an event stream.

    Parameters
    ----------
    kind : str
        One of ``cyclic``, ``random_sequential``, ``random_parallel``,
        ``shared_uniform``, ``partitioned_shuffle``.
    N : int
        Number of blocks.
    delta : int
        Maximum delay.
    workers : int
        Number of cores/workers (random-parallel and partitioned kinds).
    partition : list of lists, optional
        Block indices owned by each worker; contiguous split by default.
    seed : int
    weights : sequence of float, optional
        Block-selection probabilities.
    T, p_min : declared window and frequency floor of the selection rule.
    delay_law : {"uniform", "constant", "geometric", "cost"}
    delay_param : float
        Constant delay (``constant``) or success probability (``geometric``).
    costs : sequence of float, optional
        Per-block costs for the ``cost`` law.
    """

    kind: str = "cyclic"
    N: int = 1
    delta: int = 0
    workers: int = 1
    partition: list = None
    seed: int = 0
    weights: list = None
    T: int = None
    p_min: float = None
    delay_law: str = "uniform"
    delay_param: float = None
    costs: list = None

    def __post_init__(self):
        self.kind = str(self.kind).replace("-", "_").lower()
        if self.kind not in SCHEDULER_KINDS:
            raise StructuralError(f"unknown scheduler kind {self.kind!r}")
        self.delay_law = str(self.delay_law).replace("-", "_").lower()
        if self.delay_law not in DELAY_LAWS:
            raise StructuralError(f"unknown delay law {self.delay_law!r}")
        if self.N < 1 or self.delta < 0 or self.workers < 1:
            raise StructuralError("N, workers must be >= 1 and delta >= 0")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.N,) or np.any(w < 0) or w.sum() <= 0:
                raise StructuralError("weights must be N nonnegative numbers with positive sum")
            self.weights = (w / w.sum()).tolist()
        if self.kind in ("random_parallel", "partitioned_shuffle"):
            if self.partition is None:
                self.partition = [a.tolist() for a in np.array_split(np.arange(self.N), self.workers) if a.size]
            flat = sorted(j for part in self.partition for j in part)
            if flat != list(range(self.N)):
                raise StructuralError("worker partitions must be disjoint and cover all blocks")
            self.workers = len(self.partition)
        if self.kind == "random_parallel" and self.workers - 1 > self.delta:
            raise StructuralError("random-parallel rounds need delta >= workers - 1")
        if self.T is None or self.p_min is None:
            T, p = self.default_c2()
            self.T = T if self.T is None else self.T
            self.p_min = p if self.p_min is None else self.p_min
        if self.T < 1 or not (0 < self.p_min <= 1):
            raise StructuralError("need T >= 1 and p_min in (0, 1]")

    def default_c2(self):
        """Window and floor satisfied by construction for each kind."""
        N = self.N
        if self.kind == "cyclic":
            return N, 1.0 / N
        if self.kind == "partitioned_shuffle":
            size = max(len(p) for p in self.partition)
            return N, 1.0 / (self.workers * size)
        wmin = 1.0 / N if self.weights is None else min(self.weights)
        return 1, max(wmin, 1e-300)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class Scheduler:
    """Base event source; subclasses implement ``_next(k)``."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.k = 0

    def __iter__(self):
        return self

    def __next__(self):
        ev = self._next(self.k)
        self.k += 1
        return ev

    def _next(self, k):
        raise NotImplementedError


class _DelayLaw:
    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.rng = rng
        if cfg.delay_law == "cost":
            c = np.asarray(cfg.costs if cfg.costs is not None else np.ones(cfg.N), dtype=float)
            self.scale = c / c.max()

    def draw(self, i, mask=None):
        cfg, N, dmax = self.cfg, self.cfg.N, self.cfg.delta
        if dmax == 0:
            d = np.zeros(N, dtype=int)
        elif cfg.delay_law == "uniform":
            d = self.rng.integers(0, dmax + 1, size=N)
        elif cfg.delay_law == "constant":
            c = dmax if cfg.delay_param is None else int(cfg.delay_param)
            d = np.full(N, min(c, dmax), dtype=int)
        elif cfg.delay_law == "geometric":
            p = 0.5 if cfg.delay_param is None else float(cfg.delay_param)
            d = np.minimum(self.rng.geometric(p, size=N) - 1, dmax)
        else:
            cap = int(round(dmax * self.scale[i]))
            d = self.rng.integers(0, cap + 1, size=N)
        d = np.asarray(d, dtype=int)
        if mask is not None:
            d[mask] = 0
        d[i] = 0
        return d


class CyclicScheduler(Scheduler):
    def _next(self, k):
        return ScheduleEvent(k, k % self.cfg.N, (0,) * self.cfg.N)


class RandomSequentialScheduler(Scheduler):
    def __init__(self, cfg):
        super().__init__(cfg)
        self.rng = rng_stream(cfg.seed, 0)

    def _next(self, k):
        return ScheduleEvent(k, draw_block(self.rng, self.cfg.N, self.cfg.weights), (0,) * self.cfg.N)


class RandomParallelScheduler(Scheduler):
    """Rounds of C updates all reading the round-start iterate.

    The r-th update of a round (r = 0..C-1) is performed by the core owning
    the drawn block; its own blocks are read fresh, all others with delay r.
    """

    def __init__(self, cfg):
        super().__init__(cfg)
        self.rng = rng_stream(cfg.seed, 0)
        self.owner = np.empty(cfg.N, dtype=int)
        for c, part in enumerate(cfg.partition):
            self.owner[part] = c
        self.members = [np.asarray(p, dtype=int) for p in cfg.partition]

    def _next(self, k):
        r = k % self.cfg.workers
        i = draw_block(self.rng, self.cfg.N, self.cfg.weights)
        d = np.full(self.cfg.N, r, dtype=int)
        d[self.members[self.owner[i]]] = 0
        return ScheduleEvent(k, i, d)


class SharedUniformScheduler(Scheduler):
    def __init__(self, cfg):
        super().__init__(cfg)
        self.rng = rng_stream(cfg.seed, 0)
        self.law = _DelayLaw(cfg, rng_stream(cfg.seed, 1))

    def _next(self, k):
        i = draw_block(self.rng, self.cfg.N, self.cfg.weights)
        return ScheduleEvent(k, i, self.law.draw(i))


class PartitionedShuffleScheduler(Scheduler):
    """Each worker sweeps a fresh permutation of its own blocks every epoch.

    The worker acting at each step is drawn uniformly; reads inside its own
    partition are fresh, others follow the delay law.
    """

    def __init__(self, cfg):
        super().__init__(cfg)
        self.rng = rng_stream(cfg.seed, 0)
        self.law = _DelayLaw(cfg, rng_stream(cfg.seed, 1))
        self.parts = [np.asarray(p, dtype=int) for p in cfg.partition]
        self.queues = [[] for _ in self.parts]

    def _next(self, k):
        w = int(self.rng.integers(len(self.parts)))
        if not self.queues[w]:
            self.queues[w] = list(self.rng.permutation(self.parts[w]))
        i = int(self.queues[w].pop(0))
        mask = np.zeros(self.cfg.N, dtype=bool)
        mask[self.parts[w]] = True
        return ScheduleEvent(k, i, self.law.draw(i, mask))


class ReplayScheduler(Scheduler):
    """Emits a recorded event sequence, then stops."""

    def __init__(self, events, cfg=None):
        super().__init__(cfg)
        self.events = list(events)

    def _next(self, k):
        if k >= len(self.events):
            raise StopIteration
        return self.events[k]

    def __len__(self):
        return len(self.events)


_KINDS = {
    "cyclic": CyclicScheduler,
    "random_sequential": RandomSequentialScheduler,
    "random_parallel": RandomParallelScheduler,
    "shared_uniform": SharedUniformScheduler,
    "partitioned_shuffle": PartitionedShuffleScheduler,
}


def make_scheduler(cfg):
    if isinstance(cfg, dict):
        cfg = SchedulerConfig(**cfg)
    return _KINDS[cfg.kind](cfg)


def replay(events):
    return ReplayScheduler(events)


@dataclass
class ValidationReport:
    n_events: int
    max_delay: int
    delta: int
    c1_violations: int
    c3_violations: int
    window: int
    p_min: float
    hit_rate: np.ndarray = field(repr=False)
    mean_window_frequency: np.ndarray = field(repr=False)
    slack: float = 0.0
    flagged_blocks: list = field(default_factory=list)

    @property
    def passed(self):
        return self.c1_violations == 0 and self.c3_violations == 0

    @property
    def p_min_estimate(self):
        return float(np.min(self.hit_rate))


def validate_trace(events, cfg=None, delta=None, T=None, p_min=None, N=None, sigmas=4.0):
    """Check a recorded event sequence against the delay and selection assumptions.

    Delay bound and own-block freshness are counted exactly.  The selection
    floor asks that every block be picked within any T consecutive steps with
    probability at least ``p_min``; its empirical counterpart is the fraction
    of length-T windows containing the block.  A block is flagged when that
    fraction falls below ``p_min`` by more than ``sigmas`` standard errors
    (windows overlap, so ``K / T`` is used as the sample size).
    """
    events = list(events)
    if not events:
        raise StructuralError("cannot validate an empty trace")
    N = N or (cfg.N if cfg is not None else len(events[0].d))
    delta = delta if delta is not None else (cfg.delta if cfg is not None else None)
    T = T or (cfg.T if cfg is not None else N)
    p_min = p_min if p_min is not None else (cfg.p_min if cfg is not None else 1.0 / N)
    D = np.array([e.d for e in events], dtype=int)
    I = np.array([e.i for e in events], dtype=int)
    K = len(events)
    max_delay = int(D.max())
    c1 = 0 if delta is None else int(np.sum(np.any(D > delta, axis=1)))
    c3 = int(np.sum(D[np.arange(K), I] != 0))
    onehot = np.zeros((K + 1, N))
    np.add.at(onehot, (np.arange(1, K + 1), I), 1.0)
    csum = np.cumsum(onehot, axis=0)
    W = min(T, K)
    counts = csum[W:] - csum[:-W]
    hit = np.mean(counts > 0, axis=0)
    slack = sigmas * np.sqrt(p_min * (1.0 - p_min) / max(K / W, 1.0))
    flagged = [int(j) for j in np.flatnonzero(hit < p_min - slack - 1e-12)]
    return ValidationReport(K, max_delay, -1 if delta is None else int(delta), c1, c3, W, float(p_min),
                            hit, counts.mean(axis=0) / W, float(slack), flagged)


def write_events_csv(events, path, N=None):
    events = list(events)
    N = N if N is not None else (len(events[0].d) if events else 0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "i"] + [f"d_{j + 1}" for j in range(N)])
        for e in events:
            w.writerow([e.k, e.i] + list(e.d))


def read_events_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["k", "i"]:
            raise StructuralError("not an event trace file")
        return [ScheduleEvent(int(row[0]), int(row[1]), tuple(int(v) for v in row[2:])) for row in r]
