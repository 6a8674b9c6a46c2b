"""Shared-memory asynchronous execution with real threads.

Each block lives in a slot holding an immutable ``(values, write_index,
checksum)`` tuple.  A worker takes the lock of the block it updates, reads
every other slot without locking (so the assembled view may mix versions),
solves its subproblem and publishes a new tuple.  The global iteration index
is drawn at write time.  Delays are reconstructed afterwards from the write
indices each worker saw: block ``j`` read at version ``v`` by the write with
index ``k`` gets delay ``k - u`` where ``u`` is the first later write to
``j`` (zero if ``j`` was not rewritten before ``k``), the smallest delay
consistent with the value read.
"""

import bisect
import itertools
import logging
import os
import queue
import threading
import time
import zlib

import numpy as np

from ..exceptions import InvariantViolation, StructuralError
from ..scheduler import draw_block, rng_stream
from .config import resolve_gamma, surrogate_modulus
from .simulated import _Recorder, block_update

log = logging.getLogger(__name__)


def _checksum(a):
    return zlib.crc32(np.ascontiguousarray(a).view(np.uint8))


def worker_cap(requested):
    """Worker count after applying the ASYFLEXA_THREADS cap."""
    cap = os.environ.get("ASYFLEXA_THREADS")
    if cap:
        return max(1, min(int(requested), int(cap)))
    return int(requested)


def run_threaded(spec, cfg):
    """Run ``cfg.workers`` threads on a shared iterate until ``cfg.budget`` writes.

    Returns a trace whose delay vectors are the canonical reconstructed
    delays; ``trace.extra`` holds the torn-read count, the own-block delay
    check and whether the largest delay exceeded ``cfg.delta_cap``.
    """
    W = worker_cap(cfg.workers)
    if W < 1:
        raise StructuralError("need at least one worker")
    if spec.is_ncc and not spec.feasibility(spec.x0, 1e-9).feasible:
        raise InvariantViolation("constrained runs need a feasible starting point")
    N, part = spec.N, spec.partition
    delta_est = cfg.delta_cap if cfg.delay_estimate is None else cfg.delay_estimate
    gamma = resolve_gamma(spec, cfg, delta_est)
    unit, costs = cfg.block_costs(N)
    weights = None
    if cfg.weights is not None:
        w = np.asarray(cfg.weights, dtype=float)
        weights = w / w.sum()
    owned = [a.tolist() for a in np.array_split(np.arange(N), W)]

    store = []
    for j, s in enumerate(part.slices):
        v = spec.x0[s].copy()
        v.setflags(write=False)
        store.append((v, -1, _checksum(v)))
    locks = [threading.Lock() for _ in range(N)]
    counter = itertools.count()
    stop = threading.Event()
    channel = queue.SimpleQueue()
    torn = [0] * W
    errors = []
    budget = int(cfg.budget)
    t0 = time.perf_counter_ns()

    def pick(w, rng, pending):
        if cfg.access == "partitioned":
            if not owned[w]:
                return None
            if not pending:
                pending.extend(int(b) for b in rng.permutation(owned[w]))
            return pending.pop(0)
        return draw_block(rng, N, weights)

    def work(w):
        rng = rng_stream(cfg.seed, w)
        pending = []
        view = np.empty(part.n)
        versions = np.empty(N, dtype=np.int64)
        try:
            while not stop.is_set():
                i = pick(w, rng, pending)
                if i is None:
                    return
                with locks[i]:
                    cur, cur_ver, _ = store[i]
                    for j in range(N):
                        vals, ver, chk = store[j]
                        sl = part.slices[j]
                        view[sl] = vals
                        versions[j] = ver
                        if _checksum(view[sl]) != chk:
                            torn[w] += 1
                    current = np.array(cur)
                    x_hat, new = block_update(spec, cfg, gamma, i, view.copy(), current)
                    if unit > 0 and costs[i] > 0:
                        time.sleep(unit * costs[i])
                    k = next(counter)
                    if k >= budget:
                        stop.set()
                        return
                    new.setflags(write=False)
                    store[i] = (new, k, _checksum(new))
                    wall = time.perf_counter_ns() - t0
                    channel.put((k, w, i, versions.copy(), int(cur_ver),
                                 float(np.linalg.norm(x_hat - current)), new, wall))
        except Exception as exc:  # noqa: BLE001 - any worker failure aborts the run
            errors.append(f"worker {w}: {type(exc).__name__}: {exc}")
            stop.set()

    threads = [threading.Thread(target=work, args=(w,), name=f"asyflexa-worker-{w}") for w in range(W)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    records = []
    while True:
        try:
            records.append(channel.get_nowait())
        except queue.Empty:
            break
    records.sort(key=lambda r: r[0])
    return _assemble(spec, cfg, gamma, records, torn, errors, W)


def _assemble(spec, cfg, gamma, records, torn, errors, W):
    N, part = spec.N, spec.partition
    ks = [r[0] for r in records]
    if ks != list(range(len(ks))):
        # a worker failed between drawing an index and publishing; keep the contiguous prefix
        cut = next(j for j, k in enumerate(ks) if k != j)
        records = records[:cut]
    writes = [[] for _ in range(N)]
    for r in records:
        writes[r[2]].append(r[0])
    D = np.zeros((len(records), N), dtype=np.int64)
    own_delay_violations = 0
    for row, (k, w, i, versions, cur_ver, *_rest) in enumerate(records):
        for j in range(N):
            pos = bisect.bisect_right(writes[j], versions[j])
            if pos < len(writes[j]) and writes[j][pos] < k:
                D[row, j] = k - writes[j][pos]
        if D[row, i] != 0 or versions[i] != cur_ver:
            own_delay_violations += 1
    delta = int(D.max()) if len(records) else 0
    rec = _Recorder(spec, cfg, gamma, delta, surrogate_modulus(spec, cfg))
    x = spec.x0.copy()
    for row, (k, w, i, versions, cur_ver, step_norm, new, wall) in enumerate(records):
        x[part.slices[i]] = new
        rec.add(k, w, i, D[row], step_norm, x, wall_ns=wall)
    rec.finish_metrics(x)
    status = "error" if errors else "ok"
    trace = rec.build(x, "threaded", status, "; ".join(errors))
    trace.extra.update({
        "workers": W,
        "access": cfg.access,
        "torn_reads": int(sum(torn)),
        "own_block_delay_violations": own_delay_violations,
        "delta_cap": cfg.delta_cap,
        "delay_cap_exceeded": bool(delta > cfg.delta_cap),
        "gamma_delay_estimate": cfg.delta_cap if cfg.delay_estimate is None else cfg.delay_estimate,
    })
    if delta > cfg.delta_cap:
        log.warning("observed delay %d exceeds delta_cap %d; the delay bound is unverifiable", delta, cfg.delta_cap)
    return trace
