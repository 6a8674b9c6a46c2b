"""Simulated and threaded execution engines."""

from .config import RunConfig, resolve_gamma, surrogate_modulus
from .history import VersionedHistory
from .simulated import AsyncState, block_update, compose_delayed_view, run_simulated, step
from .threaded import run_threaded, worker_cap
from .trace import CSV_COLUMNS, Trace, read_trace

__all__ = [
    "RunConfig", "resolve_gamma", "surrogate_modulus", "VersionedHistory", "AsyncState", "step",
    "block_update", "compose_delayed_view", "run_simulated", "run_threaded", "worker_cap",
    "Trace", "read_trace", "CSV_COLUMNS",
]
