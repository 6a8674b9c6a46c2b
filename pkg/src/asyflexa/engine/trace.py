"""Per-step run records and their file formats."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import StructuralError
from ..scheduler import ScheduleEvent, read_events_csv, write_events_csv

CSV_COLUMNS = ["k", "worker", "i", "d_min", "d_max", "step_norm", "F", "Ftilde", "MF", "wall_ns"]


def _fmt(v):
    return repr(int(v)) if isinstance(v, (int, np.integer)) else format(float(v), ".17g")


@dataclass
class Trace:
    """Record of a run.

    Row ``k`` describes the update that produced ``x^{k+1}``: the worker,
    block ``i``, delay vector ``D[k]``, ``step_norm = ||xhat - x_i^k||``,
    and ``F``, ``Ftilde``, ``MF`` evaluated at ``x^{k+1}`` (NaN between
    cadence points).  ``F0`` and ``MF0`` refer to ``x^0``.
    """

    k: np.ndarray
    worker: np.ndarray
    i: np.ndarray
    D: np.ndarray
    step_norm: np.ndarray
    F: np.ndarray
    Ftilde: np.ndarray
    MF: np.ndarray
    wall_ns: np.ndarray
    x0: np.ndarray
    x: np.ndarray
    F0: float
    MF0: float
    gamma: float
    modulus: float
    lipschitz: float
    delta: int
    engine: str = "sim"
    status: str = "ok"
    message: str = ""
    feas_violation: np.ndarray = None
    iterates: list = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.k.size)

    def events(self):
        return [ScheduleEvent(int(k), int(i), tuple(int(v) for v in d)) for k, i, d in zip(self.k, self.i, self.D)]

    def mf_iterations(self):
        """Iteration counts and ||M_F|| values where stationarity was evaluated."""
        mask = ~np.isnan(self.MF)
        its = np.concatenate([[0], self.k[mask] + 1])
        vals = np.concatenate([[self.MF0], self.MF[mask]])
        return its, vals

    def final_stationarity(self):
        its, vals = self.mf_iterations()
        return float(vals[-1])

    def summary(self):
        out = {
            "engine": self.engine,
            "status": self.status,
            "message": self.message,
            "iterations": len(self),
            "gamma": self.gamma,
            "c": self.modulus,
            "L_f": self.lipschitz,
            "delta": self.delta,
            "F0": self.F0,
            "MF0": self.MF0,
            "F_final": float(self.F[-1]) if len(self) and not np.isnan(self.F[-1]) else None,
            "MF_final": self.final_stationarity(),
            "x_final": self.x.tolist(),
        }
        if len(self):
            dd = self.D
            out["delays"] = {"mean": float(dd.mean()), "max": int(dd.max())}
        if self.feas_violation is not None and self.feas_violation.size:
            out["max_feasibility_violation"] = float(np.max(self.feas_violation))
        out.update(self.extra)
        return out

    def to_csv(self, path):
        N = self.D.shape[1] if self.D.ndim == 2 else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in range(len(self)):
                d = self.D[r]
                others = np.delete(d, self.i[r]) if N > 1 else d
                w.writerow([
                    _fmt(self.k[r]), _fmt(self.worker[r]), _fmt(self.i[r]),
                    _fmt(int(others.min())), _fmt(int(others.max())),
                    _fmt(self.step_norm[r]), _fmt(self.F[r]), _fmt(self.Ftilde[r]), _fmt(self.MF[r]),
                    _fmt(self.wall_ns[r]),
                ])

    def write(self, prefix):
        """Write ``prefix.trace.csv``, ``prefix.events.csv`` and ``prefix.summary.json``."""
        self.to_csv(f"{prefix}.trace.csv")
        write_events_csv(self.events(), f"{prefix}.events.csv", N=self.D.shape[1] if self.D.ndim == 2 else 0)
        summ = self.summary()
        summ["x0"] = self.x0.tolist()
        with open(f"{prefix}.summary.json", "w") as fh:
            json.dump(summ, fh, indent=1)
        return [f"{prefix}.trace.csv", f"{prefix}.events.csv", f"{prefix}.summary.json"]


def read_trace(prefix):
    """Load a trace written by :meth:`Trace.write`."""
    with open(f"{prefix}.summary.json") as fh:
        summ = json.load(fh)
    rows = []
    with open(f"{prefix}.trace.csv", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CSV_COLUMNS:
            raise StructuralError(f"{prefix}.trace.csv does not have the trace columns")
        rows = [row for row in r]
    events = read_events_csv(f"{prefix}.events.csv")
    if len(events) != len(rows):
        raise StructuralError("trace and event files disagree in length")
    col = {name: j for j, name in enumerate(CSV_COLUMNS)}

    def column(name, dtype):
        return np.array([dtype(row[col[name]]) for row in rows], dtype=dtype)

    x0 = np.asarray(summ["x0"], dtype=float)
    D = np.array([e.d for e in events], dtype=int).reshape(len(events), -1)
    return Trace(
        k=column("k", int), worker=column("worker", int), i=column("i", int), D=D,
        step_norm=column("step_norm", float), F=column("F", float), Ftilde=column("Ftilde", float),
        MF=column("MF", float), wall_ns=column("wall_ns", int), x0=x0,
        x=np.asarray(summ["x_final"], dtype=float), F0=summ["F0"], MF0=summ["MF0"], gamma=summ["gamma"],
        modulus=summ["c"], lipschitz=summ["L_f"], delta=summ["delta"], engine=summ.get("engine", "sim"),
        status=summ.get("status", "ok"), message=summ.get("message", ""),
    )
