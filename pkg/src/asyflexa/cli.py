"""Command-line front end: ``asyflexa generate | run | analyze | oracle``."""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields

import numpy as np

from .engine import RunConfig, read_trace, run_simulated, run_threaded
from .exceptions import ConvergenceError, DomainError, InvariantViolation, StructuralError
from .generators import GeneratorSpec, generate
from .metrics import (TheoryConstants, check_lyapunov_descent, delay_stats, k_epsilon, speedup_report)
from .oracle import reference_solve
from .problem import load_problem, save_problem

log = logging.getLogger("asyflexa")

EXIT_OK, EXIT_ERROR, EXIT_CENSORED = 0, 1, 2


def _load_json(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _explicit(args, names):
    """Flags given on the command line (parsers use ``None`` defaults)."""
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return None if np.isnan(o) else float(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# -- generate -----------------------------------------------------------------

GEN_KEYS = ("kind", "n", "N", "lam", "m", "sparse_fraction", "condition", "rhs_norm", "mu", "radius", "seed")


def cmd_generate(args):
    params = _load_json(args.config)
    params.update(_explicit(args, GEN_KEYS))
    g = GeneratorSpec(**params)
    spec = generate(g)
    save_problem(spec, args.out)
    log.info("wrote %s (kind=%s, n=%d, N=%d, seed=%d)", args.out, g.kind, g.n, g.N, g.seed)
    return EXIT_OK


# -- run ----------------------------------------------------------------------

RUN_KEYS = [f.name for f in fields(RunConfig) if f.name not in ("scheduler", "extra", "cost_model", "weights")]
SCHED_KEYS = ("kind", "delta", "workers", "T", "p_min", "delay_law", "delay_param")


def build_run(config, args=None, n_blocks=None):
    """Merge a config dict with explicit flags into (problem path, engine, out prefix, RunConfig).

    ``n_blocks`` fills the scheduler's block count when the config omits it.
    """
    cfg = dict(config)
    problem = cfg.pop("problem", None)
    engine = cfg.pop("engine", "sim")
    out = cfg.pop("out", None)
    sched = dict(cfg.pop("scheduler", None) or {})
    if args is not None:
        problem = args.problem or problem
        engine = args.engine or engine
        out = args.out or out
        cfg.update(_explicit(args, RUN_KEYS))
        for key in SCHED_KEYS:
            v = getattr(args, f"sched_{key}", None)
            if v is not None:
                sched[key] = v
    if problem is None:
        raise StructuralError("no problem file given")
    if engine not in ("sim", "threaded"):
        raise StructuralError("engine must be 'sim' or 'threaded'")
    unknown = set(cfg) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise StructuralError(f"unknown run config keys: {sorted(unknown)}")
    if engine == "sim":
        sched.setdefault("kind", "cyclic")
        sched.setdefault("seed", cfg.get("seed", 0))
        if n_blocks is not None:
            sched.setdefault("N", n_blocks)
        cfg["scheduler"] = sched
    return problem, engine, out or "run", RunConfig(**cfg)


def cmd_run(args):
    config = _load_json(args.config)
    problem = args.problem or config.get("problem")
    if problem is None:
        raise StructuralError("no problem file given")
    spec = load_problem(problem)
    problem, engine, out, cfg = build_run(config, args, n_blocks=spec.N)
    if engine == "sim":
        if cfg.scheduler.N != spec.N:
            raise StructuralError(f"scheduler has {cfg.scheduler.N} blocks, problem has {spec.N}")
        trace = run_simulated(spec, cfg)
    else:
        trace = run_threaded(spec, cfg)
    trace.extra["seed"] = cfg.seed
    trace.extra["problem"] = os.path.abspath(problem)
    trace.write(out)
    log.info("run finished: status=%s, iterations=%d, ||M_F||=%.3e", trace.status, len(trace),
             trace.final_stationarity())
    if trace.status == "error":
        log.error("%s", trace.message)
        return EXIT_ERROR
    if trace.status == "censored":
        return EXIT_CENSORED
    return EXIT_OK


# -- analyze ------------------------------------------------------------------

def _theory_from_trace(trace, args):
    L = trace.lipschitz
    return TheoryConstants(c=trace.modulus, L_f=L, L_B=args.L_B if args.L_B is not None else L,
                           L_E=args.L_E if args.L_E is not None else L, delta=trace.delta,
                           T=args.T or int(trace.extra.get("N", 1)), p_min=args.p_min or 1.0 / max(1, int(trace.extra.get("N", 1))),
                           gamma=trace.gamma, N=int(trace.extra.get("N", 1)))


def _write_rows_csv(path, rows):
    if not rows:
        open(path, "w").close()
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def cmd_analyze(args):
    traces = [read_trace(p) for p in args.traces]
    out = args.out or "analysis"
    report = {"what": args.what, "traces": list(args.traces)}
    rows = []
    if args.what == "descent":
        for p, t in zip(args.traces, traces):
            rep = check_lyapunov_descent(t, tol=args.tol)
            rows.append({"trace": p, "steps": len(t), "violations": rep.violations,
                         "min_slack": rep.min_slack, "tol": rep.tol})
            print(f"{p}: violations: {rep.violations}")
        report["rows"] = rows
    elif args.what == "delays":
        for p, t in zip(args.traces, traces):
            rep = delay_stats(t, T=args.T)
            d = rep.to_dict()
            rows.append({"trace": p, "mean_delay": d["mean_delay"], "max_delay": d["max_delay"], "C": d["C"]})
            report.setdefault("blocks", {})[p] = d
            print(f"{p}: max delay {rep.max_delay}, mean delay {rep.mean_delay:.4g}, C = {rep.C}")
        report["rows"] = rows
    elif args.what == "kepsilon":
        eps = args.eps or [1e-1, 1e-2, 1e-3]
        tc = gap = None
        if args.gap is not None:
            tc = _theory_from_trace(traces[0], args)
            gap = args.gap
        tab = k_epsilon(traces, eps, tc=tc, gap=gap)
        rows = tab.rows()
        report["rows"] = rows
        report["slope"] = None if np.isnan(tab.slope) else tab.slope
        for r in rows:
            print(f"eps={r['eps']:.0e}  K={r['K']}  bound={r['bound']}")
        print(f"slope: {report['slope']}")
    elif args.what == "speedup":
        by_w = {}
        for t in traces:
            by_w[int(t.extra.get("workers", 1))] = t
        table = speedup_report(by_w, args.target)
        rows = [asdict(r) for r in table]
        report["rows"] = rows
        for r in rows:
            print(f"workers={r['workers']}  time={r['time_s']:.4g}s  speedup={r['speedup']:.3g}  "
                  f"efficiency={r['efficiency']:.3g}{'  censored' if r['censored'] else ''}")
    _write_json(f"{out}.{args.what}.json", report)
    _write_rows_csv(f"{out}.{args.what}.csv", rows)
    return EXIT_OK


# -- oracle -------------------------------------------------------------------

def cmd_oracle(args):
    spec = load_problem(args.problem)
    res = reference_solve(spec, tol=args.tol, gamma=args.gamma, beta=args.beta, max_sweeps=args.max_sweeps)
    out = args.out or "oracle.json"
    _write_json(out, {"x": res.x, "value": res.value, "method": res.method, "tolerance": res.tolerance,
                      "iterations": res.iterations, "censored": res.censored})
    log.info("oracle: F=%.17g, residual=%.3e, sweeps=%d", res.value, res.tolerance, res.iterations)
    return EXIT_CENSORED if res.censored else EXIT_OK


# -- parser -------------------------------------------------------------------

def _float_or_auto(s):
    return s if s == "auto" else float(s)


def build_parser():
    p = argparse.ArgumentParser(prog="asyflexa", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded problem instance")
    g.add_argument("--config", help="JSON file with generator parameters")
    g.add_argument("--kind", choices=["lasso-dense", "lasso-sparse-rows", "dc-least-squares", "ncc-ball-qp"])
    g.add_argument("--n", type=int)
    g.add_argument("--N", "--blocks", dest="N", type=int)
    g.add_argument("--lam", type=float)
    g.add_argument("--m", type=int)
    g.add_argument("--sparse-fraction", dest="sparse_fraction", type=float)
    g.add_argument("--condition", type=float)
    g.add_argument("--rhs-norm", dest="rhs_norm", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--radius", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run the solver and write trace files")
    r.add_argument("--config", help="JSON run config")
    r.add_argument("--problem")
    r.add_argument("--engine", choices=["sim", "threaded"])
    r.add_argument("--out", help="output prefix")
    r.add_argument("--gamma", type=_float_or_auto)
    r.add_argument("--surrogate")
    r.add_argument("--beta", type=float)
    r.add_argument("--budget", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--target-stationarity", dest="target_stationarity", type=float)
    r.add_argument("--metric-cadence", dest="metric_cadence", type=int)
    r.add_argument("--objective-cadence", dest="objective_cadence", type=int)
    r.add_argument("--inner-tol", dest="inner_tol", type=float)
    r.add_argument("--inner-max-iters", dest="inner_max_iters", type=int)
    r.add_argument("--barrier-mu0", dest="barrier_mu0", type=float)
    r.add_argument("--constraint-surrogate", dest="constraint_surrogate")
    r.add_argument("--workers", type=int)
    r.add_argument("--access", choices=["shared", "partitioned"])
    r.add_argument("--delta-cap", dest="delta_cap", type=int)
    r.add_argument("--delay-estimate", dest="delay_estimate", type=int)
    r.add_argument("--scheduler", dest="sched_kind",
                   choices=["cyclic", "random-sequential", "random-parallel", "shared-uniform", "partitioned-shuffle"])
    r.add_argument("--delta", dest="sched_delta", type=int)
    r.add_argument("--sched-workers", dest="sched_workers", type=int)
    r.add_argument("--T", dest="sched_T", type=int)
    r.add_argument("--p-min", dest="sched_p_min", type=float)
    r.add_argument("--delay-law", dest="sched_delay_law")
    r.add_argument("--delay-param", dest="sched_delay_param", type=float)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="reports from trace files")
    a.add_argument("what", choices=["descent", "delays", "kepsilon", "speedup"])
    a.add_argument("traces", nargs="+", help="trace prefixes")
    a.add_argument("--out", help="report prefix")
    a.add_argument("--tol", type=float)
    a.add_argument("--T", type=int)
    a.add_argument("--p-min", dest="p_min", type=float)
    a.add_argument("--L-B", dest="L_B", type=float)
    a.add_argument("--L-E", dest="L_E", type=float)
    a.add_argument("--eps", type=float, nargs="+")
    a.add_argument("--gap", type=float, help="F(x0) - F*, enables the worst-case bound column")
    a.add_argument("--target", type=float, default=1e-3)
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("oracle", help="high-accuracy synchronous reference solve")
    o.add_argument("--problem", required=True)
    o.add_argument("--tol", type=float, default=1e-8)
    o.add_argument("--gamma", type=float)
    o.add_argument("--beta", type=float)
    o.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=100000)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StructuralError, DomainError, InvariantViolation, ConvergenceError, OSError, ValueError) as exc:
        print(f"asyflexa: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
