import json
import subprocess
import sys
import time

import numpy as np
import pytest

from asyflexa.cli import EXIT_CENSORED, EXIT_ERROR, EXIT_OK, build_run, main
from asyflexa.engine import read_trace
from asyflexa.metrics import max_stepsize
from asyflexa.problem import load_problem


def gen(tmp_path, name, *flags):
    path = tmp_path / f"{name}.json"
    assert main(["generate", "--out", str(path), *flags]) == EXIT_OK
    return path


def test_generate_is_byte_identical(tmp_path):
    a = gen(tmp_path, "a", "--kind", "lasso-dense", "--n", "100", "--N", "10", "--seed", "1")
    b = gen(tmp_path, "b", "--kind", "lasso-dense", "--n", "100", "--N", "10", "--seed", "1")
    assert a.read_bytes() == b.read_bytes()
    c = gen(tmp_path, "c", "--kind", "lasso-dense", "--n", "100", "--N", "10", "--seed", "2")
    assert a.read_bytes() != c.read_bytes()


def test_sparse_rows_with_zero_fraction_equals_dense(tmp_path):
    a = load_problem(gen(tmp_path, "a", "--kind", "lasso-dense", "--n", "60", "--N", "6", "--seed", "3"))
    b = load_problem(gen(tmp_path, "b", "--kind", "lasso-sparse-rows", "--n", "60", "--N", "6", "--seed", "3",
                         "--sparse-fraction", "0"))
    x = np.random.default_rng(0).standard_normal(60)
    assert a.objective(x) == b.objective(x)
    assert np.array_equal(a.smooth.grad(x), b.smooth.grad(x))


def test_sparse_rows_have_cheap_blocks(tmp_path):
    spec = load_problem(gen(tmp_path, "s", "--kind", "lasso-sparse-rows", "--n", "60", "--N", "6", "--seed", "3",
                            "--sparse-fraction", "0.5"))
    nnz = [spec.smooth.Q[s].nnz for s in spec.partition.slices]
    cheap = sorted(nnz)[:3]
    assert max(cheap) <= 10 and min(nnz) * 10 < max(nnz)


def test_ncc_start_is_feasible(tmp_path):
    spec = load_problem(gen(tmp_path, "n", "--kind", "ncc-ball-qp", "--n", "20", "--N", "10", "--seed", "4"))
    assert spec.feasibility(spec.x0, 1e-12).feasible
    for s in spec.partition.slices:
        assert np.linalg.norm(spec.x0[s]) == pytest.approx(2.0, rel=1e-14)


def test_generate_rejects_bad_parameters(tmp_path, capsys):
    assert main(["generate", "--out", str(tmp_path / "x.json"), "--n", "5", "--N", "9"]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_sim_run_is_byte_identical(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    args = ["run", "--problem", str(prob), "--scheduler", "shared-uniform", "--delta", "3", "--budget", "300",
            "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "r1")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "r2")]) == EXIT_OK
    for ext in ("trace.csv", "events.csv"):
        assert (tmp_path / f"r1.{ext}").read_bytes() == (tmp_path / f"r2.{ext}").read_bytes()


def test_auto_gamma_recorded(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    assert main(["run", "--problem", str(prob), "--scheduler", "shared-uniform", "--delta", "4", "--budget", "10",
                 "--out", str(tmp_path / "r")]) == EXIT_OK
    summ = json.loads((tmp_path / "r.summary.json").read_text())
    assert summ["gamma"] == pytest.approx(0.9 * max_stepsize(summ["c"], summ["L_f"], 4), rel=1e-15)


def test_threaded_single_worker_has_no_delays(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    assert main(["run", "--problem", str(prob), "--engine", "threaded", "--workers", "1", "--budget", "100",
                 "--gamma", "0.5", "--delay-estimate", "0", "--out", str(tmp_path / "t")]) == EXIT_OK
    summ = json.loads((tmp_path / "t.summary.json").read_text())
    assert summ["delays"] == {"mean": 0.0, "max": 0}
    assert summ["torn_reads"] == 0


def test_config_file_and_flag_override(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    cfg = {"problem": str(prob), "engine": "sim", "budget": 50, "gamma": 0.2,
           "scheduler": {"kind": "random-parallel", "delta": 3, "workers": 2}, "out": str(tmp_path / "c")}
    cpath = tmp_path / "run.json"
    cpath.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cpath), "--budget", "30"]) == EXIT_OK
    tr = read_trace(tmp_path / "c")
    assert len(tr) == 30 and tr.gamma == 0.2
    _, engine, out, rc = build_run(cfg, n_blocks=8)
    assert engine == "sim" and rc.scheduler.kind == "random_parallel" and rc.scheduler.N == 8


def test_exit_codes(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    base = ["run", "--problem", str(prob), "--out", str(tmp_path / "e")]
    assert main(base + ["--budget", "5", "--target-stationarity", "1e-12"]) == EXIT_CENSORED
    assert main(base + ["--budget", "5000", "--target-stationarity", "1e-2", "--metric-cadence", "8"]) == EXIT_OK
    assert main(base + ["--gamma", "3"]) == EXIT_ERROR
    assert main(["run", "--problem", str(tmp_path / "missing.json")]) == EXIT_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"problem": str(prob), "no_such_key": 1}))
    assert main(["run", "--config", str(bad)]) == EXIT_ERROR


def test_analyze_reports(tmp_path, capsys):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    prefixes = []
    for seed in range(3):
        pre = str(tmp_path / f"s{seed}")
        main(["run", "--problem", str(prob), "--scheduler", "shared-uniform", "--delta", "2", "--budget", "3000",
              "--seed", str(seed), "--metric-cadence", "8", "--out", pre])
        prefixes.append(pre)
    main(["run", "--problem", str(prob), "--budget", "40", "--out", str(tmp_path / "cyc")])
    capsys.readouterr()

    assert main(["analyze", "descent", prefixes[0], "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "violations: 0" in capsys.readouterr().out
    rep = json.loads((tmp_path / "a.descent.json").read_text())
    assert rep["rows"][0]["violations"] == 0

    assert main(["analyze", "delays", str(tmp_path / "cyc"), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "max delay 0" in capsys.readouterr().out

    assert main(["analyze", "kepsilon", *prefixes, "--eps", "1e-1", "1e-2", "1e-3",
                 "--out", str(tmp_path / "a")]) == EXIT_OK
    rows = json.loads((tmp_path / "a.kepsilon.json").read_text())["rows"]
    Ks = [r["K"] for r in rows]
    assert None not in Ks and Ks == sorted(Ks)
    assert (tmp_path / "a.kepsilon.csv").read_text().startswith("eps,K,censored,bound")


def test_analyze_rejects_non_trace(tmp_path):
    (tmp_path / "x.summary.json").write_text("{}")
    (tmp_path / "x.trace.csv").write_text("a,b\n")
    (tmp_path / "x.events.csv").write_text("k,i\n")
    assert main(["analyze", "descent", str(tmp_path / "x")]) == EXIT_ERROR


def test_oracle_subcommand(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "20", "--N", "4", "--seed", "2")
    assert main(["oracle", "--problem", str(prob), "--tol", "1e-9", "--out", str(tmp_path / "o.json")]) == EXIT_OK
    res = json.loads((tmp_path / "o.json").read_text())
    assert res["tolerance"] <= 1e-9 and not res["censored"]
    assert main(["oracle", "--problem", str(prob), "--tol", "1e-15", "--max-sweeps", "2",
                 "--out", str(tmp_path / "o2.json")]) == EXIT_CENSORED


@pytest.mark.parametrize("kind, extra", [
    ("lasso-dense", []),
    ("lasso-sparse-rows", ["--sparse-fraction", "0.3"]),
    ("dc-least-squares", []),
    ("ncc-ball-qp", []),
])
def test_round_trip_all_kinds(tmp_path, kind, extra):
    t0 = time.perf_counter()
    n, N = (2000, 100) if kind.startswith("lasso") else (200, 20)
    prob = gen(tmp_path, "p", "--kind", kind, "--n", str(n), "--N", str(N), "--seed", "1", *extra)
    code = main(["run", "--problem", str(prob), "--scheduler", "shared-uniform", "--delta", "2", "--budget", "400",
                 "--metric-cadence", "100", "--out", str(tmp_path / "r")])
    assert code == EXIT_OK
    assert main(["analyze", "descent", str(tmp_path / "r"), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["analyze", "delays", str(tmp_path / "r"), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert json.loads((tmp_path / "a.descent.json").read_text())["rows"][0]["violations"] == 0
    assert time.perf_counter() - t0 < 60


def test_console_entry_point_and_thread_cap(tmp_path):
    prob = gen(tmp_path, "p", "--kind", "lasso-dense", "--n", "40", "--N", "8", "--seed", "2")
    env = {"ASYFLEXA_THREADS": "1", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "asyflexa", "run", "--problem", str(prob), "--engine", "threaded",
                           "--workers", "4", "--budget", "50", "--gamma", "0.3", "--delay-estimate", "3",
                           "--out", str(tmp_path / "t")], env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    summ = json.loads((tmp_path / "t.summary.json").read_text())
    assert summ["workers"] == 1
    proc = subprocess.run([sys.executable, "-m", "asyflexa", "run", "--problem", str(tmp_path / "nope.json")],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 1
