import csv
import json
import math

import numpy as np
import pytest

from adanewton import load_csv, load_libsvm
from adanewton.cli import main
from adanewton.harness import (
    OUTPUT_ENV,
    TRACE_HEADER,
    ConfigError,
    ExperimentConfig,
    parse_override,
    passes_to_target,
    read_trace,
    run_experiment,
    summarize,
)

SMALL = dict(
    synth_n=3000, synth_p=5, synth_seed=0, synth_separation=2.0, normalize=True,
    ada_m0=30, ada_warmup_steps=10, budget_passes=6.0, record_time=False,
)


def small_config(tmp_path, **kw):
    return ExperimentConfig(**{**SMALL, "output_dir": str(tmp_path), **kw})


def write_toml(path, text):
    path.write_text(text)
    return path


def test_config_file_and_overrides(tmp_path):
    cfg_path = write_toml(tmp_path / "e.toml", 'c = 50.0\nsolvers = ["newton"]\nsynth_n = 500\n')
    cfg = ExperimentConfig.from_file(cfg_path, dict([parse_override("c=7"), parse_override("policy=inverse_sqrt_n")]))
    assert cfg.c == 7
    assert cfg.policy == "inverse_sqrt_n"
    assert cfg.solvers == ("newton",)
    assert cfg.synth_n == 500


@pytest.mark.parametrize("item,expected", [
    ("budget_passes=2.5", ("budget_passes", 2.5)),
    ("normalize=true", ("normalize", True)),
    ('solvers=["sgd","saga"]', ("solvers", ["sgd", "saga"])),
    ("dataset=data/a9a.txt", ("dataset", "data/a9a.txt")),
])
def test_parse_override(item, expected):
    assert parse_override(item) == expected


def test_parse_override_requires_equals():
    with pytest.raises(ConfigError):
        parse_override("c")


@pytest.mark.parametrize("text", [
    "bogus = 1\n",
    "[ada]\nalpha0 = 2.0\n",
    "solvers = []\n",
    'solvers = ["lbfgs"]\n',
    "ada_beta = 1.5\n",
    "c = -1.0\n",
    "lipschitz_M = 0.0\n",
    "not toml at all ===\n",
])
def test_bad_configs_are_rejected(tmp_path, text):
    path = write_toml(tmp_path / "bad.toml", text)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(path)


def test_output_dir_env_override(tmp_path, monkeypatch):
    cfg = small_config(tmp_path / "from_config")
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "from_env"))
    assert cfg.resolved_output_dir() == tmp_path / "from_env"


def test_run_writes_schema_and_summary(tmp_path):
    result = run_experiment(small_config(tmp_path))
    assert result.exit_code == 0
    assert set(result.traces) == {"ada_newton", "newton", "saga", "sgd"}
    for name, path in result.traces.items():
        with open(path) as fh:
            assert fh.readline().strip() == ",".join(TRACE_HEADER)
        rows = read_trace(path)
        assert rows and all(r["solver"] == name for r in rows)
        passes = [r["passes"] for r in rows]
        assert passes == sorted(passes)
        assert all(r["subopt"] >= -1e-12 for r in rows)
    meta = json.loads((tmp_path / "meta.json").read_text())
    ada_final = read_trace(result.traces["ada_newton"])[-1]
    assert ada_final["n"] == 3000
    assert 0 <= ada_final["subopt"] <= meta["V_N"]
    with open(tmp_path / "summary.csv") as fh:
        summary = list(csv.DictReader(fh))
    assert len(summary) == 12


def test_identical_reference_across_solvers(tmp_path):
    result = run_experiment(small_config(tmp_path))
    assert len(list(tmp_path.glob("reference_*.npz"))) == 1
    meta = json.loads((tmp_path / "meta.json").read_text())
    # every final suboptimality is measured against the same R_N*, so none goes below it
    finals = [read_trace(p)[-1]["subopt"] for p in result.traces.values()]
    assert min(finals) >= -1e-12
    assert meta["reference_value"] > 0


def test_runs_are_byte_identical(tmp_path):
    a = run_experiment(small_config(tmp_path / "a"))
    b = run_experiment(small_config(tmp_path / "b"))
    for name in a.traces:
        assert a.traces[name].read_bytes() == b.traces[name].read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_half_pass_budget_emits_rows_and_misses_targets(tmp_path):
    result = run_experiment(small_config(tmp_path, budget_passes=0.5))
    assert result.exit_code == 0
    for path in result.traces.values():
        assert len(read_trace(path)) >= 1
    first_target = [r for r in result.summary if r["target"] == "1/N"]
    assert len(first_target) == 4
    assert all(math.isinf(r["passes_to_target"]) for r in first_target)
    assert "∞" in (tmp_path / "summary.csv").read_text(encoding="utf-8")


def test_solver_abort_is_recorded(tmp_path):
    cfg = small_config(tmp_path, solvers=("sgd", "newton"), sgd_stepsize=1e8, loss="quadratic")
    result = run_experiment(cfg)
    assert result.status["sgd"].startswith("aborted")
    assert result.status["newton"] == "converged"
    assert result.exit_code == 1
    table = summarize(tmp_path)
    assert {r["status"] for r in table if r["solver"] == "sgd"} == {result.status["sgd"]}


def _rows(subopts, passes):
    return [{"subopt": s, "passes": p, "elapsed_s": 10 * p} for s, p in zip(subopts, passes)]


def test_passes_to_target_exact_row():
    assert passes_to_target(_rows([1.0, 0.5, 0.1], [0, 1, 2]), 0.5) == 1


def test_passes_to_target_interpolates():
    rows = _rows([1.0, 0.2], [2.0, 4.0])
    assert passes_to_target(rows, 0.6) == pytest.approx(3.0)
    assert passes_to_target(rows, 0.6, "elapsed_s") == pytest.approx(30.0)


def test_passes_to_target_unreached_and_initial():
    rows = _rows([1.0, 0.9], [0, 1])
    assert passes_to_target(rows, 0.1) == math.inf
    assert passes_to_target(rows, 2.0) == 0


def test_summary_matches_recomputation_from_csv(tmp_path):
    run_experiment(small_config(tmp_path))
    table = summarize(tmp_path)
    N = SMALL["synth_n"]
    with open(tmp_path / "trace_newton.csv") as fh:
        raw = [(float(r["passes"]), float(r["subopt"])) for r in csv.DictReader(fh)]
    target = 1.0 / N
    k = next(i for i, (_, s) in enumerate(raw) if s <= target)
    (p0, s0), (p1, s1) = raw[k - 1], raw[k]
    expected = p0 + (s0 - target) / (s0 - s1) * (p1 - p0)
    got = next(r for r in table if r["solver"] == "newton" and r["target"] == "1/N")
    assert got["passes_to_target"] == pytest.approx(expected, rel=1e-12)


def test_summarize_reports_corrupt_file(tmp_path):
    run_experiment(small_config(tmp_path, solvers=("newton",)))
    (tmp_path / "trace_broken.csv").write_text("what,is,this\n1,2,3\n")
    table = summarize(tmp_path)
    broken = [r for r in table if r["solver"] == "broken"]
    assert broken and broken[0]["status"].startswith("corrupt")
    assert all(math.isinf(r["passes_to_target"]) for r in broken)


def test_summarize_needs_N(tmp_path):
    with pytest.raises(ValueError):
        summarize(tmp_path)


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg_path = write_toml(tmp_path / "e.toml", "\n".join(f"{k} = {json.dumps(v)}" for k, v in SMALL.items()) + "\n")
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "-o", str(out), "--set", 'solvers=["ada_newton","newton"]']) == 0
    assert sorted(p.name for p in out.glob("trace_*.csv")) == ["trace_ada_newton.csv", "trace_newton.csv"]
    assert main(["summarize", str(out)]) == 0
    assert "ada_newton" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = write_toml(tmp_path / "bad.toml", "nope = 1\n")
    assert main(["run", str(path)]) == 2
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_data_error_exit_code(tmp_path):
    bad = tmp_path / "bad.svm"
    bad.write_text("+1 2:1 1:3\n")
    path = write_toml(tmp_path / "e.toml", f'dataset = "{bad}"\nsolvers = ["newton"]\n')
    assert main(["run", str(path), "-o", str(tmp_path / "o")]) == 2


def test_cli_solver_abort_exit_code(tmp_path):
    path = write_toml(tmp_path / "e.toml", "\n".join(f"{k} = {json.dumps(v)}" for k, v in SMALL.items()) + "\n")
    argv = ["run", str(path), "-o", str(tmp_path / "o"), "--set", 'solvers=["sgd"]', "--set", "sgd_stepsize=1e8",
            "--set", "loss=quadratic"]
    assert main(argv) == 1


@pytest.mark.parametrize("fmt,loader", [("libsvm", load_libsvm), ("csv", load_csv)])
def test_gen_synth_roundtrip(tmp_path, fmt, loader):
    out = tmp_path / f"d.{'csv' if fmt == 'csv' else 'svm'}"
    assert main(["gen-synth", "--n", "50", "--p", "3", "--seed", "2", "--format", fmt, "--out", str(out)]) == 0
    data = loader(out, seed=0)
    assert (data.N, data.p) == (50, 3)
    assert set(np.unique(data.labels)) <= {-1.0, 1.0}


def test_cli_check_passes(tmp_path, capsys):
    path = write_toml(tmp_path / "e.toml", "\n".join(f"{k} = {json.dumps(v)}" for k, v in SMALL.items()) + "\n")
    assert main(["check", str(path), "--size", "400"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 6
