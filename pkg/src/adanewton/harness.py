"""Experiment runner: load or generate data, run solvers against a shared
reference optimum, and write one trace CSV per solver plus a summary."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ada import AdaNewtonConfig, ada_newton
from .baselines import (
    LineSearchConfig,
    SagaConfig,
    SgdConfig,
    newton_linesearch,
    reference_optimum,
    saga,
    sgd,
)
from .model import AccuracyPolicy, Dataset, LossModel, RiskConfig, load_csv, load_libsvm
from .model import normalize_maxabs, synth_logistic
from .risk import risk_eval
from .theory import estimate_lipschitz

log = logging.getLogger(__name__)

TRACE_HEADER = ["solver", "passes", "hessian_units_over_N", "elapsed_s", "grad_norm", "subopt", "n"]
SUMMARY_HEADER = ["solver", "status", "target", "passes_to_target", "time_to_target"]
SOLVERS = ("ada_newton", "newton", "saga", "sgd")
OUTPUT_ENV = "ADANEWTON_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"  # "synthetic" or a path to a LIBSVM / .csv file
    synth_n: int = 100_000
    synth_p: int = 20
    synth_seed: int | None = None
    synth_separation: float = 1.0
    normalize: bool = False

    loss: str = "logistic"
    c: float = 200.0
    policy: str = "inverse_n"
    policy_scale: float = 1.0
    lipschitz_M: float | None = None

    solvers: tuple[str, ...] = SOLVERS
    budget_passes: float = 25.0
    output_dir: str = "runs"
    seed: int = 0
    record_time: bool = True
    reference_tol: float = 1e-12

    ada_alpha0: float = 2.0
    ada_beta: float = 0.5
    ada_m0: int = 124
    ada_warmup_steps: int = 100
    ada_warmup_stepsize: float = 1e-3
    ada_max_backtracks: int = 10

    newton_armijo_alpha: float = 0.4
    newton_shrink_beta: float = 0.5
    newton_max_halvings: int = 60
    newton_tol: float = 1e-10

    sgd_stepsize: float = 2e-2
    sgd_batch_size: int = 1

    saga_stepsize: float = 0.2
    saga_autoscale: bool = False

    def __post_init__(self):
        self.solvers = tuple(self.solvers)
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ConfigError(f"unknown solvers {sorted(unknown)}; choose from {SOLVERS}")
        if not self.budget_passes > 0:
            raise ConfigError("budget_passes must be positive")
        try:
            M = 1.0 if self.lipschitz_M is None else self.lipschitz_M
            RiskConfig(self.c, self.risk_policy(), M, LossModel(self.loss))
            self.ada_config()
            self.linesearch_config()
            SgdConfig(self.sgd_stepsize, self.sgd_batch_size)
            SagaConfig(self.saga_stepsize)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                values = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        nested = [k for k, v in values.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"config must be flat; found tables {nested}")
        values.update(overrides or {})
        return cls.from_mapping(values)

    def risk_policy(self) -> AccuracyPolicy:
        return AccuracyPolicy(self.policy, self.policy_scale)

    def ada_config(self) -> AdaNewtonConfig:
        return AdaNewtonConfig(
            self.ada_alpha0, self.ada_beta, self.ada_m0,
            self.ada_warmup_steps, self.ada_warmup_stepsize, self.ada_max_backtracks,
        )

    def linesearch_config(self) -> LineSearchConfig:
        return LineSearchConfig(self.newton_armijo_alpha, self.newton_shrink_beta, self.newton_max_halvings)

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)


def parse_override(item: str) -> tuple[str, object]:
    """Parse ``key=value`` with TOML value syntax; bare words become strings."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = (s.strip() for s in item.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "synthetic":
        seed = cfg.seed if cfg.synth_seed is None else cfg.synth_seed
        data = synth_logistic(cfg.synth_n, cfg.synth_p, seed, cfg.synth_separation)
    elif cfg.dataset.endswith(".csv"):
        data = load_csv(cfg.dataset, seed=cfg.seed)
    else:
        data = load_libsvm(cfg.dataset, seed=cfg.seed)
    return normalize_maxabs(data) if cfg.normalize else data


def risk_config(cfg: ExperimentConfig, data: Dataset) -> RiskConfig:
    loss = LossModel(cfg.loss)
    M = cfg.lipschitz_M if cfg.lipschitz_M is not None else estimate_lipschitz(data, loss)
    return RiskConfig(cfg.c, cfg.risk_policy(), M, loss)


def _solver_seed(master: int, solver: str) -> int:
    stream = SOLVERS.index(solver)
    return int(np.random.SeedSequence([master, stream]).generate_state(1)[0])


@dataclass
class ExperimentResult:
    output_dir: Path
    traces: dict[str, Path]
    status: dict[str, str]
    summary: list[dict] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if any(s.startswith("aborted") for s in self.status.values()) else 0


class _TraceWriter:
    """Turns solver events into trace rows measured on the full risk R_N."""

    kinds = ("start", "warmup_done", "step_accepted", "iterate", "finished")

    def __init__(self, solver, data, rcfg, r_star, record_time):
        self.solver = solver
        self.data = data
        self.rcfg = rcfg
        self.r_star = r_star
        self.record_time = record_time
        self.rows: list[list] = []
        self._last = None

    def __call__(self, event):
        if event.kind not in self.kinds:
            return
        key = (event.passes, event.w.tobytes())
        if key == self._last:
            return
        self._last = key
        N = self.data.N
        ev = risk_eval(self.data, self.rcfg, N, event.w)
        self.rows.append([
            self.solver,
            event.passes,
            event.hessian_units / N,
            event.elapsed if self.record_time else 0.0,
            float(np.linalg.norm(ev.gradient)),
            ev.value - self.r_star,
            event.n,
        ])

    def write(self, path: Path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(TRACE_HEADER)
            for row in self.rows:
                out.writerow([row[0], *(repr(float(v)) for v in row[1:6]), row[6]])


def _run_solver(name, cfg, data, rcfg, sink):
    N, p = data.N, data.p
    budget = cfg.budget_passes * N
    w0 = np.zeros(p)
    if name == "ada_newton":
        state, _ = ada_newton(data, rcfg, cfg.ada_config(), sink=sink, budget=budget)
        return state.status
    if name == "newton":
        _, events = newton_linesearch(
            data, rcfg, N, w0, cfg.linesearch_config(), stop=cfg.newton_tol, budget=budget, sink=sink
        )
        return events[-1].note
    seed = _solver_seed(cfg.seed, name)
    if name == "saga":
        sc = SagaConfig(cfg.saga_stepsize, seed, cfg.saga_autoscale)
        saga(data, rcfg, N, w0, sc, budget=max(budget, N), sink=sink)
    else:
        sgd(data, rcfg, N, w0, SgdConfig(cfg.sgd_stepsize, cfg.sgd_batch_size, seed), budget=budget, sink=sink)
    return "budget"


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every configured solver and write ``trace_<solver>.csv``, ``summary.csv``
    and ``meta.json`` into the output directory."""
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset(cfg)
    rcfg = risk_config(cfg, data)
    _, r_star = reference_optimum(data, rcfg, data.N, tol=cfg.reference_tol, cache_dir=out)
    meta = {
        "N": data.N,
        "p": data.p,
        "dataset_hash": data.content_hash(),
        "c": rcfg.c,
        "policy": rcfg.policy.kind,
        "policy_scale": rcfg.policy.scale,
        "lipschitz_M": rcfg.lipschitz_M,
        "reference_value": r_star,
        "V_N": rcfg.V(data.N),
    }
    result = ExperimentResult(out, {}, {})
    for name in cfg.solvers:
        writer = _TraceWriter(name, data, rcfg, r_star, cfg.record_time)
        try:
            status = _run_solver(name, cfg, data, rcfg, writer)
        except Exception as exc:  # one solver's failure must not cancel the others
            log.error("solver %s aborted: %s", name, exc)
            status = f"aborted: {type(exc).__name__}: {exc}"
        path = out / f"trace_{name}.csv"
        writer.write(path)
        result.traces[name] = path
        result.status[name] = status
    meta["status"] = result.status
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    result.summary = summarize(out, N=data.N, status=result.status)
    write_summary(out / "summary.csv", result.summary)
    return result


def passes_to_target(rows: list[dict], target: float, column: str = "passes") -> float:
    """First crossing of ``subopt <= target``, interpolated linearly in subopt
    between the bracketing rows; ``inf`` when never reached."""
    prev = None
    for row in rows:
        s = row["subopt"]
        if s <= target:
            if prev is None or prev["subopt"] == s:
                return row[column]
            frac = (prev["subopt"] - target) / (prev["subopt"] - s)
            return prev[column] + frac * (row[column] - prev[column])
        prev = row
    return math.inf


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_HEADER:
            raise ValueError(f"{path}: header {reader.fieldnames} != {TRACE_HEADER}")
        rows = []
        for rec in reader:
            row = {k: float(rec[k]) for k in TRACE_HEADER[1:6]}
            row["solver"] = rec["solver"]
            row["n"] = int(rec["n"])
            rows.append(row)
    rows.sort(key=lambda r: r["passes"])
    return rows


def summarize(directory, N: int | None = None, status: dict | None = None) -> list[dict]:
    """Passes and time needed to reach suboptimality 1/N, 10/N and 100/N, per solver.

    ``N`` and solver statuses default to the values stored in ``meta.json``.
    Unreadable trace files are reported with status ``corrupt: ...``.
    """
    directory = Path(directory)
    meta_path = directory / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    N = N if N is not None else meta.get("N")
    if N is None:
        raise ValueError(f"{directory}: N unknown (no meta.json); pass it explicitly")
    status = status if status is not None else meta.get("status", {})
    table = []
    for path in sorted(directory.glob("trace_*.csv")):
        solver = path.stem[len("trace_"):]
        try:
            rows = read_trace(path)
            st = status.get(solver, "unknown")
        except (ValueError, KeyError, OSError) as exc:
            rows, st = [], f"corrupt: {exc}"
        for label, target in (("1/N", 1.0 / N), ("10/N", 10.0 / N), ("100/N", 100.0 / N)):
            table.append({
                "solver": solver,
                "status": st,
                "target": label,
                "passes_to_target": passes_to_target(rows, target),
                "time_to_target": passes_to_target(rows, target, "elapsed_s"),
            })
    return table


def write_summary(path, table: list[dict]):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_HEADER)
        for r in table:
            out.writerow([
                r["solver"], r["status"], r["target"],
                _fmt(r["passes_to_target"]), _fmt(r["time_to_target"]),
            ])


def _fmt(x: float) -> str:
    return "∞" if math.isinf(x) else repr(float(x))


def check_suite(cfg: ExperimentConfig, size: int = 400, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Invariant and diagnostic checks on the first ``size`` rows of the dataset.

    Returns ``(name, passed, detail)`` triples.
    """
    from .ada import certificate_holds, ada_newton as _ada
    from .risk import risk_gradient, risk_hessian, risk_value
    from .theory import audit_step, lemma1_decomposition

    full = load_dataset(cfg)
    size = min(size, full.N)
    data = Dataset(full.features[:size], full.labels[:size], full.shuffle_seed)
    rcfg = risk_config(cfg, data)
    rng = np.random.default_rng(seed)
    results = []

    n = size
    w = rng.standard_normal(data.p) * 0.5
    g = risk_gradient(data, rcfg, n, w)
    fd = np.empty_like(g)
    for i in range(data.p):
        h = 1e-6 * (1.0 + abs(w[i]))
        e = np.zeros(data.p)
        e[i] = h
        fd[i] = (risk_value(data, rcfg, n, w + e) - risk_value(data, rcfg, n, w - e)) / (2 * h)
    err = float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-300))
    results.append(("gradient vs central differences", err <= 1e-5, f"rel err {err:.2e}"))

    H = risk_hessian(data, rcfg, n, w)
    fdH = np.empty_like(H)
    for i in range(data.p):
        h = 1e-6 * (1.0 + abs(w[i]))
        e = np.zeros(data.p)
        e[i] = h
        fdH[:, i] = (risk_gradient(data, rcfg, n, w + e) - risk_gradient(data, rcfg, n, w - e)) / (2 * h)
    err = float(np.max(np.abs(fdH - H)))
    results.append(("Hessian vs gradient differences", err <= 1e-4, f"max abs err {err:.2e}"))

    floor = float(np.linalg.eigvalsh(H)[0]) - rcfg.reg(n)
    results.append(("strong convexity floor", floor >= -1e-10, f"min eig - cV_n = {floor:.2e}"))

    m = max(1, n // 3)
    lhs, rhs = lemma1_decomposition(data, rcfg.loss, m, n, w)
    ok = abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
    results.append(("loss-difference identity", ok, f"|lhs-rhs| = {abs(lhs - rhs):.1e}"))

    w_star, r_star = reference_optimum(data, rcfg, n)
    bad = 0
    passed = 0
    for _ in range(200):
        trial = w_star + rng.standard_normal(data.p) * 10.0 ** rng.uniform(-4, -1)
        holds, _ = certificate_holds(data, rcfg, n, trial)
        if holds:
            passed += 1
            bad += risk_value(data, rcfg, n, trial) - r_star > rcfg.V(n)
    results.append(("certificate soundness", bad == 0, f"{passed} certified points, {bad} violations"))

    acfg = dataclasses.replace(cfg.ada_config(), m0=min(cfg.ada_m0, max(1, size // 8)))
    try:
        state, events = _ada(data, rcfg, acfg)
        violations = []
        for ev, prev in _accepted_pairs(events):
            ref, _ = reference_optimum(data, rcfg, ev.n)
            audit = audit_step(data, rcfg, ev.m, ev.n, prev.w, ev.w, ref)
            violations += audit.violations
        results.append((
            "Ada Newton run + step audits",
            not violations,
            f"n={state.n}, {state.hessian_inversions} Hessian inversions; " + ("; ".join(violations) or "bounds hold"),
        ))
    except Exception as exc:
        results.append(("Ada Newton run + step audits", False, f"{type(exc).__name__}: {exc}"))
    return results


def _accepted_pairs(events):
    prev = None
    for ev in events:
        if ev.kind == "step_accepted" and prev is not None:
            yield ev, prev
        if ev.kind in ("warmup_done", "step_accepted"):
            prev = ev
