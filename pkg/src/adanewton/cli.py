"""Command-line interface: ``run``, ``summarize``, ``gen-synth`` and ``check``."""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .harness import (
    ConfigError,
    ExperimentConfig,
    check_suite,
    parse_override,
    run_experiment,
    summarize,
)
from .model import DataFormatError, normalize_maxabs, synth_logistic

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def _config(args) -> ExperimentConfig:
    overrides = dict(parse_override(item) for item in args.set or [])
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    return ExperimentConfig.from_file(args.config, overrides)


def _print_summary(table):
    print(f"{'solver':<12} {'target':<6} {'passes':>10} {'time_s':>10}  status")
    for r in table:
        p, t = r["passes_to_target"], r["time_to_target"]
        ps = "inf" if math.isinf(p) else f"{p:.3f}"
        ts = "inf" if math.isinf(t) else f"{t:.3f}"
        print(f"{r['solver']:<12} {r['target']:<6} {ps:>10} {ts:>10}  {r['status']}")


def cmd_run(args) -> int:
    result = run_experiment(_config(args))
    _print_summary(result.summary)
    print(f"traces written to {result.output_dir}")
    return result.exit_code


def cmd_summarize(args) -> int:
    _print_summary(summarize(args.dir, N=args.N))
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    data = synth_logistic(args.n, args.p, args.seed, args.separation)
    if args.normalize:
        data = normalize_maxabs(data)
    X, y = data.features, data.labels
    with open(args.out, "w") as fh:
        if args.format == "csv":
            fh.write("label," + ",".join(f"f{j + 1}" for j in range(data.p)) + "\n")
            for xi, yi in zip(X, y):
                fh.write(f"{int(yi)}," + ",".join(repr(float(v)) for v in xi) + "\n")
        else:
            for xi, yi in zip(X, y):
                nz = np.flatnonzero(xi)
                feats = " ".join(f"{j + 1}:{float(xi[j])!r}" for j in nz)
                fh.write(f"{int(yi):+d} {feats}\n")
    print(f"wrote {data.N} samples x {data.p} features to {args.out}")
    return EXIT_OK


def cmd_check(args) -> int:
    results = check_suite(_config(args), size=args.size)
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adanewton", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="flat TOML experiment config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable; flags win over the file)")
        p.add_argument("-o", "--output-dir")
        return p

    with_config(sub.add_parser("run", help="run an experiment")).set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="passes/time to 1/N, 10/N, 100/N from trace CSVs")
    p.add_argument("dir")
    p.add_argument("--N", type=int, help="dataset size if meta.json is missing")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("gen-synth", help="write a synthetic logistic dataset")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = with_config(sub.add_parser("check", help="invariant/diagnostic suite on a small slice"))
    p.add_argument("--size", type=int, default=400)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
