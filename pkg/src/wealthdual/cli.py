"""Command line entry point: ``wealthdual run|validate|list``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from . import __version__
from .config import EXPERIMENTS, load
from .errors import ConfigError, WealthDualError
from .experiments import Outcome, run

RESULTS_SCHEMA = "wealthdual-results v1"
HISTOGRAM_SCHEMA = "wealthdual-histogram v1"
SAMPLES_SCHEMA = "wealthdual-samples v1"
RESULT_COLUMNS = ["check", "key", "estimate", "reference", "stderr", "threshold", "passed"]


def _num(v) -> str:
    # repr round-trips doubles exactly, so the output is byte-stable
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def list_experiments() -> str:
    width = max(map(len, EXPERIMENTS))
    return "\n".join(f"{name:<{width}}  {spec['about']}" for name, spec in EXPERIMENTS.items())


def write_outputs(out_dir: str, cfg, outcome: Outcome) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        fh.write(f"# {RESULTS_SCHEMA} experiment={cfg.experiment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for c in outcome.checks:
            w.writerow([c.check, c.key, _num(c.estimate), _num(c.reference), _num(c.stderr),
                        _num(c.threshold), _num(c.passed)])

    summary = {
        "schema": RESULTS_SCHEMA,
        "version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.resolved(),
        "passed": outcome.passed,
        "n_checks": len(outcome.checks),
        "n_failed": sum(not c.passed for c in outcome.checks),
        "checks": [c._asdict() for c in outcome.checks],
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")

    if outcome.histogram is not None:
        h = outcome.histogram
        with open(os.path.join(out_dir, "histogram.csv"), "w", newline="") as fh:
            fh.write(f"# {HISTOGRAM_SCHEMA} underflow={h.underflow} overflow={h.overflow}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
                w.writerow([_num(lo), _num(hi), int(c)])

    if outcome.samples:
        cols = list(outcome.samples)
        with open(os.path.join(out_dir, "samples.csv"), "w", newline="") as fh:
            fh.write(f"# {SAMPLES_SCHEMA}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*(outcome.samples[c] for c in cols)):
                w.writerow([_num(v.item()) for v in row])


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wealthdual",
                                 description="Simulate and verify two-agent exchange models.")
    ap.add_argument("--version", action="version", version=f"wealthdual {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--out")
    r.add_argument("--threads", type=int)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    sub.add_parser("list", help="list experiment kinds")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list":
        print(list_experiments())
        return 0
    overrides = {}
    if args.command == "run":
        overrides = {"seed": args.seed, "trials": args.trials, "threads": args.threads,
                     "out": args.out}
    try:
        cfg = load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print("ok")
        print(json.dumps(_json_safe(cfg.resolved()), indent=2, sort_keys=True))
        return 0

    try:
        outcome = run(cfg)
    except (WealthDualError, ValueError) as exc:
        print(f"experiment {cfg.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    out_dir = cfg.out or os.path.join("out", cfg.experiment)
    write_outputs(out_dir, cfg, outcome)
    for c in outcome.checks:
        flag = "PASS" if c.passed else "FAIL"
        print(f"{flag} {c.check} {c.key} estimate={c.estimate:.6g} reference={c.reference:.6g} "
              f"threshold={c.threshold:.3g}")
    n_fail = sum(not c.passed for c in outcome.checks)
    print(f"{cfg.experiment}: {len(outcome.checks) - n_fail}/{len(outcome.checks)} checks passed"
          f" -> {out_dir}")
    return 0 if outcome.passed else 1


if __name__ == "__main__":
    sys.exit(main())
