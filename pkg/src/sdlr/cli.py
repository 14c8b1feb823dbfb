"""Command-line surface: ``run``, ``validate`` and ``list-experiments``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import EXPERIMENTS, load_config, serialize_config
from .errors import ConfigError, SdlrError
from .experiments import run_experiment, write_csv

_EXPERIMENT_BLURBS = {
    "gbm": "linear multiplicative-noise system, moment-ODE reference",
    "burgers": "spectral stochastic Burgers truncation, Monte Carlo reference",
    "oscillator": "damped harmonic oscillator unraveling, dense master-equation reference",
    "custom-linear": "user-sized linear system with configurable spectrum and noise scale",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdlr",
        description="Run low-rank ensemble experiments and write CSV diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("config", help="path to the JSON config file")
    run_p.add_argument("--seed", type=int, default=None, help="override config seed")
    run_p.add_argument("--output-dir", default=None, help="override output directory")
    run_p.add_argument("--samples", type=int, default=None, help="override sample count")
    val_p = sub.add_parser("validate", help="validate a config without running")
    val_p.add_argument("config", help="path to the JSON config file")
    sub.add_parser("list-experiments", help="list the available experiment types")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.samples is not None:
        overrides["samples"] = args.samples
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        cfg.validate()
    result = run_experiment(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors = {}
    for (method, rank), run in sorted(result.runs.items()):
        path = out / f"{method}_r{rank}.csv"
        write_csv(run.records, path, cfg.spectrum_k)
        status = f"error: {run.error}" if run.error else f"{len(run.records)} records"
        print(f"{path} ({status})")
        if run.error:
            errors[f"{method}_r{rank}"] = run.error
    meta = {
        "config": json.loads(serialize_config(cfg)),
        "reference": result.reference_note,
        "errors": errors,
    }
    (out / "run_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return 1 if errors else 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"valid: {cfg.experiment} experiment, n={cfg.n}, "
          f"methods={','.join(cfg.method_list)}, ranks={list(cfg.rank_list)}")
    return 0


def _cmd_list() -> int:
    for name in EXPERIMENTS:
        print(f"{name}: {_EXPERIMENT_BLURBS[name]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_list()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except SdlrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
