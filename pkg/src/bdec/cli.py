"""Command-line interface: run experiments, list presets, validate configs."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ConfigError, ExperimentConfig, PRESETS, load_config, preset, run_experiment
from .modes import ModeAtlas
from .samplers import ALGORITHMS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file or preset")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a JSON experiment config")
    src.add_argument("--preset", help="name of a built-in preset (see `presets`)")
    run_p.add_argument("--seed", type=int, help="override the master seed")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--algo", choices=ALGORITHMS, help="override the algorithm")
    run_p.add_argument("--reps", type=int, help="override the replicate count")
    run_p.add_argument("--workers", type=int, help="replicates run in parallel")
    run_p.add_argument(
        "--snapshot-every", type=int, metavar="K",
        help="dump ensemble CSVs every K iterations",
    )
    run_p.add_argument("--atlas", help="JSON file with prior mode knowledge to seed runs")

    sub.add_parser("presets", help="list built-in experiment presets")

    val_p = sub.add_parser("validate", help="schema-check a config file")
    val_p.add_argument("--config", required=True)

    return parser


def _load(args) -> ExperimentConfig:
    if args.preset is not None:
        config = preset(args.preset)
    else:
        config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
        config.sampler.seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    if args.algo is not None:
        config.sampler.algorithm = args.algo
    if args.reps is not None:
        config.replicates = args.reps
    if args.workers is not None:
        config.workers = args.workers
    if args.snapshot_every is not None:
        config.snapshot_every = args.snapshot_every
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in sorted(PRESETS):
            print(name)
        return 0

    if args.command == "validate":
        try:
            config = load_config(args.config)
            config.validate()
        except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        print("ok")
        return 0

    if args.command == "run":
        try:
            config = _load(args)
            config.validate()
        except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        atlas = None
        if args.atlas is not None:
            try:
                with open(args.atlas) as fh:
                    atlas = ModeAtlas.from_json(fh.read())
            except (OSError, ValueError, KeyError) as exc:
                print(f"invalid atlas file: {exc}", file=sys.stderr)
                return 2
        try:
            result = run_experiment(config, initial_atlas=atlas)
        except Exception as exc:  # runtime failure -> exit 1 with a diagnostic
            print(f"run failed: {exc}", file=sys.stderr)
            return 1
        for metric, data in result.summary.items():
            print(f"{metric}: final mean {data['mean'][-1]:.6g} (std {data['std'][-1]:.3g})")
        if config.out_dir is not None:
            print(f"outputs written to {config.out_dir}")
        return 0

    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
