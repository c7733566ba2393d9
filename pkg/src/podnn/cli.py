"""Command-line entry point: offline stages, inference, benchmark, reports.

Exit codes: 0 on success, 1 on a stage/runtime failure, 2 on invalid
configuration or arguments.  The output directory resolves in order from
``--out``, the ``PODNN_OUTPUT_DIR`` environment variable, then the config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import pipeline
from .config import ConfigError, RunConfig, desk_config, toy_config
from .container import ArtifactStore

PRESETS = {"desk": desk_config, "toy": toy_config}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="podnn",
        description="Meshfree reduced-order modeling with a neural surrogate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")
        p.add_argument("--out", help="output directory")

    for name in ("nodes", "snapshots", "pod", "dataset", "train", "offline"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "offline"
                           else "run all offline stages")
        add_common(p)
        if name == "pod":
            p.add_argument("--decay-ns", type=int, nargs="*", default=None,
                           help="also write decay.csv for these snapshot counts")

    p = sub.add_parser("infer", help="online surrogate evaluation")
    add_common(p)
    p.add_argument("--params", help="JSON file with a list of [mu1, mu2] pairs")
    p.add_argument("--allow-outside", action="store_true",
                   help="warn instead of failing on out-of-domain parameters")

    p = sub.add_parser("benchmark", help="three-way timing/error comparison")
    add_common(p)
    p.add_argument("--n-test", type=int, default=None,
                   help="number of held-out test parameters (default: full test split)")

    p = sub.add_parser("grid", help="hyperparameter grid search")
    add_common(p)
    p.add_argument("--grid-file", required=True,
                   help="JSON file mapping hyperparameter names to value lists")

    p = sub.add_parser("netcalc-verify", help="verify the network-calculus contracts")
    p.add_argument("--draws", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    return parser


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_json_file(args.config)
    else:
        cfg = PRESETS[args.preset]()
    if args.overrides:
        cfg = cfg.with_overrides(args.overrides)
    out = args.out or os.environ.get("PODNN_OUTPUT_DIR")
    if out:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "out_dir": out})
    return cfg


def _test_split_params(store: ArtifactStore, limit=None) -> np.ndarray:
    split = store.load_json("dataset_split.json")
    inputs = store.load_matrix("dataset_inputs.pdnn")
    idx = np.asarray(split["test"], dtype=np.int64)
    if limit is not None:
        idx = idx[:limit]
    return inputs[idx]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "netcalc-verify":
        text = pipeline.netcalc_verify(mc_draws=args.draws, seed=args.seed)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0

    try:
        cfg = _load_config(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2

    store = ArtifactStore(cfg.out_dir)
    try:
        if args.command in pipeline.STAGES:
            store.save_text("config.json", cfg.to_json())
            pipeline.run_stage(args.command, cfg, store)
            if args.command == "pod" and getattr(args, "decay_ns", None):
                pipeline.decay_report(cfg, store, args.decay_ns)
            print(f"stage {args.command} complete in {store.root}")
        elif args.command == "offline":
            pipeline.offline(cfg)
            print(f"offline pipeline complete in {store.root}")
        elif args.command == "infer":
            if args.params:
                with open(args.params) as fh:
                    mus = np.asarray(json.load(fh), dtype=float)
            else:
                mus = _test_split_params(store)
            fields, elapsed = pipeline.online(
                store, mus, out_of_domain="warn" if args.allow_outside else "error"
            )
            store.save_matrix("inference.pdnn", fields)
            print(f"{fields.shape[0]} parameters in {elapsed:.6f} s -> inference.pdnn")
        elif args.command == "benchmark":
            mus = _test_split_params(store, args.n_test)
            result = pipeline.benchmark(store, mus, cfg)
            text = pipeline.benchmark_csv(result)
            store.save_text("benchmark.csv", text)
            sys.stdout.write(text)
        elif args.command == "grid":
            with open(args.grid_file) as fh:
                grid = json.load(fh)
            text = pipeline.hyperparameter_grid(cfg, store, grid)
            sys.stdout.write(text)
    except pipeline.StageFailure as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
