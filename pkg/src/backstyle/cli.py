"""Command-line driver ``bst``: pipeline stages plus the annotation service.

Configuration resolution: start from the profile defaults (``--profile
full|desk|micro``), or from ``--config FILE`` when given; individual flags
like ``--seed`` override the file. Every stage works inside ``--run-dir``
(default ``./run``) and writes a manifest there.

Exit codes: 0 success, 1 stage failure (diagnostic on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import PipelineConfig
from .evalharness import load_tasks
from .pipeline import (
    RunPaths,
    STAGES,
    run_all,
    stage_transfer,
)
from .seq2seq import PipelineStageError, TrainingFailureError
from .server import AnnotationServer

__all__ = ["build_parser", "run", "main"]

PROFILES = {
    "full": PipelineConfig,
    "desk": PipelineConfig.desk,
    "micro": PipelineConfig.micro,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bst",
        description="Back-translation grounded style transfer pipeline.")
    parser.add_argument("--config", metavar="FILE",
                        help="JSON config file (overrides the profile defaults)")
    parser.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                        help="built-in configuration profile (default: desk)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--run-dir", metavar="DIR", default="run",
                        help="run directory for data, artifacts, and reports")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("synth-data", help="generate the synthetic corpora")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="write corpora directly into DIR instead of RUN_DIR/data")
    sub.add_parser("prepare", help="split the styled corpus")
    sub.add_parser("lexicon", help="extract the style lexicon")
    sub.add_parser("train-classifier", help="train guidance and held-out classifiers")
    sub.add_parser("train-mt", help="train both translation directions")
    sub.add_parser("train-style", help="train the style generators")

    p = sub.add_parser("transfer", help="transfer sentences to the opposite style")
    p.add_argument("--in", dest="in_path", metavar="FILE", default=None,
                   help="styled-corpus JSONL to transfer (default: the test split)")
    p.add_argument("--target", metavar="STYLE", default=None,
                   help="target style tag (required with --in)")
    p.add_argument("--out", metavar="FILE", default=None,
                   help="output JSONL path (default: reports/transfer_outputs.jsonl)")

    sub.add_parser("evaluate", help="score outputs and emit reports and tasks")
    sub.add_parser("run", help="run every stage in order")

    p = sub.add_parser("serve", help="serve annotation tasks over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--tasks", metavar="FILE", default=None,
                   help="task file (default: RUN_DIR/reports/tasks.json)")
    p.add_argument("--log", metavar="FILE", default=None,
                   help="judgment log (default: RUN_DIR/reports/judgments.jsonl)")
    p.add_argument("--static", metavar="DIR", default=None,
                   help="static UI directory (default: ./frontend/dist if present)")
    return parser


def _load_config(args) -> PipelineConfig:
    if args.config:
        config = PipelineConfig.load(args.config)
    else:
        config = PROFILES[args.profile]()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _cmd_serve(args, config: PipelineConfig) -> int:
    paths = RunPaths(args.run_dir, config)
    task_path = Path(args.tasks) if args.tasks else paths.report("tasks.json")
    if not task_path.exists():
        print(f"error: serve: no task file at {task_path}; "
              f"run the evaluate stage first", file=sys.stderr)
        return 1
    log_path = Path(args.log) if args.log else paths.report("judgments.jsonl")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    static = args.static
    if static is None and Path("frontend/dist").is_dir():
        static = "frontend/dist"
    server = AnnotationServer(load_tasks(task_path), log_path,
                              static_dir=static, host=args.host, port=args.port)
    print(f"serving {len(server.tasks)} tasks at {server.address} "
          f"(log: {log_path})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "serve":
            return _cmd_serve(args, config)
        if args.command == "run":
            manifests = run_all(config, args.run_dir)
            for name, manifest in manifests.items():
                print(f"{name}: {json.dumps(manifest.artifacts, sort_keys=True)}")
            return 0
        if args.command == "transfer":
            if args.in_path and not args.target:
                parser.error("--in requires --target")
            manifest = stage_transfer(config, args.run_dir, in_path=args.in_path,
                                      target=args.target, out_path=args.out)
        elif args.command == "synth-data":
            if args.out:
                config = replace(config, data_dir=".")
                manifest = STAGES["synth-data"](config, args.out)
            else:
                manifest = STAGES["synth-data"](config, args.run_dir)
        else:
            manifest = STAGES[args.command](config, args.run_dir)
        print(f"{args.command}: {json.dumps(manifest.artifacts, sort_keys=True)}")
        return 0
    except (PipelineStageError, TrainingFailureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
