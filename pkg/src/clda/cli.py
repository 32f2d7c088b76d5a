"""Command line entry point: ``clda run|ingest|train|merge|cluster|evaluate|report|compare``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .exceptions import ConfigurationError
from .pipeline import STAGES, PipelineConfig, StageError, compare_models, run_pipeline, run_stage

COMMANDS = ("run",) + STAGES


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat 'key = value' config file")
    group = parser.add_argument_group("config overrides (take precedence over --config)")
    for f in fields(PipelineConfig):
        group.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clda", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help="run all stages" if name == "run" else f"run the {name} stage")
        _add_config_flags(p)
    p = sub.add_parser("compare", help="match two topic files by top-word Jaccard")
    p.add_argument("topics_a")
    p.add_argument("topics_b")
    p.add_argument("--top-n", type=int, default=20)
    p.add_argument("--output", help="write the match table CSV here (default: stdout)")
    return parser


def _config(args) -> PipelineConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if args.config:
        return PipelineConfig.from_file(args.config, overrides)
    return PipelineConfig.from_mapping(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.command == "compare":
        try:
            report = compare_models(args.topics_a, args.topics_b, args.top_n, args.output)
        except (OSError, ValueError) as exc:
            print(f"clda: stage 'compare' failed: {exc}", file=sys.stderr)
            return 1
        if not args.output:
            sys.stdout.write(report.to_csv())
        return 0
    try:
        cfg = _config(args)
        if args.command == "run":
            run_pipeline(cfg)
        else:
            run_stage(cfg, args.command)
    except ConfigurationError as exc:
        print(f"clda: configuration error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"clda: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
