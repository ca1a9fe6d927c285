"""``statbridge`` entry point: an interactive shell or a scripted replay."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .shell import SessionConfig, Shell


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="statbridge", description="Host/guest statistical data bridge shell.")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="replay a script of shell commands and print the transcript")
    run.add_argument("script", type=Path)
    for p in (parser, run):
        p.add_argument("--env-root", type=Path, default=None, help="package environment root directory")
        p.add_argument("--registry", type=Path, default=None, help="package registry root directory")
        p.add_argument("--timing", action="store_true", help="start with timing reports on (set rmsg on)")
    return parser


def _config(args: argparse.Namespace) -> SessionConfig:
    config = SessionConfig(timing_enabled=args.timing)
    if args.env_root is not None:
        config.env_root = args.env_root
    if args.registry is not None:
        config.registry_root = args.registry
    return config


def run_script(path: Path, config: SessionConfig) -> int:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return 1
    shell = Shell(config)
    return shell.run_lines(text.splitlines())


def interactive(config: SessionConfig) -> int:
    shell = Shell(config, echo=False)
    while True:
        try:
            line = input(shell.prompt())
        except EOFError:
            break
        except KeyboardInterrupt:
            print()
            continue
        shell.feed(line)
    shell.finish()
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = _config(args)
    if args.command == "run":
        return run_script(args.script, config)
    return interactive(config)


if __name__ == "__main__":
    sys.exit(main())
