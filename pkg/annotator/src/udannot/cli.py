"""Command-line entry point: annotate a corpus directory per a job file."""

from __future__ import annotations

import argparse
import sys

import udannot
from udannot.conllu import ConlluFormatError
from udannot.job import JobError, load_job, run_job
from udannot.models import ModelError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="udannot",
        description="annotate UD parallel corpora with surprisal, forced-decoding and alignment layers",
    )
    parser.add_argument("--version", action="version", version=f"udannot {udannot.__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="run an annotation job")
    run.add_argument("--config", required=True, help="YAML job file")
    run.add_argument("--in", dest="in_dir", required=True, help="input corpus directory")
    run.add_argument("--out", required=True, help="output corpus directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = load_job(args.config)
        report = run_job(job, args.in_dir, args.out)
    except (JobError, ModelError, ConlluFormatError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for flag in report["flags"]:
        print(f"flagged: {flag}", file=sys.stderr)
    counts = report["counts"]
    print(
        f"annotated {counts['pairs']} pairs: {counts['tokens_with_surprisal']} tokens scored, "
        f"{counts['word_links']} word links, {counts['subtree_links']} subtree links"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
