"""Command line: embx export CORPUS --model NAME --out DIR"""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import CorpusError
from .export import export


def build_parser():
    parser = argparse.ArgumentParser(prog="embx")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export")
    p.add_argument("corpus")
    p.add_argument("--model", required=True,
                   help="model name or local path for the feature extractor")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--device", default="cpu")
    return parser


def run(argv) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        report = export(args.corpus, args.model, args.out, device=args.device)
    except (CorpusError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for split, info in report.items():
        print(f"{split}: wrote {info['sentences']} sentences to "
              f"{info['path']} ({info['skipped']} skipped)")
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
