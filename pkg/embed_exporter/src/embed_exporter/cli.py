"""CLI: ``embed-exporter export --phrases <file|args> --out <json>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exporter import DEFAULT_MODEL, ExporterError, export


def _collect_phrases(args) -> list[str]:
    phrases = list(args.phrase)
    if args.phrases:
        text = Path(args.phrases).read_text(encoding="utf-8")
        phrases += [line.strip() for line in text.splitlines() if line.strip()]
    if not phrases:
        raise ExporterError("no phrases given (positional arguments or --phrases FILE)")
    return phrases


def cmd_export(args) -> int:
    payload = export(_collect_phrases(args), args.out, model_id=args.model)
    print(f"wrote {len(payload['embeddings'])} embeddings to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-exporter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="embed phrases and write the JSON file")
    p.add_argument("phrase", nargs="*", help="phrases to embed")
    p.add_argument("--phrases", help="file with one phrase per line")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--model", default=DEFAULT_MODEL,
                   help="model id or local checkpoint directory")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExporterError as exc:
        print(f"embed-exporter: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
