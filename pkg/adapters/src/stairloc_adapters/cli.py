"""stairloc-adapt: run detector adapters over a directory of images and
emit stairloc/1 newline-delimited JSON (with a sidecar .log)."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .emit import emit_records
from .errors import AdapterError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stairloc-adapt",
        description="emit stairloc/1 detections from RGB images")
    parser.add_argument("--images", required=True, help="input image directory")
    parser.add_argument("--out", required=True, help="output detection file")
    parser.add_argument("--config", help="adapter config JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = load_config(args.config)
        emitted = emit_records(args.images, cfg, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AdapterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"emitted {emitted} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
