"""`nc-export`: extract penultimate embeddings from a checkpoint into .nceb."""

from __future__ import annotations

import argparse
import sys

from nc_export.errors import NcExportError
from nc_export.export import ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nc-export",
        description="Export penultimate-layer embeddings to the .nceb container",
    )
    parser.add_argument("--checkpoint", required=True, help="model checkpoint file")
    parser.add_argument("--manifest", required=True, help="CSV: path,label,algorithm_id")
    parser.add_argument("--layer", required=True, help="named layer to export, e.g. dense1")
    parser.add_argument("--out", required=True, help="output .nceb path")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument(
        "--framework", default="npz-mlp", help="checkpoint framework adapter"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        checkpoint=args.checkpoint,
        manifest=args.manifest,
        layer=args.layer,
        out=args.out,
        batch_size=args.batch_size,
        framework=args.framework,
    )
    try:
        export_embeddings(job)
    except NcExportError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
