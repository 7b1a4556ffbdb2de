"""Command line: encode a span file with a named model, emit PCEM + report."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportJob, export_embeddings


def main() -> None:
    parser = argparse.ArgumentParser(
        prog="hf-embed",
        description="Export first-token transformer embeddings of a span file to PCEM v1.",
    )
    parser.add_argument("--model", required=True, help="model name or local path")
    parser.add_argument("--spans", required=True, help="input span JSONL file")
    parser.add_argument("--out", required=True, help="output PCEM path")
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=8)
    args = parser.parse_args()
    job = ExportJob(
        model_name=args.model,
        input_path=args.spans,
        output_path=args.out,
        max_length=args.max_length,
        batch_size=args.batch_size,
    )
    try:
        report = export_embeddings(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    print(report.to_json())


if __name__ == "__main__":
    main()
