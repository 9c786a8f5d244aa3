"""Small export command: fitted forest pickle in, canonical model JSON out."""

from __future__ import annotations

import argparse
import pickle
import sys
from pathlib import Path

from .export import ExportError, export_forest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="treegrate-export",
        description="Serialize a fitted scikit-learn forest classifier "
        "(pickled, from a trusted source) into treegrate model JSON.",
    )
    parser.add_argument(
        "--in", dest="input", required=True, help="pickled fitted forest"
    )
    parser.add_argument("--out", dest="output", required=True, help="model JSON path")
    parser.add_argument("--model-id", default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        with open(args.input, "rb") as handle:
            forest = pickle.load(handle)
    except OSError as exc:
        print(f"treegrate-export: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # unpickling arbitrary failures
        print(f"treegrate-export: cannot unpickle {args.input}: {exc}", file=sys.stderr)
        return 2

    try:
        exported = export_forest(forest, model_id=args.model_id)
    except ExportError as exc:
        print(f"treegrate-export: {exc}", file=sys.stderr)
        return 2

    try:
        Path(args.output).write_text(exported.to_json(), encoding="utf-8")
    except OSError as exc:
        print(f"treegrate-export: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
