"""Entry point: `python -m mleval --model svc|logreg [--data-seed N]`."""

from __future__ import annotations

import argparse
import json
import sys

from .protocol import serve
from .task import MODELS, MLTask


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="mleval",
        description="Cross-validated SVC / logistic-regression evaluator over stdio.",
    )
    parser.add_argument("--model", choices=MODELS, required=True)
    parser.add_argument("--data-seed", type=int, default=0, help="dataset generation seed")
    parser.add_argument(
        "--print-space",
        action="store_true",
        help="print the model's search-space document and exit",
    )
    args = parser.parse_args(argv)

    task = MLTask(model=args.model, data_seed=args.data_seed)
    if args.print_space:
        json.dump(task.space_document(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    serve(task)


if __name__ == "__main__":
    main()
