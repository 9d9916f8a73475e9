"""Command-line entry points: train a recipe, export extra dataset slices."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .data import DatasetUnavailableError, load_dataset, synthetic_blobs
from .export import TrainingDiverged, export_dataset, train_and_export
from .recipes import RECIPES, get_recipe


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saftrain",
        description="train, int8-quantize, and export simulator containers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a recipe and export model + eval")
    p.add_argument("--recipe", choices=sorted(RECIPES), required=True)
    p.add_argument("--data-root", default="data",
                   help="dataset directory (downloaded here if possible)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None,
                   help="override the recipe's epoch count")
    p.add_argument("--eval-n", type=int, default=256,
                   help="size of the exported eval subset")
    p.add_argument("--synthetic", action="store_true",
                   help="use the synthetic-blobs dataset (pipeline smoke runs)")

    p = sub.add_parser("export-dataset",
                       help="export an int8 dataset slice for a trained model")
    p.add_argument("--recipe", choices=sorted(RECIPES), required=True)
    p.add_argument("--data-root", default="data")
    p.add_argument("--model", required=True,
                   help="model.json written by the train command")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset file")
    p.add_argument("--train-split", action="store_true",
                   help="draw from the training split instead of test")
    return parser


def _load(recipe, args):
    if getattr(args, "synthetic", False):
        return synthetic_blobs(recipe.in_shape, seed=args.seed)
    return load_dataset(recipe.dataset, args.data_root)


def _cmd_train(args) -> int:
    recipe = get_recipe(args.recipe)
    data = _load(recipe, args)
    report = train_and_export(recipe, data, args.out, seed=args.seed,
                              epochs=args.epochs, eval_n=args.eval_n,
                              enforce_floor=not args.synthetic)
    json.dump(report, sys.stdout, indent=1)
    print()
    return 0


def _cmd_export_dataset(args) -> int:
    from .quantize import QuantizedModel

    recipe = get_recipe(args.recipe)
    with open(args.model, "r", encoding="utf-8") as fh:
        meta = json.load(fh)["metadata"]
    scale = float(meta["input_scale"])
    qmodel = QuantizedModel(name=meta.get("name", args.recipe),
                            in_scale=scale, layers=[])
    train_x, train_y, test_x, test_y = load_dataset(recipe.dataset,
                                                    args.data_root)
    x, y = (train_x, train_y) if args.train_split else (test_x, test_y)
    export_dataset(qmodel, x, np.asarray(y), args.n, args.seed, args.out)
    print(f"wrote {args.n} images to {args.out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_export_dataset(args)
    except (DatasetUnavailableError, TrainingDiverged, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
