"""Command-line front end.

Subcommands: golden, inject, campaign, report, gen-fixture, enumerate.
Data goes to stdout or to files; progress and diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import report as report_mod
from .campaign import CampaignConfig, run_campaign
from .datapath import SaConfig
from .faults import (FaultSpec, RegisterAddress, classify, enumerate_ffs,
                     execute_with_faults)
from .fixtures import FIXTURE_KINDS, gen_fixture
from .modelio import load_dataset, load_model, save_dataset, save_model
from .scheduler import compile_model, execute


def _parse_sa(text: str) -> SaConfig:
    try:
        rows, cols = text.lower().split("x")
        return SaConfig(rows=int(rows), cols=int(cols))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(
            f"array size must look like 2x2, got {text!r}") from exc


def _parse_seed(text: str) -> int:
    return int(text, 0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safsim",
        description="Cycle-accurate systolic-array simulator and "
                    "fault-injection campaign harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("golden", help="fault-free inference, logits as JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sa", type=_parse_sa, required=True, metavar="RxC")
    p.add_argument("--image", type=int, default=None,
                   help="single image index (default: all)")
    p.add_argument("--trace", default=None,
                   help="write a per-cycle register trace to this file")

    p = sub.add_parser("inject", help="single fault injection, outcome as JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sa", type=_parse_sa, required=True, metavar="RxC")
    p.add_argument("--image", type=int, required=True)
    p.add_argument("--cycle", type=int, required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--instance", type=int, required=True)
    p.add_argument("--bit", type=int, required=True)

    p = sub.add_parser("campaign", help="Monte-Carlo fault-injection campaign")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sa", type=_parse_sa, required=True, metavar="RxC")
    p.add_argument("--iters", type=int, required=True,
                   help="injections per image")
    p.add_argument("--seed", type=_parse_seed, required=True)
    p.add_argument("--stratified", action="store_true",
                   help="equal injection counts per register group")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="render stats files to CSV/SVG")
    p.add_argument("--stats", nargs="+", required=True,
                   help="stats JSON file(s); several files become grouped bars")
    p.add_argument("--svg", required=True)

    p = sub.add_parser("gen-fixture", help="write a synthetic model + dataset")
    p.add_argument("--kind", choices=FIXTURE_KINDS, required=True)
    p.add_argument("--seed", type=_parse_seed, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--hard", action="store_true",
                   help="keep the narrowest-margin images (low-confidence dataset)")

    p = sub.add_parser("enumerate", help="print the FF address map as JSONL")
    p.add_argument("--sa", type=_parse_sa, required=True, metavar="RxC")
    return parser


def _cmd_golden(args) -> int:
    model = load_model(args.model)
    images = load_dataset(args.dataset)
    program = compile_model(model, args.sa)
    indices = range(len(images)) if args.image is None else [args.image]
    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        for i in indices:
            logits = execute(program, images[i].pixels, trace=trace_fh)
            print(json.dumps({"image": i,
                              "model_cycles": program.total_cycles,
                              "logits": [int(v) for v in logits]},
                             separators=(",", ":")))
    finally:
        if trace_fh:
            trace_fh.close()
    return 0


def _cmd_inject(args) -> int:
    model = load_model(args.model)
    images = load_dataset(args.dataset)
    program = compile_model(model, args.sa)
    fault = FaultSpec(RegisterAddress(args.group, args.instance, args.bit),
                      args.cycle)
    pixels = images[args.image].pixels
    golden = execute(program, pixels)
    faulty = execute_with_faults(program, pixels, [fault])
    outcome = classify(golden, faulty)
    print(json.dumps({"image": args.image, "cycle": args.cycle,
                      "group": args.group, "instance": args.instance,
                      "bit": args.bit, "outcome": outcome.kind.value,
                      "logit_delta": outcome.logit_delta,
                      "golden": [int(v) for v in golden],
                      "faulty": [int(v) for v in faulty]},
                     separators=(",", ":")))
    return 0


def _cmd_campaign(args) -> int:
    model = load_model(args.model)
    images = load_dataset(args.dataset)
    cfg = CampaignConfig(model=model, images=images, sa=args.sa,
                         iterations=args.iters, seed=args.seed,
                         stratified=args.stratified, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)

    def progress(i):
        print(f"image {i} done", file=sys.stderr)

    result = run_campaign(cfg, progress=progress)
    meta = {"model": model.name, "sa": str(args.sa), "iterations": args.iters,
            "images": len(images), "seed": args.seed,
            "sampling": "stratified-by-group" if args.stratified else "uniform-bit"}
    report_mod.write_records_jsonl(result, os.path.join(args.out, "records.jsonl"))
    report_mod.write_stats_csv(result.stats, os.path.join(args.out, "stats.csv"))
    report_mod.write_stats_json(result.stats, os.path.join(args.out, "stats.json"),
                                meta=meta)
    print(f"wrote {len(result.records)} records to {args.out}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    docs = []
    for path in args.stats:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        meta = doc.get("meta", {})
        label = " ".join(str(meta[k]) for k in ("model", "sa") if k in meta) \
            or os.path.basename(path)
        docs.append((label, doc))
    report_mod.render_stats_figure(docs, args.svg)
    print(f"wrote {args.svg}", file=sys.stderr)
    return 0


def _cmd_gen_fixture(args) -> int:
    model, images = gen_fixture(args.kind, args.seed, hard=args.hard)
    os.makedirs(args.out, exist_ok=True)
    save_model(model, os.path.join(args.out, "model.json"))
    save_dataset(images, os.path.join(args.out, "dataset.json"))
    print(f"wrote fixture {args.kind} to {args.out}", file=sys.stderr)
    return 0


def _cmd_enumerate(args) -> int:
    for i, addr in enumerate(enumerate_ffs(args.sa)):
        print(json.dumps({"index": i, "group": addr.group,
                          "instance": addr.instance, "bit": addr.bit},
                         separators=(",", ":")))
    return 0


_COMMANDS = {
    "golden": _cmd_golden,
    "inject": _cmd_inject,
    "campaign": _cmd_campaign,
    "report": _cmd_report,
    "gen-fixture": _cmd_gen_fixture,
    "enumerate": _cmd_enumerate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
