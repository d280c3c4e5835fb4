"""Command line: ``boostexplain explain ...`` and ``boostexplain gen-discrepancy ...``.

``explain`` exits with 0 when every instance finished, 2 when some oracle call
timed out and 1 on an unusable model or instance file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .batch import MODES, BatchConfig, run_batch
from .generators import gen_discrepancy_model
from .model import BoostedTree
from .serialize import NATIVE, XGB, ModelFormatError, load_instances, load_model, load_terms, save_model
from .ts import INSTANCE_ORDER, RANDOM


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boostexplain", description="Abductive explanations for boosted trees.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("explain", help="explain every instance of a CSV file")
    e.add_argument("--model", required=True)
    e.add_argument("--instances", required=True, help="CSV, header = attribute names")
    e.add_argument("--mode", choices=MODES, default="ts-sr")
    e.add_argument("--runs", type=int, default=1000, help="TS orderings per instance")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--timeout", type=float, default=None, help="seconds per instance")
    e.add_argument("--tie-class", type=int, default=None, help="override the model's tie class")
    e.add_argument("--format", choices=(NATIVE, XGB), default=NATIVE)
    e.add_argument("--terms", help="check mode: JSON list of kept attribute names per instance")
    e.add_argument("--order", choices=(INSTANCE_ORDER, RANDOM), default=INSTANCE_ORDER,
                   help="removal order of the SR stage")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", default="-", help="report path, '-' for stdout")

    g = sub.add_parser("gen-discrepancy", help="write the model whose TS explanations keep everything")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "gen-discrepancy":
        save_model(gen_discrepancy_model(args.n), args.out)
        return 0

    try:
        bt = load_model(args.model, args.format)
        if args.tie_class is not None:
            bt = BoostedTree(bt.schema, bt.forests, tie_class=args.tie_class)
        instances = load_instances(args.instances, bt.schema)
        terms = load_terms(args.terms, bt.schema, instances) if args.terms else None
    except (OSError, ModelFormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.mode == "check" and terms is None:
        print("error: --mode check needs --terms", file=sys.stderr)
        return 1

    cfg = BatchConfig(runs=args.runs, seed=args.seed, timeout=args.timeout,
                      sr_ordering=args.order, workers=args.workers)
    report = run_batch(bt, instances, args.mode, cfg, terms)
    text = report.to_json() + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 2 if report.any_timeout else 0


if __name__ == "__main__":
    sys.exit(main())
