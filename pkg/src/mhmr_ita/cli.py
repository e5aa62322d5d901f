"""Command-line driver: train, eval, compare, attn."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .allocators import ALLOCATOR_KINDS
from .context import ScenarioSpec, sample_context
from .errors import ConfigurationError
from .harness import (
    EvalReport,
    TrainConfig,
    compare,
    evaluate,
    format_report,
    load_allocator,
    parse_report,
    train,
)
from .policy import PpoHyper
from .rng import derive


def _setting(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("setting must be k,i,j")
    k, i, j = (int(p) for p in parts)
    return k, i, j


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhmr-ita", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an allocator and write a checkpoint")
    p_train.add_argument("--variant", required=True, choices=ALLOCATOR_KINDS + ("bandit",))
    p_train.add_argument("--setting", type=_setting, default=(2, 2, 4), metavar="k,i,j")
    p_train.add_argument("--budget", type=int, required=True, help="training episodes")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--mode", choices=("expected", "stochastic"), default="expected")
    p_train.add_argument("--d", type=int, default=64, help="representation feature width")
    p_train.add_argument("--heads", type=int, default=4)
    p_train.add_argument("--gru-width", type=int, default=64)
    p_train.add_argument("--lr", type=float, default=3e-4)
    p_train.add_argument("--episodes-per-update", type=int, default=64)
    p_train.add_argument("--entropy-weight", type=float, default=0.01)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint over scenarios")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--scenarios", type=int, required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--mode", choices=("expected", "stochastic"), default="expected")
    p_eval.add_argument("--out", required=True, help="report file")

    p_cmp = sub.add_parser("compare", help="Welch test between two reports")
    p_cmp.add_argument("--a", required=True)
    p_cmp.add_argument("--b", required=True)
    p_cmp.add_argument("--metric", choices=("total", "poi"), default="total")

    p_attn = sub.add_parser("attn", help="export attention matrices of a checkpoint")
    p_attn.add_argument("--checkpoint", required=True)
    p_attn.add_argument("--setting", type=_setting, required=True, metavar="k,i,j")
    p_attn.add_argument("--seed", type=int, default=0)
    p_attn.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    k, i, j = args.setting
    config = TrainConfig(
        variant=args.variant,
        k=k,
        i=i,
        j=j,
        budget=args.budget,
        seed=args.seed,
        out_dir=args.out,
        mode=args.mode,
        d=args.d,
        heads=args.heads,
        gru_width=args.gru_width,
        hyper=PpoHyper(
            lr=args.lr,
            episodes_per_update=args.episodes_per_update,
            w_e=args.entropy_weight,
        ),
    )
    result = train(config)
    print(f"checkpoint: {result.checkpoint}")
    print(f"metrics: {result.metrics}")
    print(f"episodes: {result.episodes} updates: {result.updates}")
    return 0


def _cmd_eval(args) -> int:
    allocator = load_allocator(args.checkpoint)
    setting = (allocator.model.config.k, allocator.model.config.i, allocator.model.config.j) \
        if allocator.trainable else (allocator.k, allocator.i, allocator.j)
    report = evaluate(allocator, setting, args.scenarios, seed=args.seed, mode=args.mode)
    Path(args.out).write_text(format_report(report))
    mt, st = report.aps_total
    mp, sp = report.aps_poi
    print(f"allocator: {report.kind} scenarios: {report.n_scenarios}")
    print(f"APS_total: {mt:.4f} +- {st:.4f}")
    print(f"APS_poi: {mp:.4f} +- {sp:.4f}")
    print(f"report: {args.out}")
    return 0


def _cmd_compare(args) -> int:
    report_a = parse_report(Path(args.a).read_text())
    report_b = parse_report(Path(args.b).read_text())
    result = compare(report_a, report_b, args.metric)
    print(f"a: {result.kind_a} b: {result.kind_b} metric: {result.metric}")
    print(f"t = {result.welch.t:.6g}")
    print(f"df = {result.welch.df:.6g}")
    print(f"p = {result.welch.p:.6g}")
    print(f"stars = {result.stars or '(none)'}")
    return 0


def _cmd_attn(args) -> int:
    allocator = load_allocator(args.checkpoint)
    if not allocator.trainable:
        raise ConfigurationError("the random allocator has no attention to export")
    model = allocator.model
    k, i, j = args.setting
    spec = ScenarioSpec(k=k, i=i, j=j, uav_count=(i + 1) // 2, seed=derive(args.seed, 1))
    ctx = sample_context(spec)
    exports = []
    for option_index in range(len(model.hierarchy.options)):
        export = model.export_attention(ctx, option_index)
        exports.append(
            {
                "option": export.option_index,
                "target": export.target,
                "shape": list(export.matrix.shape),
                "values": [float(x) for x in export.matrix.reshape(-1)],
                "weights_shape": list(export.weights.shape),
                "weights": [float(x) for x in export.weights.reshape(-1)],
            }
        )
    Path(args.out).write_text(json.dumps(exports, indent=1))
    print(f"wrote {len(exports)} option exports to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "compare": _cmd_compare,
        "attn": _cmd_attn,
    }
    try:
        return handlers[args.command](args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
