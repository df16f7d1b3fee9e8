"""Command line: train on a trajectory TSV, export trends for a history file,
or serve a lockstep directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import extract_windows
from .export import export_trends, serve_lockstep
from .model import load_checkpoint
from .train import TrainConfig, train


def cmd_train(args) -> int:
    windows = extract_windows(args.data, t_obs=args.t_obs, t_p=args.t_p,
                              stride=args.stride)
    if not windows:
        print("error: no usable training windows", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = TrainConfig(
        epochs=args.epochs, lr=args.lr, dt=args.dt, seed=args.seed,
        w_p=args.wp, w_f=args.wf, w_v=args.wv, hidden=args.hidden,
        log_path=str(out / "training_log.csv"),
        checkpoint_path=str(out / "model.pt"),
    )
    _, history = train(windows, config)
    first, last = history[0], history[-1]
    print(f"train: {len(windows)} windows, {args.epochs} epochs, "
          f"l_p {first['l_p']:.4g} -> {last['l_p']:.4g} -> {out}")
    return 0


def cmd_export(args) -> int:
    model = load_checkpoint(args.model)
    count = export_trends(model, args.history, args.out, dt=args.dt,
                          made_at_step=args.made_at_step)
    print(f"export: {count} agents -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    model = load_checkpoint(args.model)
    served = serve_lockstep(model, args.dir, cycles=args.cycles, dt=args.dt,
                            timeout=args.timeout)
    print(f"serve: answered {served} cycles in {args.dir}")
    return 0 if served > 0 else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trendnet",
        description="Physics-informed trend predictor for the crowd simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train")
    p.add_argument("--data", required=True, help="trajectory TSV (frame id x y)")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--dt", type=float, default=0.4)
    p.add_argument("--t-obs", type=int, default=8)
    p.add_argument("--t-p", type=int, default=12)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wp", type=float, default=1.0)
    p.add_argument("--wf", type=float, default=0.1)
    p.add_argument("--wv", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export")
    p.add_argument("--model", required=True, help="checkpoint from train")
    p.add_argument("--history", required=True, help="simulator history JSONL")
    p.add_argument("--out", required=True, help="trend JSONL to write")
    p.add_argument("--dt", type=float, default=0.4)
    p.add_argument("--made-at-step", type=int, default=0)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve")
    p.add_argument("--model", required=True)
    p.add_argument("--dir", required=True, help="lockstep exchange directory")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--dt", type=float, default=0.4)
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
