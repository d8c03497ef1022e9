"""``fairbandit run | sweep | compare-naive``"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import runner

log = logging.getLogger("fairbandit")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--policy", help="linucb | fair_linucb | naive")
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--arm-ratio", help="s+:s- speaker ratio, e.g. 3:7")
    p.add_argument("--ordering", help="shuffled | group_minus_first | group_plus_first")
    p.add_argument("--oracle", help="r | r2")
    p.add_argument("--repetitions", type=int, help="number of seeds for sweep / compare-naive")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairbandit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one seeded run")
    _add_common(p_run)
    p_run.add_argument("--save-state", action="store_true", help="also export the final policy state")

    p_sweep = sub.add_parser("sweep", help="cross-product of one axis and the seeds")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=runner.SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")

    p_naive = sub.add_parser("compare-naive", help="LinUCB vs Fair-LinUCB vs Naive")
    _add_common(p_naive)
    return parser


def resolve_config(args: argparse.Namespace) -> runner.ExperimentConfig:
    cfg = runner.load_config(args.config) if args.config else runner.ExperimentConfig().validate()
    overrides = {}
    for flag, key in (("seed", "seed"), ("policy", "policy.kind"), ("gamma", "policy.gamma"),
                      ("alpha", "policy.alpha"), ("arm_ratio", "arms.ratio"), ("ordering", "ordering"),
                      ("oracle", "oracle"), ("repetitions", "repetitions")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v
    if args.out is not None:
        overrides["out"] = str(args.out)
    return cfg.replace(**overrides) if overrides else cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, TypeError, OSError) as exc:
        print(f"fairbandit: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out) if cfg.out else Path("runs") / args.command
    try:
        if args.command == "run":
            res = runner.run(cfg, out=out, save_state=args.save_state)
            s = res.summary
            print(f"{s.policy} gamma={s.gamma:g} ratio={s.arm_ratio} ordering={s.ordering} oracle={s.oracle} "
                  f"seed={s.seed}: utility_loss={s.utility_loss:.4f} reward_difference={s.reward_difference:.4f}")
        elif args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            _, table = runner.sweep(cfg, args.axis, values, out=out, workers=args.workers)
            _print_table(table)
        else:
            _, table = runner.compare_naive(cfg, out=out, workers=args.workers)
            _print_table(table)
        if args.command != "run":
            (out / "config.resolved").write_text(runner.dump_config(cfg))
    except (ValueError, KeyError) as exc:
        print(f"fairbandit: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fairbandit: I/O error: {exc}", file=sys.stderr)
        return 1
    print(f"outputs written to {out}")
    return 0


def _print_table(table: list[dict]) -> None:
    for row in table:
        print(f"{row['policy']:12s} gamma={row['gamma']:<4g} ratio={row['arm_ratio']:4s} {row['ordering']:18s} "
              f"{row['oracle']:3s} utility_loss={row['utility_loss_mean']:.4f}±{row['utility_loss_std']:.4f} "
              f"reward_difference={row['reward_difference_mean']:.4f}±{row['reward_difference_std']:.4f}")


__all__ = ["main", "build_parser"]
