"""Run the full experiment grid and print the seed-averaged tables.

Tables produced (all on test-phase rounds):

* baseline: LinUCB, Fair-LinUCB (gamma 3) and Naive on arms 3:7, reward r
* gamma: Fair-LinUCB with gamma in {0, 1, 2, 3, 4}
* arm_ratio: LinUCB and Fair-LinUCB on arm ratios 7:3, 1:1 and 3:7
* ordering: LinUCB and Fair-LinUCB under group-first training orders (arms 7:3)
* r2: LinUCB and Fair-LinUCB under the gender-independent reward

Example::

    python scripts/reproduce_tables.py --seeds 10 --workers 1 --out runs/tables
"""

from __future__ import annotations

import argparse
from pathlib import Path

from fairbandit import runner

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _print(title: str, table: list[dict]) -> None:
    print(f"\n== {title}")
    print(f"{'policy':12s} {'gamma':>5s} {'ratio':>5s} {'ordering':18s} {'oracle':6s} "
          f"{'utility_loss':>16s} {'reward_diff':>16s} {'cmr+':>7s} {'cmr-':>7s}")
    for r in table:
        print(f"{r['policy']:12s} {r['gamma']:5g} {r['arm_ratio']:>5s} {r['ordering']:18s} {r['oracle']:6s} "
              f"{r['utility_loss_mean']:8.4f}±{r['utility_loss_std']:.4f} "
              f"{r['reward_difference_mean']:8.4f}±{r['reward_difference_std']:.4f} "
              f"{r['cmr_plus_mean']:7.4f} {r['cmr_minus_mean']:7.4f}")


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--seeds", type=int, default=10, help="number of seeds per cell")
    ap.add_argument("--workers", type=int, default=runner.available_workers())
    ap.add_argument("--out", type=Path, default=Path("runs/tables"))
    ap.add_argument("--only", nargs="*", choices=["baseline", "gamma", "arm_ratio", "ordering", "r2"])
    args = ap.parse_args(argv)

    base = runner.load_config(CONFIGS / "baseline_fair_linucb.yaml")
    seeds = list(range(args.seeds))
    todo = set(args.only or ["baseline", "gamma", "arm_ratio", "ordering", "r2"])

    if "baseline" in todo:
        _, table = runner.compare_naive(base, seeds, args.out / "baseline", args.workers, fair_gamma=3.0)
        _print("baseline (arms 3:7, reward r)", table)
    if "gamma" in todo:
        _, table = runner.sweep(base, "gamma", [0, 1, 2, 3, 4], seeds, args.out / "gamma", args.workers)
        _print("gamma sweep", table)
    if "arm_ratio" in todo:
        rows = []
        for kind in ("linucb", "fair_linucb"):
            cfg = base.replace(**{"policy.kind": kind})
            rows += runner.sweep(cfg, "arm_ratio", ["7:3", "1:1", "3:7"], seeds, args.out / "arm_ratio" / kind,
                                 args.workers)[1]
        _print("arm ratio", rows)
    if "ordering" in todo:
        rows = []
        for kind in ("linucb", "fair_linucb"):
            cfg = base.replace(**{"policy.kind": kind, "arms.ratio": "7:3"})
            rows += runner.sweep(cfg, "ordering", ["shuffled", "group_minus_first", "group_plus_first"], seeds,
                                 args.out / "ordering" / kind, args.workers)[1]
        _print("training order (arms 7:3)", rows)
    if "r2" in todo:
        cfg = base.replace(oracle="r2")
        _, table = runner.sweep(cfg, "policy", ["linucb", "fair_linucb"], seeds, args.out / "r2", args.workers)
        _print("reward r2", table)
    print(f"\nper-run logs and summary.csv files under {args.out}")


if __name__ == "__main__":
    main()
