"""Fair-LinUCB under group-first training orders: literal vs neutral arm gaps.

For each ordering and ``delta_mode`` the reward difference is reported on the
test rounds and on all rounds.  In the literal mode an arm's mean for a group
it has not served yet counts as zero; the neutral mode treats the arm gap as
zero until the arm has served both groups.

Example::

    python scripts/ordering_diagnostics.py --seeds 3
"""

from __future__ import annotations

import argparse
import statistics
from pathlib import Path

from fairbandit import runner
from fairbandit.metrics import reward_difference, utility_loss

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--gamma", type=float, default=3.0)
    ap.add_argument("--ratio", default="7:3")
    args = ap.parse_args(argv)

    base = runner.load_config(CONFIGS / "ordering_minus_first.yaml").replace(
        **{"policy.gamma": args.gamma, "arms.ratio": args.ratio})
    print(f"{'ordering':18s} {'delta_mode':10s} {'rd test':>8s} {'rd all':>8s} {'rd train':>8s} {'ul test':>8s}")
    for ordering in ("group_minus_first", "group_plus_first", "shuffled"):
        for mode in ("literal", "neutral"):
            cfg = base.replace(ordering=ordering, **{"policy.delta_mode": mode})
            cols = {"test": [], "all": [], "train": [], "ul": []}
            for seed in range(args.seeds):
                recs = runner.run(cfg, seed).records
                cols["test"].append(reward_difference(recs, "test"))
                cols["all"].append(reward_difference(recs, None))
                cols["train"].append(reward_difference(recs, "train"))
                cols["ul"].append(utility_loss(recs, "test"))
            m = {k: statistics.fmean(v) for k, v in cols.items()}
            print(f"{ordering:18s} {mode:10s} {m['test']:8.4f} {m['all']:8.4f} {m['train']:8.4f} {m['ul']:8.4f}")


if __name__ == "__main__":
    main()
