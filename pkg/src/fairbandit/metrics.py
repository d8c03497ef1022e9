"""Evaluation quantities over round logs, and the Fair-LinUCB regret bound."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .groups import Group

DEFAULT_TAU = 0.01


@dataclass(frozen=True)
class RoundRecord:
    t: int
    user_id: int
    group: Group
    arm: int
    reward: float
    optimal_reward: float
    phase: str = "train"


def _filter(records: Iterable[RoundRecord], phase: str | None) -> list[RoundRecord]:
    if phase is None or phase == "all":
        return list(records)
    return [r for r in records if r.phase == phase]


def empirical_regret(records: Sequence[RoundRecord], phase: str | None = None) -> float:
    return math.fsum(r.optimal_reward - r.reward for r in _filter(records, phase))


def utility_loss(records: Sequence[RoundRecord], phase: str | None = None) -> float:
    rows = _filter(records, phase)
    if not rows:
        raise ValueError("utility loss of an empty log")
    return empirical_regret(rows) / len(rows)


def group_means(records: Sequence[RoundRecord], phase: str | None = None) -> dict[Group, float | None]:
    sums = {Group.PLUS: [], Group.MINUS: []}
    for r in _filter(records, phase):
        sums[r.group].append(r.reward)
    return {g: (math.fsum(v) / len(v) if v else None) for g, v in sums.items()}


def reward_difference(records: Sequence[RoundRecord], phase: str | None = None) -> float:
    """``|mean reward(s+) - mean reward(s-)|`` over the selected rounds."""
    means = group_means(records, phase)
    missing = [g.label for g, m in means.items() if m is None]
    if missing:
        raise ValueError(f"no rounds for group(s) {missing}")
    return abs(means[Group.PLUS] - means[Group.MINUS])


def cumulative_mean_curves(records: Sequence[RoundRecord], phase: str | None = None) -> dict[Group, list[tuple[int, float]]]:
    """Running mean reward per group as ``(t, mean)`` points, one point per round of that group."""
    curves: dict[Group, list[tuple[int, float]]] = {Group.PLUS: [], Group.MINUS: []}
    total = {Group.PLUS: 0.0, Group.MINUS: 0.0}
    count = {Group.PLUS: 0, Group.MINUS: 0}
    for r in _filter(records, phase):
        total[r.group] += r.reward
        count[r.group] += 1
        curves[r.group].append((r.t, total[r.group] / count[r.group]))
    return curves


# --------------------------------------------------------------------------- regret bound

@dataclass(frozen=True)
class BoundParams:
    T: int
    d: int
    L: float
    M: float
    lam: float = 1.0
    delta: float = 0.05
    Gamma: float = 0.0

    def __post_init__(self):
        for name in ("T", "d", "L", "M", "lam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.Gamma < 0:
            raise ValueError("Gamma must be non-negative")


def _log_det_growth(t: float, d: int, L: float, lam: float) -> float:
    return math.log1p(t * L**2 / (d * lam))


def alpha_schedule(t: float, lam: float, M: float, L: float, d: int, delta: float) -> float:
    """Confidence radius after ``t`` observations (``t = 0`` is the prior ``lam I``)."""
    return math.sqrt(lam) * M + math.sqrt(2 * math.log(1 / delta) + d * _log_det_growth(t, d, L, lam))


def theoretical_bound(p: BoundParams) -> float:
    """High-probability cumulative regret bound of Fair-LinUCB with ``gamma <= Gamma``."""
    growth = _log_det_growth(p.T, p.d, p.L, p.lam)
    return (
        math.sqrt(2 * p.T * p.d * growth)
        * (2 + p.Gamma)
        * alpha_schedule(p.T, p.lam, p.M, p.L, p.d, p.delta)
    )


# --------------------------------------------------------------------------- summaries and CSV

@dataclass
class Summary:
    policy: str
    gamma: float
    arm_ratio: str
    ordering: str
    oracle: str
    seed: int
    phase: str
    n_rounds: int
    utility_loss: float
    reward_difference: float
    cmr_plus: float
    cmr_minus: float
    within_tau: bool


def summarize(records: Sequence[RoundRecord], *, policy: str, gamma: float, arm_ratio: str,
              ordering: str, oracle: str, seed: int, phase: str = "test", tau: float = DEFAULT_TAU) -> Summary:
    rows = _filter(records, phase)
    means = group_means(rows)
    diff = reward_difference(rows)
    return Summary(policy, gamma, arm_ratio, ordering, oracle, seed, phase or "all", len(rows),
                   utility_loss(rows), diff, means[Group.PLUS], means[Group.MINUS], diff <= tau)


ROUND_COLUMNS = ("t", "phase", "user_id", "group", "arm", "reward", "optimal_reward", "cmr_plus", "cmr_minus")


def write_round_log(records: Sequence[RoundRecord], path: str | Path) -> None:
    """One row per round; floats use ``repr`` so they parse back bit-exactly."""
    total = {Group.PLUS: 0.0, Group.MINUS: 0.0}
    count = {Group.PLUS: 0, Group.MINUS: 0}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROUND_COLUMNS)
        for r in records:
            total[r.group] += r.reward
            count[r.group] += 1
            cmr = {g: (total[g] / count[g] if count[g] else 0.0) for g in total}
            w.writerow([r.t, r.phase, r.user_id, r.group.label, r.arm, repr(float(r.reward)),
                        repr(float(r.optimal_reward)), repr(float(cmr[Group.PLUS])), repr(float(cmr[Group.MINUS]))])


def read_round_log(path: str | Path) -> list[RoundRecord]:
    with open(path, newline="") as fh:
        return [
            RoundRecord(int(row["t"]), int(row["user_id"]), Group.parse(row["group"]), int(row["arm"]),
                        float(row["reward"]), float(row["optimal_reward"]), row["phase"])
            for row in csv.DictReader(fh)
        ]


SUMMARY_COLUMNS = tuple(f.name for f in fields(Summary))


def write_summary(rows: Sequence[Summary], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for s in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in asdict(s).items()})


def read_summary(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate(rows: Sequence[Summary], keys: Sequence[str] = ("policy", "gamma", "arm_ratio", "ordering", "oracle")) -> list[dict]:
    """Mean and sample std of the metric columns over seeds, grouped by ``keys``."""
    import statistics

    buckets: dict[tuple, list[Summary]] = {}
    for s in rows:
        buckets.setdefault(tuple(getattr(s, k) for k in keys), []).append(s)
    out = []
    for key, group in buckets.items():
        row = dict(zip(keys, key))
        row["n_seeds"] = len(group)
        for m in ("utility_loss", "reward_difference", "cmr_plus", "cmr_minus"):
            vals = [getattr(s, m) for s in group]
            row[f"{m}_mean"] = statistics.fmean(vals)
            row[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append(row)
    return out
