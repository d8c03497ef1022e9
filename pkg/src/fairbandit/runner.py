"""Config-driven experiment orchestration.

A run draws users and arms from its seed, streams users through the policy
(train phase then test phase, learning throughout), and records one
:class:`~fairbandit.metrics.RoundRecord` per user.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from . import env as envmod
from .groups import Group
from .metrics import (
    DEFAULT_TAU, RoundRecord, Summary, aggregate, read_round_log, summarize,
    write_round_log, write_summary,
)
from .policy import DEFAULT_ALPHA, ArmState, BanditPolicy, PolicyConfig, normalize_kind

log = logging.getLogger(__name__)

SWEEP_AXES = ("gamma", "arm_ratio", "ordering", "policy", "oracle")


@dataclass
class PolicySection:
    kind: str = "linucb"
    alpha: float = DEFAULT_ALPHA
    gamma: float = 0.0
    lam: float = 1.0
    delta_mode: str = "literal"
    solver: str = "sherman_morrison"
    naive_threshold: float = 0.3


@dataclass
class UserSection:
    source: str = "synthetic"
    train_plus: int = 1500
    train_minus: int = 1500
    test_plus: int = 1000
    test_minus: int = 1000

    @property
    def split(self) -> envmod.Split:
        return envmod.Split(self.train_plus, self.train_minus, self.test_plus, self.test_minus)


@dataclass
class ArmSection:
    source: str = "synthetic"
    ratio: str = "3:7"
    size: int = 100


@dataclass
class ExperimentConfig:
    seed: int = 0
    repetitions: int = 10
    oracle: str = "r"
    noise_sd: float = 0.0
    ordering: str = "shuffled"
    tau: float = DEFAULT_TAU
    summary_phase: str = "test"
    out: str | None = None
    policy: PolicySection = field(default_factory=PolicySection)
    users: UserSection = field(default_factory=UserSection)
    arms: ArmSection = field(default_factory=ArmSection)

    def validate(self) -> "ExperimentConfig":
        self.policy.kind = normalize_kind(self.policy.kind)
        if self.oracle not in envmod.REWARD_WEIGHTS:
            raise ValueError(f"unknown oracle {self.oracle!r}")
        if self.ordering not in envmod.ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}; expected one of {envmod.ORDERINGS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        self.arms.ratio = "{}:{}".format(*envmod.parse_ratio(self.arms.ratio))
        envmod._speaker_counts(self.arms.size, self.arms.ratio)
        for src in (self.users.source, self.arms.source):
            if src != "synthetic" and not Path(src).is_file():
                raise ValueError(f"data source {src!r} not found")
        sp = self.users.split
        if min(sp.train_plus, sp.train_minus, sp.test_plus, sp.test_minus) < 0:
            raise ValueError("split sizes must be non-negative")
        if sp.n_train + sp.n_test == 0:
            raise ValueError("no users requested")
        if self.summary_phase not in ("train", "test", "all"):
            raise ValueError(f"unknown summary_phase {self.summary_phase!r}")
        PolicyConfig(kind="linucb", alpha=self.policy.alpha, gamma=self.policy.gamma, lam=self.policy.lam,
                     delta_mode=self.policy.delta_mode, solver=self.policy.solver)
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"policy.gamma": 2})``."""
        data = to_dict(self)
        for key, value in changes.items():
            node = data
            *head, last = key.split(".")
            for h in head:
                node = node[h]
            node[last] = value
        return from_dict(data)


def to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def from_dict(data: dict[str, Any]) -> ExperimentConfig:
    data = dict(data or {})
    sections = {"policy": PolicySection, "users": UserSection, "arms": ArmSection}
    kwargs: dict[str, Any] = {}
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    for key, value in data.items():
        if key in sections:
            cls = sections[key]
            sub_known = {f.name for f in dataclasses.fields(cls)}
            bad = set(value or {}) - sub_known
            if bad:
                raise ValueError(f"unknown keys in [{key}]: {sorted(bad)}")
            kwargs[key] = cls(**(value or {}))
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs).validate()


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        return from_dict(yaml.safe_load(fh) or {})


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)


# --------------------------------------------------------------------------- environment wiring

@dataclass
class World:
    users: list[envmod.UserRecord]
    arms: list[envmod.ArmRecord]
    pool: envmod.ArmPool
    space: envmod.FeatureSpace
    oracle: envmod.RewardOracle
    stream: list[envmod.UserRecord]

    def user(self, uid: int) -> envmod.UserRecord:
        return self.users[uid]


def build_world(cfg: ExperimentConfig, seed: int) -> World:
    user_src = None if cfg.users.source == "synthetic" else cfg.users.source
    arm_src = None if cfg.arms.source == "synthetic" else cfg.arms.source
    users = envmod.load_users(user_src, cfg.users.split, seed)
    arms = envmod.load_arms(arm_src, cfg.arms.ratio, cfg.arms.size, seed)
    space = envmod.feature_space(users, arms)
    oracle = envmod.RewardOracle.for_kind(cfg.oracle, space, cfg.noise_sd)
    stream = envmod.order_stream(users, cfg.ordering, seed)
    return World(users, arms, envmod.ArmPool(arms), space, oracle, stream)


def make_policy(cfg: ExperimentConfig, world: World) -> BanditPolicy:
    p = cfg.policy
    mask = None
    if p.kind == "naive":
        train = [u for u in world.users if u.phase == "train"] or world.users
        mask = frozenset(envmod.correlation_mask(train, p.naive_threshold, world.space))
    return BanditPolicy(PolicyConfig(
        kind=p.kind, alpha=p.alpha, gamma=p.gamma if p.kind == "fair_linucb" else 0.0, lam=p.lam,
        dim=world.space.dim, sensitive_index=world.space.sensitive_index, feature_mask=mask,
        delta_mode=p.delta_mode, solver=p.solver,
    ))


# --------------------------------------------------------------------------- run

@dataclass
class RunResult:
    config: ExperimentConfig
    seed: int
    records: list[RoundRecord]
    summary: Summary
    policy: BanditPolicy


def run(cfg: ExperimentConfig, seed: int | None = None, out: str | Path | None = None,
        save_state: bool = False) -> RunResult:
    """One seeded interaction run; writes ``rounds.csv``, ``summary.csv`` and
    ``config.resolved`` under ``out`` when given."""
    seed = cfg.seed if seed is None else int(seed)
    world = build_world(cfg, seed)
    policy = make_policy(cfg, world)
    noise_rng = envmod.rng_stream(seed, "reward-noise")
    ids = world.pool.ids
    records: list[RoundRecord] = []
    for t, user in enumerate(world.stream):
        X = world.pool.contexts(user)
        expected = world.oracle.expected(X)
        arm, _ = policy.select_arm(X, user.group, arm_ids=ids)
        k = int(arm)  # pool ids are 0..K-1 in order
        r = float(expected[k])
        if cfg.noise_sd > 0:
            r = float(np.clip(r + noise_rng.normal(0.0, cfg.noise_sd), 0.0, 1.0))
        policy.update(arm, X[k], r, user.group)
        records.append(RoundRecord(t, user.id, user.group, arm, r, float(expected.max()), user.phase))
    summary = summarize_run(cfg, seed, records)
    result = RunResult(cfg, seed, records, summary, policy)
    if out is not None:
        persist(result, out, save_state)
    return result


def summarize_run(cfg: ExperimentConfig, seed: int, records: Sequence[RoundRecord]) -> Summary:
    return summarize(
        records, policy=cfg.policy.kind, gamma=float(cfg.policy.gamma if cfg.policy.kind == "fair_linucb" else 0.0),
        arm_ratio=cfg.arms.ratio, ordering=cfg.ordering, oracle=cfg.oracle, seed=seed,
        phase=None if cfg.summary_phase == "all" else cfg.summary_phase, tau=cfg.tau,
    )


def persist(result: RunResult, out: str | Path, save_state: bool = False) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    write_round_log(result.records, d / "rounds.csv")
    write_summary([result.summary], d / "summary.csv")
    resolved = result.config.replace(seed=result.seed)
    (d / "config.resolved").write_text(dump_config(resolved))
    if save_state:
        result.policy.export_state(d / "state")
    return d


def replay_summary(run_dir: str | Path) -> Summary:
    """Recompute the summary row from a persisted run directory."""
    d = Path(run_dir)
    cfg = load_config(d / "config.resolved")
    return summarize_run(cfg, cfg.seed, read_round_log(d / "rounds.csv"))


def reconstruct_arm_states(cfg: ExperimentConfig, seed: int, records: Sequence[RoundRecord]) -> dict[int, ArmState]:
    """Batch-rebuild every arm's statistics from a round log.

    ``A = lam I + D^T D`` and ``b = D^T r`` are formed from the stacked history of
    each arm rather than replayed one update at a time.
    """
    world = build_world(cfg, seed)
    policy = make_policy(cfg, world)
    d = world.space.dim
    rows: dict[int, list[tuple[np.ndarray, float, Group]]] = {int(a): [] for a in world.pool.ids}
    for r in records:
        user = world.user(r.user_id)
        x = envmod.build_context(user, world.arms[r.arm])
        rows[r.arm].append((policy.prepare(x), r.reward, r.group))
    states = {}
    for arm, hist in rows.items():
        st = ArmState.fresh(d, cfg.policy.lam)
        if hist:
            D = np.stack([h[0] for h in hist])
            rv = np.array([h[1] for h in hist])
            st.A = st.A + D.T @ D
            st.b = D.T @ rv
            for _, rew, g in hist:
                st.group_sum[int(g)] += rew
                st.group_count[int(g)] += 1
        states[arm] = st
    return states


# --------------------------------------------------------------------------- sweeps

def _axis_override(axis: str, value) -> dict[str, Any]:
    if axis == "gamma":
        return {"policy.gamma": float(value)}
    if axis == "arm_ratio":
        return {"arms.ratio": str(value)}
    if axis == "ordering":
        return {"ordering": str(value)}
    if axis == "policy":
        return {"policy.kind": str(value)}
    if axis == "oracle":
        return {"oracle": str(value)}
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _run_job(job: tuple[ExperimentConfig, int, str | None]) -> Summary:
    cfg, seed, out = job
    return run(cfg, seed, out).summary


def run_many(jobs: Sequence[tuple[ExperimentConfig, int, str | None]], workers: int = 1) -> list[Summary]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_job, jobs))


def default_seeds(cfg: ExperimentConfig) -> list[int]:
    return [cfg.seed + i for i in range(cfg.repetitions)]


def sweep(cfg: ExperimentConfig, axis: str, values: Sequence, seeds: Sequence[int] | None = None,
          out: str | Path | None = None, workers: int = 1) -> tuple[list[Summary], list[dict]]:
    """Every (value, seed) pair; returns per-run rows and the seed-averaged table."""
    seeds = list(default_seeds(cfg) if seeds is None else seeds)
    jobs = []
    for v in values:
        sub = cfg.replace(**_axis_override(axis, v))
        for s in seeds:
            run_dir = None if out is None else str(Path(out) / f"{axis}={v}".replace(":", "-") / f"seed={s}")
            jobs.append((sub, s, run_dir))
    rows = run_many(jobs, workers)
    table = aggregate(rows)
    if out is not None:
        write_summary(rows, Path(out) / "runs.csv")
        write_table(table, Path(out) / "summary.csv")
    return rows, table


def compare_naive(cfg: ExperimentConfig, seeds: Sequence[int] | None = None, out: str | Path | None = None,
                  workers: int = 1, fair_gamma: float | None = None) -> tuple[list[Summary], list[dict]]:
    """LinUCB, Fair-LinUCB and Naive on one protocol (the three-way baseline table)."""
    seeds = list(default_seeds(cfg) if seeds is None else seeds)
    gamma = cfg.policy.gamma if fair_gamma is None else fair_gamma
    variants = {
        "linucb": cfg.replace(**{"policy.kind": "linucb"}),
        "fair_linucb": cfg.replace(**{"policy.kind": "fair_linucb", "policy.gamma": gamma}),
        "naive": cfg.replace(**{"policy.kind": "naive"}),
    }
    jobs = [(c, s, None if out is None else str(Path(out) / name / f"seed={s}"))
            for name, c in variants.items() for s in seeds]
    rows = run_many(jobs, workers)
    table = aggregate(rows)
    if out is not None:
        write_summary(rows, Path(out) / "runs.csv")
        write_table(table, Path(out) / "summary.csv")
    return rows, table


def write_table(table: Sequence[dict], path: str | Path) -> None:
    import csv

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if not table:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, list(table[0]), lineterminator="\n")
        w.writeheader()
        for row in table:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def available_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))
