"""LinUCB, Fair-LinUCB and the feature-masking Naive baseline.

All three share one disjoint-model implementation: every arm keeps its own
ridge statistics ``A_a = lam I + sum x x^T`` and ``b_a = sum r x``.  Fair-LinUCB
adds a per-arm boost built from the group-conditional reward means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_solve

from . import linalg
from .groups import Group

Array = NDArray[np.float64]

DEFAULT_DELTA = 0.05
DEFAULT_ALPHA = 1.0 + math.sqrt(math.log(2.0 / DEFAULT_DELTA) / 2.0)

KINDS = ("linucb", "fair_linucb", "naive")
_KIND_ALIASES = {
    "linucb": "linucb", "fair_linucb": "fair_linucb", "fairlinucb": "fair_linucb",
    "fair-linucb": "fair_linucb", "fair": "fair_linucb", "naive": "naive",
}


def normalize_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown policy kind {kind!r}; expected one of {KINDS}") from None


@dataclass(frozen=True)
class PolicyConfig:
    """Hyper-parameters of a bandit policy.

    ``gamma`` only matters for Fair-LinUCB and ``feature_mask`` only for Naive.
    ``delta_mode="literal"`` reports a group mean with no observations as 0;
    ``"neutral"`` keeps an arm's gap at 0 until it has served both groups.
    """

    kind: str = "linucb"
    alpha: float = DEFAULT_ALPHA
    gamma: float = 0.0
    lam: float = 1.0
    dim: int | None = None
    sensitive_index: int | None = None
    feature_mask: frozenset[int] | None = None
    delta_mode: str = "literal"
    solver: str = "sherman_morrison"

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.feature_mask is not None:
            object.__setattr__(self, "feature_mask", frozenset(int(i) for i in self.feature_mask))
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.kind == "naive" and self.feature_mask is None:
            raise ValueError("the naive policy needs a feature_mask")
        if self.kind != "naive" and self.feature_mask:
            raise ValueError("feature_mask is only used by the naive policy")
        if self.delta_mode not in ("literal", "neutral"):
            raise ValueError(f"unknown delta_mode {self.delta_mode!r}")
        if self.solver not in ("sherman_morrison", "cholesky"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass
class GroupRewardTracker:
    """Running reward sums and counts for the two groups."""

    sums: Array = field(default_factory=lambda: np.zeros(2))
    counts: NDArray[np.int64] = field(default_factory=lambda: np.zeros(2, dtype=np.int64))

    def add(self, group: Group, r: float) -> None:
        self.sums[int(group)] += r
        self.counts[int(group)] += 1

    def mean(self, group: Group) -> float:
        g = int(group)
        return float(self.sums[g] / self.counts[g]) if self.counts[g] else 0.0

    @property
    def gap(self) -> float:
        """``mean(s+) - mean(s-)``."""
        return self.mean(Group.PLUS) - self.mean(Group.MINUS)


@dataclass
class ArmState:
    A: Array
    b: Array
    group_sum: Array = field(default_factory=lambda: np.zeros(2))
    group_count: NDArray[np.int64] = field(default_factory=lambda: np.zeros(2, dtype=np.int64))

    @classmethod
    def fresh(cls, d: int, lam: float = 1.0) -> "ArmState":
        return cls(linalg.identity_scaled(d, lam), np.zeros(d))

    def mean(self, group: Group) -> float:
        g = int(group)
        return float(self.group_sum[g] / self.group_count[g]) if self.group_count[g] else 0.0

    def gap(self, delta_mode: str = "literal") -> float:
        if delta_mode == "neutral" and self.group_count.min() == 0:
            return 0.0
        return self.mean(Group.PLUS) - self.mean(Group.MINUS)

    def observe(self, x, r: float, group: Group) -> None:
        self.A = linalg.rank1_update(self.A, x)
        self.b = self.b + r * np.asarray(x, dtype=float)
        self.group_sum[int(group)] += r
        self.group_count[int(group)] += 1


@dataclass
class SelectionTrace:
    """Per-arm terms of one selection, in the order the arms were presented."""

    arm_ids: NDArray[np.int64]
    estimate: Array
    width: Array
    penalty: Array
    score: Array
    chosen: int
    min_width_arm: int


# --------------------------------------------------------------------------- scalar building blocks

def estimate_theta(arm: ArmState) -> Array:
    return linalg.solve(arm.A, arm.b)


def ucb_score(arm: ArmState, x, alpha: float) -> tuple[float, float]:
    """``(theta_hat . x, alpha * ||x||_{A^-1})``."""
    est = float(estimate_theta(arm) @ np.asarray(x, dtype=float))
    return est, alpha * linalg.weighted_norm(arm.A, x)


def sign(v: float) -> float:
    return float(np.sign(v))


def arm_penalty(arm: ArmState, tracker: GroupRewardTracker, delta_mode: str = "literal") -> float:
    """Fairness penalty ``-sign(global gap) * arm gap``; positive for gap-closing arms."""
    return -sign(tracker.gap) * arm.gap(delta_mode)


def map_penalty(gamma: float, fairness: float, min_width: float) -> float:
    """Rescale a penalty in ``[-1, 1]`` to ``[0, gamma * min_width]``."""
    return min_width / 2.0 * (fairness + 1.0) * gamma


def _argmax_lowest_id(values: Array, ids: NDArray[np.int64]) -> int:
    best = values.max()
    return int(ids[values == best].min())


def _argmin_lowest_id(values: Array, ids: NDArray[np.int64]) -> int:
    best = values.min()
    return int(ids[values == best].min())


# --------------------------------------------------------------------------- policy

class BanditPolicy:
    """Disjoint linear UCB policy; ``config.kind`` picks the selection rule.

    Arm statistics live in stacked arrays indexed by slot; an arm id gets a slot
    (``A = lam I``, ``b = 0``) the first time it is offered.
    """

    def __init__(self, config: PolicyConfig):
        self.config = config
        self.tracker = GroupRewardTracker()
        self._slot: dict[int, int] = {}
        self._ids: list[int] = []
        self._d = config.dim
        self._mask_idx: NDArray[np.int64] | None = None
        if config.feature_mask is not None:
            self._mask_idx = np.array(sorted(config.feature_mask), dtype=np.int64)

    # -- storage
    def _allocate(self, d: int) -> None:
        self._d = d
        self.A = np.empty((0, d, d))
        self.A_inv = np.empty((0, d, d))
        self.b = np.empty((0, d))
        self.theta = np.empty((0, d))
        self.group_sum = np.empty((0, 2))
        self.group_count = np.empty((0, 2), dtype=np.int64)
        self._chol: list = []

    def _ensure_arms(self, ids: Sequence[int], d: int) -> NDArray[np.int64]:
        if not hasattr(self, "A"):
            if self._d is not None and self._d != d:
                raise ValueError(f"context dimension {d} does not match configured {self._d}")
            self._allocate(d)
        elif d != self._d:
            raise ValueError(f"context dimension {d} does not match {self._d}")
        new = [i for i in ids if i not in self._slot]
        if new:
            lam = self.config.lam
            n = len(new)
            for i in new:
                self._slot[i] = len(self._ids)
                self._ids.append(i)
            eye = linalg.identity_scaled(d, lam)
            self.A = np.concatenate([self.A, np.broadcast_to(eye, (n, d, d))])
            self.A_inv = np.concatenate([self.A_inv, np.broadcast_to(np.eye(d) / lam, (n, d, d))])
            self.b = np.concatenate([self.b, np.zeros((n, d))])
            self.theta = np.concatenate([self.theta, np.zeros((n, d))])
            self.group_sum = np.concatenate([self.group_sum, np.zeros((n, 2))])
            self.group_count = np.concatenate([self.group_count, np.zeros((n, 2), dtype=np.int64)])
            if self.config.solver == "cholesky":
                self._chol.extend(linalg.cholesky(eye) for _ in range(n))
        return np.array([self._slot[i] for i in ids], dtype=np.int64)

    @property
    def arm_ids(self) -> list[int]:
        return list(self._ids)

    def prepare(self, contexts: Array) -> Array:
        """Contexts as the model sees them (masked features zeroed for Naive)."""
        X = np.asarray(contexts, dtype=np.float64)
        if self._mask_idx is not None:
            X = X.copy()
            X[..., self._mask_idx] = 0.0
        return X

    def _group_of(self, contexts: Array, user_group) -> Group:
        if user_group is not None:
            return Group.parse(user_group)
        if self.config.sensitive_index is None:
            raise ValueError("user_group not given and no sensitive_index configured")
        return Group.PLUS if contexts[0, self.config.sensitive_index] > 0.5 else Group.MINUS

    # -- selection
    def select_arm(self, contexts, user_group=None, arm_ids: Sequence[int] | None = None) -> tuple[int, SelectionTrace]:
        X_raw = np.asarray(contexts, dtype=np.float64)
        if X_raw.ndim != 2 or X_raw.shape[0] == 0:
            raise ValueError("need at least one arm context")
        self._group_of(X_raw, user_group)
        ids = np.arange(X_raw.shape[0]) if arm_ids is None else np.asarray(arm_ids, dtype=np.int64)
        if len(ids) != X_raw.shape[0]:
            raise ValueError("one context per arm id is required")
        slots = self._ensure_arms(ids.tolist(), X_raw.shape[1])
        if len(slots) == len(self._ids) and np.array_equal(slots, np.arange(len(slots))):
            slots = slice(None)  # every stored arm, in order: index without copying
        X = self.prepare(X_raw)

        estimate = np.einsum("kj,kj->k", self.theta[slots], X)
        if self.config.solver == "cholesky":
            order = range(len(self._ids)) if isinstance(slots, slice) else slots
            q = np.array([x @ cho_solve(self._chol[s], x) for s, x in zip(order, X)])
        else:
            Y = np.matmul(self.A_inv[slots], X[:, :, None])[:, :, 0]
            q = np.einsum("kj,kj->k", X, Y)
        width = self.config.alpha * np.sqrt(np.maximum(q, 0.0))
        min_width_arm = _argmin_lowest_id(width, ids)

        if self.config.kind == "fair_linucb":
            fairness = -sign(self.tracker.gap) * self._arm_gaps(slots)
            min_width = width.min()
            penalty = min_width / 2.0 * (fairness + 1.0) * self.config.gamma
        else:
            penalty = np.zeros_like(width)
        score = estimate + width + penalty
        chosen = _argmax_lowest_id(score, ids)
        return chosen, SelectionTrace(ids, estimate, width, penalty, score, chosen, min_width_arm)

    def _arm_gaps(self, slots: NDArray[np.int64]) -> Array:
        s = self.group_sum[slots]
        c = self.group_count[slots]
        means = np.divide(s, c, out=np.zeros_like(s), where=c > 0)
        gaps = means[:, int(Group.PLUS)] - means[:, int(Group.MINUS)]
        if self.config.delta_mode == "neutral":
            gaps = np.where(c.min(axis=1) > 0, gaps, 0.0)
        return gaps

    # -- learning
    def update(self, arm_id: int, x, reward: float, user_group) -> None:
        if arm_id not in self._slot:
            raise KeyError(f"unknown arm id {arm_id}")
        s = self._slot[arm_id]
        v = self.prepare(np.asarray(x, dtype=np.float64))
        if v.shape != (self._d,):
            raise ValueError(f"context must have shape ({self._d},)")
        g = Group.parse(user_group)
        r = float(reward)
        self.A[s] += np.outer(v, v)
        self.b[s] += r * v
        if self.config.solver == "cholesky":
            self._chol[s] = linalg.cholesky(self.A[s])
            self.theta[s] = cho_solve(self._chol[s], self.b[s])
        else:
            self.A_inv[s] = linalg.sherman_morrison(self.A_inv[s], v)
            self.theta[s] = self.A_inv[s] @ self.b[s]
        self.group_sum[s, int(g)] += r
        self.group_count[s, int(g)] += 1
        self.tracker.add(g, r)

    # -- inspection / export
    def arm_state(self, arm_id: int) -> ArmState:
        s = self._slot[arm_id]
        return ArmState(self.A[s].copy(), self.b[s].copy(), self.group_sum[s].copy(), self.group_count[s].copy())

    def export_state(self, directory: str | Path) -> Path:
        """Write ``manifest.json`` plus one CSV per matrix into ``directory``.

        Layout: ``A_<id>.csv`` (d x d), ``b.csv`` (one row per arm, manifest order),
        ``groups.csv`` (arm, sum_plus, count_plus, sum_minus, count_minus).
        Values are written with 17 significant digits, which round-trips float64.
        """
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        fmt = "%.17g"
        ids = list(self._ids)
        for arm in ids:
            np.savetxt(out / f"A_{arm}.csv", self.A[self._slot[arm]], fmt=fmt, delimiter=",")
        if ids:
            np.savetxt(out / "b.csv", self.b[[self._slot[a] for a in ids]], fmt=fmt, delimiter=",")
        with open(out / "groups.csv", "w") as fh:
            fh.write("arm,sum_plus,count_plus,sum_minus,count_minus\n")
            for arm in ids:
                s = self._slot[arm]
                p, m = int(Group.PLUS), int(Group.MINUS)
                fh.write(f"{arm},{float(self.group_sum[s, p])!r},{self.group_count[s, p]},"
                         f"{float(self.group_sum[s, m])!r},{self.group_count[s, m]}\n")
        manifest = {
            "kind": self.config.kind,
            "dim": self._d,
            "lam": self.config.lam,
            "arms": ids,
            "tracker": {
                "sum_plus": float(self.tracker.sums[int(Group.PLUS)]),
                "count_plus": int(self.tracker.counts[int(Group.PLUS)]),
                "sum_minus": float(self.tracker.sums[int(Group.MINUS)]),
                "count_minus": int(self.tracker.counts[int(Group.MINUS)]),
            },
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return out


def load_state(directory: str | Path) -> tuple[dict[int, ArmState], GroupRewardTracker]:
    """Inverse of :meth:`BanditPolicy.export_state`."""
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    ids = manifest["arms"]
    d = manifest["dim"]
    b = np.loadtxt(src / "b.csv", delimiter=",", ndmin=2) if ids else np.empty((0, d))
    groups = {}
    for line in (src / "groups.csv").read_text().splitlines()[1:]:
        arm, sp, cp, sm, cm = line.split(",")
        groups[int(arm)] = (float(sp), int(cp), float(sm), int(cm))
    states = {}
    for row, arm in enumerate(ids):
        sp, cp, sm, cm = groups[arm]
        gs = np.zeros(2)
        gc = np.zeros(2, dtype=np.int64)
        gs[int(Group.PLUS)], gc[int(Group.PLUS)] = sp, cp
        gs[int(Group.MINUS)], gc[int(Group.MINUS)] = sm, cm
        A = np.loadtxt(src / f"A_{arm}.csv", delimiter=",", ndmin=2)
        states[arm] = ArmState(A, b[row].copy(), gs, gc)
    t = manifest["tracker"]
    tracker = GroupRewardTracker()
    tracker.sums[int(Group.PLUS)], tracker.counts[int(Group.PLUS)] = t["sum_plus"], t["count_plus"]
    tracker.sums[int(Group.MINUS)], tracker.counts[int(Group.MINUS)] = t["sum_minus"], t["count_minus"]
    return states, tracker
