"""Simulated recommendation environment: users, video arms, contexts and rewards.

Users follow the Adult census schema (8 categorical variables, an optional
income label and 3 continuous variables); arms follow a YouTube-statistics
schema.  Both can be read from CSV or synthesized with matched marginals.
Every feature position is resolved by name through :class:`FeatureSpace`.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .groups import Group

Array = NDArray[np.float64]

EDUCATION_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
EDUCATION_FEATURE = "user:education_level"
RATING_FEATURE = "arm:rating"
MATCH_FEATURE = "gender_match"
SENSITIVE_FEATURES = ("user:sex=Male", "user:sex=Female")
ORDERINGS = ("shuffled", "group_minus_first", "group_plus_first")


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named consumer of randomness under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


# --------------------------------------------------------------------------- schemas

ADULT_CATEGORIES: dict[str, tuple[str, ...]] = {
    "workclass": (
        "Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
        "State-gov", "Without-pay", "Never-worked", "?",
    ),
    "education": (
        "Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
        "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
        "Doctorate", "5th-6th", "Preschool",
    ),
    "marital-status": (
        "Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
        "Married-spouse-absent", "Married-AF-spouse",
    ),
    "occupation": (
        "Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
        "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
        "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
        "Armed-Forces", "?",
    ),
    "relationship": ("Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"),
    "race": ("White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"),
    "sex": ("Female", "Male"),
    "native-country": (
        "United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
        "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China", "Cuba",
        "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica", "Vietnam", "Mexico",
        "Portugal", "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador", "Taiwan",
        "Haiti", "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland", "Thailand",
        "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands", "?",
    ),
}
INCOME_CATEGORIES = ("<=50K", ">50K")
USER_CONTINUOUS = ("age", "education_level", "hours_per_week")

# Adult "education-num" runs 1..16; it is folded into five ordered levels.
EDUCATION_NUM = {
    "Preschool": 1, "1st-4th": 2, "5th-6th": 3, "7th-8th": 4, "9th": 5, "10th": 6,
    "11th": 7, "12th": 8, "HS-grad": 9, "Some-college": 10, "Assoc-voc": 11,
    "Assoc-acdm": 12, "Bachelors": 13, "Masters": 14, "Prof-school": 15, "Doctorate": 16,
}


def education_level(education_num: float) -> float:
    n = int(round(education_num))
    if n <= 8:
        return 0.0
    if n == 9:
        return 0.25
    if n <= 12:
        return 0.5
    if n == 13:
        return 0.75
    return 1.0


ARM_BINS: dict[str, int] = {"age": 5, "length": 5, "views": 5, "ratings": 5, "comments": 4}


def user_feature_names(include_income: bool = True) -> list[str]:
    names = [f"user:{col}={v}" for col, vals in ADULT_CATEGORIES.items() for v in vals]
    if include_income:
        names += [f"user:income={v}" for v in INCOME_CATEGORIES]
    names += [f"user:{c}" for c in USER_CONTINUOUS]
    return names


def arm_feature_names() -> list[str]:
    names = [f"arm:{col}=q{k}" for col, n in ARM_BINS.items() for k in range(n)]
    return names + [RATING_FEATURE, "arm:speaker_male"]


# --------------------------------------------------------------------------- records

@dataclass(frozen=True)
class UserRecord:
    id: int
    group: Group
    features: Array = field(repr=False)
    phase: str = "train"


@dataclass(frozen=True)
class ArmRecord:
    id: int
    speaker_group: Group
    features: Array = field(repr=False)


@dataclass(frozen=True)
class FeatureSpace:
    """Named layout of a context vector: ``[user | arm | gender_match]``."""

    user_names: tuple[str, ...]
    arm_names: tuple[str, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return self.user_names + self.arm_names + (MATCH_FEATURE,)

    @property
    def dim(self) -> int:
        return len(self.user_names) + len(self.arm_names) + 1

    @property
    def n_user(self) -> int:
        return len(self.user_names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no feature named {name!r}") from None

    @property
    def sensitive_index(self) -> int:
        return self.index("user:sex=Male")


@dataclass(frozen=True)
class Split:
    """Requested user counts per phase and group."""

    train_plus: int = 1500
    train_minus: int = 1500
    test_plus: int = 1000
    test_minus: int = 1000

    @classmethod
    def balanced(cls, n_train: int, n_test: int = 0) -> "Split":
        if n_train % 2 or n_test % 2:
            raise ValueError("balanced split needs even counts")
        return cls(n_train // 2, n_train // 2, n_test // 2, n_test // 2)

    @property
    def n_train(self) -> int:
        return self.train_plus + self.train_minus

    @property
    def n_test(self) -> int:
        return self.test_plus + self.test_minus

    def count(self, phase: str, group: Group) -> int:
        return getattr(self, f"{phase}_{'plus' if group is Group.PLUS else 'minus'}")


@dataclass(frozen=True)
class UserSynthesis:
    """Marginals for synthetic Adult-like users.

    Education levels are assigned by exact quota within each (phase, group) cell,
    so both groups share one education distribution.
    """

    education_weights: tuple[float, ...] = (0.15, 0.32, 0.30, 0.15, 0.08)
    age_mean: tuple[float, float] = (37.0, 39.5)  # (s-, s+)
    hours_mean: tuple[float, float] = (36.5, 42.5)


@dataclass(frozen=True)
class ArmSynthesis:
    rating_beta: tuple[float, float] = (4.0, 1.5)


# --------------------------------------------------------------------------- users

# sex-conditional categorical marginals, loosely following the census data
_REL = {
    Group.PLUS: {"Husband": 0.60, "Not-in-family": 0.20, "Own-child": 0.12, "Unmarried": 0.04, "Other-relative": 0.04},
    Group.MINUS: {"Wife": 0.20, "Not-in-family": 0.34, "Own-child": 0.16, "Unmarried": 0.26, "Other-relative": 0.04},
}
_MARITAL_GIVEN_REL = {
    "Husband": {"Married-civ-spouse": 0.99, "Married-AF-spouse": 0.01},
    "Wife": {"Married-civ-spouse": 0.99, "Married-AF-spouse": 0.01},
    "Not-in-family": {"Never-married": 0.50, "Divorced": 0.32, "Widowed": 0.09, "Separated": 0.05, "Married-spouse-absent": 0.04},
    "Own-child": {"Never-married": 0.90, "Divorced": 0.05, "Separated": 0.03, "Married-civ-spouse": 0.02},
    "Unmarried": {"Divorced": 0.52, "Separated": 0.14, "Widowed": 0.15, "Never-married": 0.16, "Married-spouse-absent": 0.03},
    "Other-relative": {"Never-married": 0.60, "Married-civ-spouse": 0.15, "Divorced": 0.10, "Widowed": 0.08, "Separated": 0.05, "Married-spouse-absent": 0.02},
}
_OCCUPATION = {
    Group.PLUS: {
        "Craft-repair": 0.18, "Exec-managerial": 0.14, "Prof-specialty": 0.12, "Sales": 0.11,
        "Transport-moving": 0.07, "Machine-op-inspct": 0.07, "Other-service": 0.07,
        "Handlers-cleaners": 0.06, "Adm-clerical": 0.06, "Farming-fishing": 0.04,
        "Tech-support": 0.03, "Protective-serv": 0.03, "?": 0.02,
    },
    Group.MINUS: {
        "Adm-clerical": 0.30, "Other-service": 0.16, "Prof-specialty": 0.14, "Sales": 0.11,
        "Exec-managerial": 0.09, "Machine-op-inspct": 0.05, "Tech-support": 0.04,
        "Craft-repair": 0.02, "Priv-house-serv": 0.02, "Handlers-cleaners": 0.02,
        "Transport-moving": 0.01, "?": 0.04,
    },
}
_WORKCLASS = {
    "Private": 0.70, "Self-emp-not-inc": 0.08, "Local-gov": 0.06, "State-gov": 0.04,
    "Self-emp-inc": 0.035, "Federal-gov": 0.03, "Without-pay": 0.005, "?": 0.05,
}
_RACE = {"White": 0.85, "Black": 0.10, "Asian-Pac-Islander": 0.03, "Amer-Indian-Eskimo": 0.01, "Other": 0.01}
_COUNTRY = {"United-States": 0.90, "Mexico": 0.02, "Philippines": 0.01, "Germany": 0.01, "Canada": 0.01, "India": 0.01, "?": 0.02, "England": 0.01, "China": 0.01}
_HIGH_INCOME = {Group.PLUS: 0.38, Group.MINUS: 0.10}
_EDUCATION_BY_LEVEL = {
    0.0: {"11th": 0.30, "10th": 0.25, "7th-8th": 0.18, "9th": 0.13, "12th": 0.10, "5th-6th": 0.03, "1st-4th": 0.01},
    0.25: {"HS-grad": 1.0},
    0.5: {"Some-college": 0.68, "Assoc-voc": 0.17, "Assoc-acdm": 0.15},
    0.75: {"Bachelors": 1.0},
    1.0: {"Masters": 0.70, "Prof-school": 0.18, "Doctorate": 0.12},
}
_AGE_RANGE = (17.0, 90.0)
_HOURS_RANGE = (1.0, 99.0)


def _draw(rng: np.random.Generator, dist: dict[str, float]) -> str:
    keys = list(dist)
    p = np.array([dist[k] for k in keys])
    return keys[rng.choice(len(keys), p=p / p.sum())]


def _quota(n: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``n`` items over ``weights``."""
    w = np.asarray(weights, dtype=float)
    raw = n * w / w.sum()
    counts = np.floor(raw).astype(int)
    for k in np.argsort(-(raw - counts), kind="stable")[: n - counts.sum()]:
        counts[k] += 1
    return counts.tolist()


def _scale(v: float, lo: float, hi: float) -> float:
    return float(np.clip((v - lo) / (hi - lo), 0.0, 1.0)) if hi > lo else 0.0


class UserEncoder:
    """One-hot / min-max encoder for Adult-schema rows."""

    def __init__(self, include_income: bool = True, age_range=_AGE_RANGE, hours_range=_HOURS_RANGE):
        self.include_income = include_income
        self.age_range = age_range
        self.hours_range = hours_range
        self.names = user_feature_names(include_income)
        self._pos = {n: i for i, n in enumerate(self.names)}

    def encode(self, row: dict[str, str | float]) -> Array:
        x = np.zeros(len(self.names))
        for col, vocab in ADULT_CATEGORIES.items():
            val = str(row[col]).strip()
            if val not in vocab:
                raise ValueError(f"unknown {col} category {val!r}")
            x[self._pos[f"user:{col}={val}"]] = 1.0
        if self.include_income:
            val = str(row["income"]).strip().rstrip(".")
            if val not in INCOME_CATEGORIES:
                raise ValueError(f"unknown income category {val!r}")
            x[self._pos[f"user:income={val}"]] = 1.0
        x[self._pos["user:age"]] = _scale(float(row["age"]), *self.age_range)
        x[self._pos["user:education_level"]] = education_level(float(row["education-num"]))
        x[self._pos["user:hours_per_week"]] = _scale(float(row["hours-per-week"]), *self.hours_range)
        return x


def _synth_user_row(rng: np.random.Generator, group: Group, level: float, synth: UserSynthesis) -> dict:
    rel = _draw(rng, _REL[group])
    edu = _draw(rng, _EDUCATION_BY_LEVEL[level])
    g = int(group)
    return {
        "workclass": _draw(rng, _WORKCLASS),
        "education": edu,
        "education-num": EDUCATION_NUM[edu],
        "marital-status": _draw(rng, _MARITAL_GIVEN_REL[rel]),
        "occupation": _draw(rng, _OCCUPATION[group]),
        "relationship": rel,
        "race": _draw(rng, _RACE),
        "sex": "Male" if group is Group.PLUS else "Female",
        "native-country": _draw(rng, _COUNTRY),
        "income": ">50K" if rng.random() < _HIGH_INCOME[group] else "<=50K",
        "age": float(np.clip(rng.normal(synth.age_mean[g], 13.0), *_AGE_RANGE)),
        "hours-per-week": float(np.clip(round(rng.normal(synth.hours_mean[g], 11.0)), *_HOURS_RANGE)),
    }


def _normalize_header(name: str) -> str:
    return name.strip().lower().replace("_", "-")


def read_adult_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, skipinitialspace=True)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        rows = []
        for i, raw in enumerate(reader):
            row = {_normalize_header(k): (v.strip() if isinstance(v, str) else v) for k, v in raw.items() if k}
            if None in raw or any(v is None for v in raw.values()):
                raise ValueError(f"{path}: malformed row {i + 2}")
            rows.append(row)
    required = set(ADULT_CATEGORIES) | {"age", "education-num", "hours-per-week"}
    missing = required - set(rows[0] if rows else ())
    if missing:
        raise ValueError(f"{path}: missing Adult columns {sorted(missing)}")
    return rows


def load_users(
    source: str | Path | UserSynthesis | None = None,
    split: Split = Split(),
    seed: int = 0,
) -> list[UserRecord]:
    """Encoded user table, train records first then test, each phase grouped by sex.

    ``source`` is an Adult-schema CSV path or a :class:`UserSynthesis` (``None``
    means default synthesis).  Stream order is decided later by :func:`order_stream`.
    """
    rng = rng_stream(seed, "users")
    phases = ("train", "test")
    cells = [(ph, g) for ph in phases for g in (Group.PLUS, Group.MINUS)]
    records: list[UserRecord] = []

    if source is None or isinstance(source, UserSynthesis):
        synth = source or UserSynthesis()
        enc = UserEncoder(include_income=True)
        for ph, g in cells:
            n = split.count(ph, g)
            levels = [lvl for lvl, c in zip(EDUCATION_LEVELS, _quota(n, synth.education_weights)) for _ in range(c)]
            for lvl in rng.permutation(np.array(levels, dtype=float)) if levels else []:
                row = _synth_user_row(rng, g, float(lvl), synth)
                records.append(UserRecord(len(records), g, enc.encode(row), ph))
        return records

    rows = read_adult_csv(source)
    enc = UserEncoder(
        include_income="income" in rows[0],
        age_range=(min(float(r["age"]) for r in rows), max(float(r["age"]) for r in rows)),
        hours_range=(min(float(r["hours-per-week"]) for r in rows), max(float(r["hours-per-week"]) for r in rows)),
    )
    by_group: dict[Group, list[int]] = {Group.PLUS: [], Group.MINUS: []}
    for i, r in enumerate(rows):
        if r["sex"] not in ADULT_CATEGORIES["sex"]:
            raise ValueError(f"unknown sex category {r['sex']!r}")
        by_group[Group.PLUS if r["sex"] == "Male" else Group.MINUS].append(i)
    picked: dict[Group, list[int]] = {}
    for g, idx in by_group.items():
        need = split.count("train", g) + split.count("test", g)
        if need > len(idx):
            raise ValueError(f"split asks for {need} {g.label} users, source has {len(idx)}")
        picked[g] = list(rng.permutation(np.array(idx, dtype=int))[:need]) if need else []
    for ph, g in cells:
        n = split.count(ph, g)
        take, picked[g] = picked[g][:n], picked[g][n:]
        for i in take:
            records.append(UserRecord(len(records), g, enc.encode(rows[i]), ph))
    return records


# --------------------------------------------------------------------------- arms

def parse_ratio(ratio) -> tuple[int, int]:
    """``"3:7"`` or ``(3, 7)`` -> ``(3, 7)`` as (s+ share, s- share)."""
    if isinstance(ratio, str):
        parts = ratio.split(":")
        if len(parts) != 2:
            raise ValueError(f"bad ratio {ratio!r}")
        ratio = parts
    a, b = (int(v) for v in ratio)
    if a < 0 or b < 0 or a + b == 0:
        raise ValueError(f"bad ratio {ratio!r}")
    return a, b


def _speaker_counts(size: int, ratio) -> tuple[int, int]:
    a, b = parse_ratio(ratio)
    if (size * a) % (a + b):
        raise ValueError(f"ratio {a}:{b} cannot split a pool of {size} exactly")
    n_plus = size * a // (a + b)
    return n_plus, size - n_plus


def _arm_vector(bins: dict[str, int], rating: float, speaker: Group) -> Array:
    names = arm_feature_names()
    x = np.zeros(len(names))
    off = 0
    for col, n in ARM_BINS.items():
        x[off + bins[col]] = 1.0
        off += n
    x[off] = rating
    x[off + 1] = 1.0 if speaker is Group.PLUS else 0.0
    return x


def _quantile_bins(values: Array, n: int) -> Array:
    edges = np.quantile(values, np.linspace(0, 1, n + 1)[1:-1])
    return np.searchsorted(edges, values, side="right")


def load_arms(
    source: str | Path | ArmSynthesis | None = None,
    ratio="3:7",
    size: int = 100,
    seed: int = 0,
) -> list[ArmRecord]:
    """Arm pool whose speaker groups match ``ratio`` (s+:s-) exactly.

    Speakers are shuffled across the pool, so the arm id carries no group information.
    A CSV source needs columns ``age, length, views, rate, ratings, comments``;
    ``rate`` is on the 0-5 star scale.  An optional ``speaker`` column is honoured.
    """
    rng = rng_stream(seed, "arms")
    n_plus, n_minus = _speaker_counts(size, ratio)

    if source is None or isinstance(source, ArmSynthesis):
        synth = source or ArmSynthesis()
        speakers = rng.permutation(np.array([1] * n_plus + [0] * n_minus))
        arms = []
        for i in range(size):
            bins = {col: int(rng.integers(n)) for col, n in ARM_BINS.items()}
            rating = float(rng.beta(*synth.rating_beta))
            arms.append(ArmRecord(i, Group(int(speakers[i])), _arm_vector(bins, rating, Group(int(speakers[i])))))
        return arms

    with open(source, newline="") as fh:
        rows = [{_normalize_header(k): v for k, v in r.items() if k} for r in csv.DictReader(fh, skipinitialspace=True)]
    need = set(ARM_BINS) | {"rate"}
    if not rows or need - set(rows[0]):
        raise ValueError(f"{source}: missing arm columns {sorted(need - set(rows[0] if rows else ()))}")
    try:
        table = {c: np.array([float(r[c]) for r in rows]) for c in need}
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{source}: malformed numeric value ({exc})") from None
    binned = {c: _quantile_bins(table[c], n) for c, n in ARM_BINS.items()}
    if "speaker" in rows[0]:
        spk = np.array([int(Group.parse(r["speaker"])) for r in rows])
        idx_plus = np.flatnonzero(spk == 1)
        idx_minus = np.flatnonzero(spk == 0)
        if n_plus > len(idx_plus) or n_minus > len(idx_minus):
            raise ValueError(f"ratio {ratio} infeasible for {source}")
        chosen = np.concatenate([rng.permutation(idx_plus)[:n_plus], rng.permutation(idx_minus)[:n_minus]])
        chosen = rng.permutation(chosen)
        speakers = spk[chosen]
    else:
        if size > len(rows):
            raise ValueError(f"pool size {size} exceeds {len(rows)} rows in {source}")
        chosen = rng.permutation(len(rows))[:size]
        speakers = rng.permutation(np.array([1] * n_plus + [0] * n_minus))
    arms = []
    for i, (row_i, s) in enumerate(zip(chosen, speakers)):
        bins = {c: int(binned[c][row_i]) for c in ARM_BINS}
        rating = float(np.clip(table["rate"][row_i] / 5.0, 0.0, 1.0))
        arms.append(ArmRecord(i, Group(int(s)), _arm_vector(bins, rating, Group(int(s)))))
    return arms


# --------------------------------------------------------------------------- contexts

def build_context(user: UserRecord, arm: ArmRecord) -> Array:
    match = 1.0 if user.group == arm.speaker_group else 0.0
    return np.concatenate([user.features, arm.features, [match]])


class ArmPool:
    """Arm features stacked once so all contexts for a user come from one broadcast."""

    def __init__(self, arms: Sequence[ArmRecord]):
        if not arms:
            raise ValueError("empty arm pool")
        self.arms = list(arms)
        self.ids = np.array([a.id for a in arms])
        self.features = np.stack([a.features for a in arms])
        self.speaker = np.array([int(a.speaker_group) for a in arms])

    def __len__(self) -> int:
        return len(self.arms)

    def contexts(self, user: UserRecord) -> Array:
        k = len(self.arms)
        out = np.empty((k, user.features.shape[0] + self.features.shape[1] + 1))
        out[:, : user.features.shape[0]] = user.features
        out[:, user.features.shape[0] : -1] = self.features
        out[:, -1] = (self.speaker == int(user.group)).astype(float)
        return out


# --------------------------------------------------------------------------- rewards

REWARD_WEIGHTS = {
    "r": {RATING_FEATURE: 0.3, EDUCATION_FEATURE: 0.4, MATCH_FEATURE: 0.3},
    "r2": {RATING_FEATURE: 0.5, EDUCATION_FEATURE: 0.5},
}


@dataclass(frozen=True)
class RewardOracle:
    """Sparse linear reward ``<theta*, x>`` with optional clipped Gaussian noise."""

    kind: str
    coefficients: dict[int, float]
    dim: int
    noise_sd: float = 0.0

    @classmethod
    def for_kind(cls, kind: str, space: FeatureSpace, noise_sd: float = 0.0) -> "RewardOracle":
        if kind not in REWARD_WEIGHTS:
            raise ValueError(f"unknown reward oracle {kind!r}; expected one of {sorted(REWARD_WEIGHTS)}")
        coef = {space.index(n): w for n, w in REWARD_WEIGHTS[kind].items()}
        return cls(kind, coef, space.dim, noise_sd)

    @property
    def theta(self) -> Array:
        t = np.zeros(self.dim)
        for i, w in self.coefficients.items():
            t[i] = w
        return t

    def expected(self, contexts: Array) -> Array:
        """Noise-free rewards for a ``(k, d)`` batch (or one ``(d,)`` context)."""
        c = np.asarray(contexts)
        out = np.zeros(c.shape[:-1])
        for i, w in self.coefficients.items():
            out = out + w * c[..., i]
        return out


def reward(oracle: RewardOracle, ctx, rng: np.random.Generator | None = None) -> float:
    r = float(oracle.expected(np.asarray(ctx, dtype=float)))
    if oracle.noise_sd > 0:
        if rng is None:
            raise ValueError("noisy oracle needs a generator")
        r = float(np.clip(r + rng.normal(0.0, oracle.noise_sd), 0.0, 1.0))
    return r


def optimal_reward(oracle: RewardOracle, user: UserRecord, arms: Sequence[ArmRecord] | ArmPool) -> tuple[int, float]:
    pool = arms if isinstance(arms, ArmPool) else ArmPool(arms)
    values = oracle.expected(pool.contexts(user))
    best = values.max()
    winners = pool.ids[values == best]
    return int(winners.min()), float(best)


# --------------------------------------------------------------------------- masks and ordering

def correlation_mask(users: Sequence[UserRecord], threshold: float = 0.3, space: FeatureSpace | None = None) -> set[int]:
    """User-feature indices to drop for the Naive policy.

    Always contains the sex columns; adds every feature whose |Pearson r| with the
    group indicator exceeds ``threshold``.  Constant columns are skipped.
    """
    if len(users) < 2:
        raise ValueError("need at least two users")
    g = np.array([int(u.group) for u in users], dtype=float)
    if g.min() == g.max():
        raise ValueError("both groups must be present")
    X = np.stack([u.features for u in users])
    gc = g - g.mean()
    Xc = X - X.mean(axis=0)
    sx = np.sqrt((Xc**2).sum(axis=0))
    sg = np.sqrt((gc**2).sum())
    ok = sx > 1e-12
    corr = np.zeros(X.shape[1])
    corr[ok] = (Xc[:, ok].T @ gc) / (sx[ok] * sg)
    mask = {int(i) for i in np.flatnonzero(np.abs(corr) > threshold)}
    names = space.user_names if space is not None else tuple(user_feature_names(X.shape[1] == len(user_feature_names(True))))
    for s in SENSITIVE_FEATURES:
        if s in names:
            mask.add(names.index(s))
    return mask


def order_stream(users: Sequence[UserRecord], mode: str = "shuffled", seed: int = 0) -> list[UserRecord]:
    """Train users ordered per ``mode``, followed by the shuffled test users."""
    if mode not in ORDERINGS:
        raise ValueError(f"unknown ordering {mode!r}; expected one of {ORDERINGS}")
    rng = rng_stream(seed, "order")
    train = [u for u in users if u.phase == "train"]
    test = [u for u in users if u.phase == "test"]

    def shuffled(xs: list[UserRecord], g: np.random.Generator = rng) -> list[UserRecord]:
        return [xs[i] for i in g.permutation(len(xs))]

    if mode == "shuffled":
        ordered = shuffled(train)
    else:
        first = Group.MINUS if mode == "group_minus_first" else Group.PLUS
        ordered = shuffled([u for u in train if u.group == first]) + shuffled([u for u in train if u.group != first])
    # the test block has its own stream so every ordering mode sees the same test sequence
    return ordered + shuffled(test, rng_stream(seed, "order-test"))


def feature_space(users: Sequence[UserRecord], arms: Sequence[ArmRecord]) -> FeatureSpace:
    n_user = users[0].features.shape[0]
    full = user_feature_names(True)
    user_names = full if n_user == len(full) else user_feature_names(False)
    if len(user_names) != n_user:
        raise ValueError(f"user vectors have {n_user} entries, expected {len(user_names)}")
    return FeatureSpace(tuple(user_names), tuple(arm_feature_names()))


def iter_phase(users: Iterable[UserRecord], phase: str) -> list[UserRecord]:
    return [u for u in users if u.phase == phase]
