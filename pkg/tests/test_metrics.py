import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fairbandit import metrics
from fairbandit.groups import Group
from fairbandit.metrics import BoundParams, RoundRecord

PLUS, MINUS = Group.PLUS, Group.MINUS


def rec(t, group, reward, optimal, phase="train", arm=0):
    return RoundRecord(t, t, group, arm, reward, optimal, phase)


record_lists = st.lists(
    st.tuples(st.sampled_from([PLUS, MINUS]), st.floats(0, 1), st.floats(0, 1), st.sampled_from(["train", "test"])),
    min_size=1, max_size=60,
).map(lambda rows: [rec(t, g, min(a, b), max(a, b), ph) for t, (g, a, b, ph) in enumerate(rows)])


# --------------------------------------------------------------------------- utility loss and regret

def test_utility_loss_all_optimal():
    log = [rec(0, PLUS, 0.7, 0.7), rec(1, MINUS, 0.4, 0.4)]
    assert metrics.utility_loss(log) == 0.0
    assert metrics.empirical_regret(log) == 0.0


def test_utility_loss_two_gaps():
    log = [rec(0, PLUS, 0.5, 0.6), rec(1, MINUS, 0.2, 0.5)]
    assert metrics.utility_loss(log) == pytest.approx(0.2, abs=1e-15)
    assert metrics.empirical_regret(log) == pytest.approx(0.4, abs=1e-15)


def test_utility_loss_phase_filter_and_empty():
    log = [rec(0, PLUS, 0.5, 0.6, "train"), rec(1, MINUS, 0.2, 0.5, "test")]
    assert metrics.utility_loss(log, "test") == pytest.approx(0.3)
    assert metrics.utility_loss(log, "all") == pytest.approx(0.2)
    with pytest.raises(ValueError):
        metrics.utility_loss([])
    with pytest.raises(ValueError):
        metrics.utility_loss(log[:1], "test")


@settings(max_examples=100, deadline=None)
@given(log=record_lists)
def test_regret_is_T_times_utility_loss(log):
    assert metrics.empirical_regret(log) == pytest.approx(len(log) * metrics.utility_loss(log), rel=1e-12, abs=1e-12)
    assert metrics.empirical_regret(log) >= 0.0


# --------------------------------------------------------------------------- reward difference

def test_reward_difference_mirrored():
    log = [rec(0, PLUS, 0.3, 1), rec(1, MINUS, 0.3, 1), rec(2, PLUS, 0.9, 1), rec(3, MINUS, 0.9, 1)]
    assert metrics.reward_difference(log) == 0.0


def test_reward_difference_known_means():
    log = [rec(0, PLUS, 0.7, 1), rec(1, PLUS, 0.9, 1), rec(2, MINUS, 0.6, 1)]
    assert metrics.reward_difference(log) == pytest.approx(0.2, abs=1e-15)


def test_reward_difference_needs_both_groups():
    with pytest.raises(ValueError, match="s-"):
        metrics.reward_difference([rec(0, PLUS, 0.5, 1)])


@settings(max_examples=100, deadline=None)
@given(log=record_lists)
def test_reward_difference_swap_symmetry(log):
    swapped = [RoundRecord(r.t, r.user_id, r.group.other(), r.arm, r.reward, r.optimal_reward, r.phase) for r in log]
    groups = {r.group for r in log}
    if len(groups) < 2:
        with pytest.raises(ValueError):
            metrics.reward_difference(log)
        return
    assert metrics.reward_difference(log) == metrics.reward_difference(swapped)


# --------------------------------------------------------------------------- curves

def test_curves_single_round():
    curves = metrics.cumulative_mean_curves([rec(0, PLUS, 0.5, 1)])
    assert curves[PLUS] == [(0, 0.5)]
    assert curves[MINUS] == []


def test_curves_constant_rewards():
    log = [rec(t, PLUS if t % 3 else MINUS, 0.25, 1) for t in range(12)]
    curves = metrics.cumulative_mean_curves(log)
    assert {v for _, v in curves[PLUS]} == {0.25}
    assert {v for _, v in curves[MINUS]} == {0.25}


@settings(max_examples=100, deadline=None)
@given(log=record_lists)
def test_curve_endpoints_match_one_pass_means(log):
    curves = metrics.cumulative_mean_curves(log)
    for g in (PLUS, MINUS):
        rewards = [r.reward for r in log if r.group is g]
        assert len(curves[g]) == len(rewards)
        if rewards:
            assert curves[g][-1][1] == pytest.approx(math.fsum(rewards) / len(rewards), rel=1e-12, abs=1e-12)


# --------------------------------------------------------------------------- bound

def test_bound_matches_high_precision():
    p = BoundParams(T=1000, d=10, L=1, M=1, lam=1, delta=0.001, Gamma=3)
    ref = float(oracles.bound_mp(1000, 10, 1, 1, 1, 0.001, 3))
    assert metrics.theoretical_bound(p) == pytest.approx(ref, rel=1e-12)


def test_bound_gamma_zero_factor_two():
    base = BoundParams(T=500, d=8, L=2.0, M=1.5, lam=0.5, delta=0.05, Gamma=0)
    g = math.log(1 + 500 * 4.0 / (8 * 0.5))
    expected = 2 * math.sqrt(2 * 500 * 8 * g) * (math.sqrt(0.5) * 1.5 + math.sqrt(2 * math.log(20) + 8 * g))
    assert metrics.theoretical_bound(base) == pytest.approx(expected, rel=1e-13)


def test_bound_gamma_ratio():
    p0 = BoundParams(T=1000, d=10, L=1, M=1, Gamma=0)
    p3 = BoundParams(T=1000, d=10, L=1, M=1, Gamma=3)
    assert metrics.theoretical_bound(p3) / metrics.theoretical_bound(p0) == pytest.approx(2.5, rel=1e-14)


@pytest.mark.parametrize("field, lo, hi", [("T", 100, 5000), ("d", 5, 50), ("Gamma", 0.0, 4.0)])
def test_bound_monotone(field, lo, hi):
    base = dict(T=1000, d=10, L=1.0, M=1.0, lam=1.0, delta=0.05, Gamma=1.0)
    a = metrics.theoretical_bound(BoundParams(**{**base, field: lo}))
    b = metrics.theoretical_bound(BoundParams(**{**base, field: hi}))
    assert b > a


@pytest.mark.parametrize("kwargs", [dict(T=0), dict(d=0), dict(L=0), dict(M=-1), dict(lam=0),
                                    dict(delta=0), dict(delta=1), dict(Gamma=-1)])
def test_bound_params_validation(kwargs):
    base = dict(T=10, d=2, L=1, M=1)
    with pytest.raises(ValueError):
        BoundParams(**{**base, **kwargs})


def test_alpha_schedule_prior():
    got = metrics.alpha_schedule(0, lam=4.0, M=0.5, L=1.0, d=10, delta=0.01)
    assert got == pytest.approx(2.0 * 0.5 + math.sqrt(2 * math.log(100)), rel=1e-15)


def test_alpha_schedule_nondecreasing():
    vals = [metrics.alpha_schedule(t, 1.0, 1.0, 1.0, 10, 0.05) for t in range(1, 1001)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@settings(max_examples=50, deadline=None)
@given(t=st.integers(0, 10**6), lam=st.floats(0.01, 10), M=st.floats(0.01, 10), L=st.floats(0.01, 10),
       d=st.integers(1, 200), delta=st.floats(1e-6, 0.99))
def test_alpha_schedule_high_precision(t, lam, M, L, d, delta):
    ref = float(oracles.alpha_mp(t, lam, M, L, d, delta))
    assert metrics.alpha_schedule(t, lam, M, L, d, delta) == pytest.approx(ref, rel=1e-12)


# --------------------------------------------------------------------------- summaries and CSV

def sample_log():
    log = []
    for t in range(40):
        g = PLUS if t % 2 else MINUS
        r = (t * 37 % 11) / 13.0
        log.append(RoundRecord(t, 100 + t, g, t % 5, r, max(r, 0.7), "train" if t < 25 else "test"))
    return log


def test_summary_fields():
    log = sample_log()
    s = metrics.summarize(log, policy="linucb", gamma=0.0, arm_ratio="3:7", ordering="shuffled",
                          oracle="r", seed=1, phase="test", tau=0.01)
    test = [r for r in log if r.phase == "test"]
    assert s.n_rounds == len(test) == 15
    assert s.utility_loss == metrics.utility_loss(test)
    assert s.reward_difference == metrics.reward_difference(test)
    assert s.within_tau == (s.reward_difference <= 0.01)


def test_round_log_round_trip(tmp_path):
    log = sample_log()
    path = tmp_path / "rounds.csv"
    metrics.write_round_log(log, path)
    back = metrics.read_round_log(path)
    assert back == log
    for phase in (None, "train", "test"):
        assert metrics.utility_loss(back, phase) == pytest.approx(metrics.utility_loss(log, phase), abs=1e-12)
        assert metrics.reward_difference(back, phase) == pytest.approx(metrics.reward_difference(log, phase), abs=1e-12)


def test_round_log_running_means(tmp_path):
    import csv

    log = sample_log()
    path = tmp_path / "rounds.csv"
    metrics.write_round_log(log, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    curves = metrics.cumulative_mean_curves(log)
    assert tuple(rows[0]) == metrics.ROUND_COLUMNS
    assert float(rows[-1]["cmr_plus"]) == pytest.approx(curves[PLUS][-1][1], abs=1e-12)
    assert float(rows[-1]["cmr_minus"]) == pytest.approx(curves[MINUS][-1][1], abs=1e-12)


def test_summary_csv_and_aggregate(tmp_path):
    log = sample_log()
    rows = [metrics.summarize(log, policy="fair_linucb", gamma=3.0, arm_ratio="3:7", ordering="shuffled",
                              oracle="r", seed=s, phase="all") for s in range(3)]
    path = tmp_path / "summary.csv"
    metrics.write_summary(rows, path)
    back = metrics.read_summary(path)
    assert len(back) == 3 and float(back[0]["utility_loss"]) == rows[0].utility_loss
    table = metrics.aggregate(rows)
    assert len(table) == 1 and table[0]["n_seeds"] == 3
    assert table[0]["utility_loss_std"] == 0.0
