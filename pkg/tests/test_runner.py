import numpy as np
import pytest

from fairbandit import cli, runner
from fairbandit.env import SENSITIVE_FEATURES
from fairbandit.groups import Group
from fairbandit.metrics import read_summary
from fairbandit.policy import BanditPolicy, load_state


def small_config(**overrides):
    cfg = runner.from_dict({
        "seed": 7,
        "repetitions": 2,
        "policy": {"kind": "linucb", "alpha": 0.5},
        "users": {"train_plus": 20, "train_minus": 20, "test_plus": 10, "test_minus": 10},
        "arms": {"ratio": "1:2", "size": 6},
    })
    return cfg.replace(**overrides) if overrides else cfg


def tiny_config(**overrides):
    """Ten users and three arms."""
    cfg = runner.from_dict({
        "seed": 3,
        "summary_phase": "all",
        "users": {"train_plus": 3, "train_minus": 3, "test_plus": 2, "test_minus": 2},
        "arms": {"ratio": "1:2", "size": 3},
    })
    return cfg.replace(**overrides) if overrides else cfg


# --------------------------------------------------------------------------- config

def test_config_yaml_round_trip(tmp_path):
    cfg = small_config(**{"policy.kind": "fair_linucb", "policy.gamma": 2.5})
    path = tmp_path / "c.yaml"
    path.write_text(runner.dump_config(cfg))
    assert runner.load_config(path) == cfg


@pytest.mark.parametrize("bad", [
    {"oracle": "r9"},
    {"ordering": "sideways"},
    {"repetitions": 0},
    {"arms": {"ratio": "3:8", "size": 100}},
    {"users": {"source": "/nonexistent/adult.csv"}},
    {"policy": {"kind": "thompson"}},
    {"policy": {"lam": 0.0}},
    {"policy": {"colour": "blue"}},
    {"turbo": True},
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        runner.from_dict(bad)


@pytest.mark.parametrize("path", sorted(__import__("pathlib").Path(__file__).parent.parent.glob("configs/*.yaml")))
def test_shipped_configs_load(path):
    cfg = runner.load_config(path)
    assert cfg.users.split.n_train == 3000 and cfg.users.split.n_test == 2000
    assert cfg.arms.size == 100


# --------------------------------------------------------------------------- run

def test_same_seed_byte_identical(tmp_path):
    cfg = small_config(**{"policy.kind": "fair_linucb", "policy.gamma": 3.0})
    runner.run(cfg, out=tmp_path / "a")
    runner.run(cfg, out=tmp_path / "b")
    for name in ("rounds.csv", "summary.csv", "config.resolved"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seeds_differ():
    cfg = small_config()
    a = runner.run(cfg, seed=1).records
    b = runner.run(cfg, seed=2).records
    assert a != b


@pytest.mark.parametrize("ordering", ["shuffled", "group_plus_first", "group_minus_first"])
def test_gamma_zero_matches_linucb(tmp_path, ordering):
    base = tiny_config(ordering=ordering)
    runner.run(base, out=tmp_path / "lin")
    runner.run(base.replace(**{"policy.kind": "fair_linucb", "policy.gamma": 0.0}), out=tmp_path / "fair")
    assert (tmp_path / "lin" / "rounds.csv").read_bytes() == (tmp_path / "fair" / "rounds.csv").read_bytes()


def test_conservation():
    cfg = small_config()
    res = runner.run(cfg)
    split = cfg.users.split
    assert len(res.records) == split.n_train + split.n_test
    assert [r.t for r in res.records] == list(range(len(res.records)))
    for phase in ("train", "test"):
        for g in (Group.PLUS, Group.MINUS):
            n = sum(r.phase == phase and r.group is g for r in res.records)
            assert n == split.count(phase, g)
    assert len({r.user_id for r in res.records}) == len(res.records)
    assert all(r.reward <= r.optimal_reward + 1e-15 for r in res.records)


def test_train_precedes_test():
    res = runner.run(small_config(ordering="group_minus_first"))
    phases = [r.phase for r in res.records]
    assert phases == sorted(phases, key=lambda p: p != "train")


def test_replay_closure(tmp_path):
    res = runner.run(small_config(**{"policy.kind": "fair_linucb", "policy.gamma": 1.0}), out=tmp_path)
    assert runner.replay_summary(tmp_path) == res.summary
    stored = read_summary(tmp_path / "summary.csv")[0]
    assert float(stored["utility_loss"]) == res.summary.utility_loss
    assert float(stored["reward_difference"]) == res.summary.reward_difference


@pytest.mark.parametrize("kind", ["linucb", "fair_linucb", "naive"])
def test_state_reconstruction_from_log(kind):
    cfg = small_config(**{"policy.kind": kind, "policy.gamma": 2.0})
    res = runner.run(cfg)
    rebuilt = runner.reconstruct_arm_states(cfg, res.seed, res.records)
    for arm, st in rebuilt.items():
        live = res.policy.arm_state(arm)
        scale = max(1.0, np.abs(live.A).max())
        assert np.abs(st.A - live.A).max() <= 1e-10 * scale
        assert np.abs(st.b - live.b).max() <= 1e-10 * max(1.0, np.abs(live.b).max())
        np.testing.assert_array_equal(st.group_count, live.group_count)
        np.testing.assert_allclose(st.group_sum, live.group_sum, rtol=0, atol=1e-10)


def test_saved_state_matches_live_policy(tmp_path):
    res = runner.run(small_config(**{"policy.kind": "fair_linucb", "policy.gamma": 2.0}), out=tmp_path, save_state=True)
    states, tracker = load_state(tmp_path / "state")
    assert sorted(states) == res.policy.arm_ids
    for arm, st in states.items():
        np.testing.assert_array_equal(st.A, res.policy.arm_state(arm).A)
    np.testing.assert_array_equal(tracker.counts, res.policy.tracker.counts)


def test_cholesky_solver_reproduces_run():
    cfg = small_config(**{"policy.kind": "fair_linucb", "policy.gamma": 3.0})
    a = runner.run(cfg).records
    b = runner.run(cfg.replace(**{"policy.solver": "cholesky"})).records
    assert [r.arm for r in a] == [r.arm for r in b]


def test_noise_knob_keeps_rewards_bounded():
    res = runner.run(small_config(noise_sd=0.3))
    rewards = [r.reward for r in res.records]
    assert min(rewards) >= 0.0 and max(rewards) <= 1.0


# --------------------------------------------------------------------------- sweeps

def test_degenerate_sweep_equals_run():
    cfg = small_config(**{"policy.kind": "fair_linucb"})
    rows, table = runner.sweep(cfg, "gamma", [2.0], seeds=[5])
    direct = runner.run(cfg.replace(**{"policy.gamma": 2.0}), seed=5).summary
    assert rows == [direct]
    assert table[0]["reward_difference_mean"] == direct.reward_difference


def test_sweep_table_shape(tmp_path):
    cfg = small_config(**{"policy.kind": "fair_linucb"})
    rows, table = runner.sweep(cfg, "arm_ratio", ["1:2", "1:1"], seeds=[0, 1], out=tmp_path)
    assert len(rows) == 4 and len(table) == 2
    assert {t["arm_ratio"] for t in table} == {"1:2", "1:1"}
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "runs.csv").exists()
    assert (tmp_path / "arm_ratio=1-1" / "seed=1" / "rounds.csv").exists()


def test_sweep_parallel_matches_serial():
    cfg = small_config(**{"policy.kind": "fair_linucb"})
    serial, _ = runner.sweep(cfg, "gamma", [0.0, 3.0], seeds=[0, 1], workers=1)
    parallel, _ = runner.sweep(cfg, "gamma", [0.0, 3.0], seeds=[0, 1], workers=2)
    assert serial == parallel


def test_sweep_unknown_axis():
    with pytest.raises(ValueError):
        runner.sweep(small_config(), "alpha", [1.0], seeds=[0])


def test_compare_naive_rows():
    rows, table = runner.compare_naive(small_config(), seeds=[0], fair_gamma=2.0)
    assert [r.policy for r in rows] == ["linucb", "fair_linucb", "naive"]
    assert rows[1].gamma == 2.0


def test_naive_scores_only_masked_contexts(monkeypatch):
    cfg = small_config(**{"policy.kind": "naive"})
    world = runner.build_world(cfg, cfg.seed)
    policy = runner.make_policy(cfg, world)
    masked = sorted(policy.config.feature_mask)
    for name in SENSITIVE_FEATURES:
        assert world.space.index(name) in masked

    seen = []
    original = BanditPolicy.prepare

    def spy(self, contexts):
        out = original(self, contexts)
        seen.append(np.asarray(out)[..., masked].copy())
        return out

    monkeypatch.setattr(BanditPolicy, "prepare", spy)
    runner.run(cfg)
    assert seen
    assert all(not s.any() for s in seen)


# --------------------------------------------------------------------------- CLI

def write_cfg(tmp_path, cfg):
    path = tmp_path / "cfg.yaml"
    path.write_text(runner.dump_config(cfg))
    return path


def test_cli_run(tmp_path, capsys):
    path = write_cfg(tmp_path, small_config())
    out = tmp_path / "run"
    code = cli.main(["run", "--config", str(path), "--seed", "4", "--policy", "fair_linucb", "--gamma", "3",
                     "--out", str(out), "--save-state"])
    assert code == 0
    for name in ("rounds.csv", "summary.csv", "config.resolved"):
        assert (out / name).exists()
    assert (out / "state" / "manifest.json").exists()
    resolved = runner.load_config(out / "config.resolved")
    assert resolved.seed == 4 and resolved.policy.kind == "fair_linucb" and resolved.policy.gamma == 3.0
    assert "reward_difference" in capsys.readouterr().out


def test_cli_sweep_and_compare(tmp_path):
    path = write_cfg(tmp_path, small_config(**{"policy.kind": "fair_linucb"}))
    assert cli.main(["sweep", "--config", str(path), "--axis", "gamma", "--values", "0,3",
                     "--repetitions", "1", "--out", str(tmp_path / "sw")]) == 0
    assert len(read_summary(tmp_path / "sw" / "summary.csv")) == 2
    assert cli.main(["compare-naive", "--config", str(path), "--repetitions", "1",
                     "--out", str(tmp_path / "cn")]) == 0
    assert {r["policy"] for r in read_summary(tmp_path / "cn" / "summary.csv")} == {"linucb", "fair_linucb", "naive"}


@pytest.mark.parametrize("argv", [
    ["run", "--arm-ratio", "3:8"],
    ["run", "--oracle", "r7"],
    ["run", "--config", "/nonexistent.yaml"],
    ["sweep", "--axis", "ordering", "--values", "diagonal", "--repetitions", "1"],
])
def test_cli_rejects_bad_config(tmp_path, capsys, argv):
    code = cli.main(argv + ["--out", str(tmp_path / "x")])
    assert code != 0
    assert "fairbandit:" in capsys.readouterr().err
