"""Shared pytest plumbing: acceptance verdict lines and a per-session run cache."""

from __future__ import annotations

import os

import pytest

# (criterion number, passed, detail) appended by tests/test_acceptance.py
VERDICTS: list[tuple[int, bool, str]] = []


def record_verdict(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    VERDICTS.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(VERDICTS):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


class RunCache:
    """Summaries of full protocol runs keyed by (resolved config, seed).

    Only the test-phase and all-rounds summaries are kept, so the cache stays small.
    """

    def __init__(self):
        self._store: dict[tuple[str, int], dict] = {}

    def get(self, cfg, seed: int) -> dict:
        from fairbandit import runner
        from fairbandit.metrics import summarize

        key = (runner.dump_config(cfg), seed)
        if key not in self._store:
            res = runner.run(cfg, seed)
            all_rounds = summarize(res.records, policy=cfg.policy.kind, gamma=cfg.policy.gamma,
                                   arm_ratio=cfg.arms.ratio, ordering=cfg.ordering, oracle=cfg.oracle,
                                   seed=seed, phase=None)
            self._store[key] = {"test": res.summary, "all": all_rounds, "arms": [r.arm for r in res.records]}
        return self._store[key]


@pytest.fixture(scope="session")
def run_cache() -> RunCache:
    return RunCache()


@pytest.fixture(scope="session")
def acceptance_seeds() -> list[int]:
    n = int(os.environ.get("FAIRBANDIT_ACCEPTANCE_SEEDS", "10"))
    return list(range(n))
