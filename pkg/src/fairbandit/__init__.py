"""Fairness-aware linear contextual bandits and a simulated recommendation harness."""

from .groups import Group
from .policy import BanditPolicy, PolicyConfig
from .runner import ExperimentConfig, load_config, run

__all__ = ["BanditPolicy", "ExperimentConfig", "Group", "PolicyConfig", "load_config", "run"]
