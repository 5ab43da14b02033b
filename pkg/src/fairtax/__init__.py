"""Fairness-aware taxation of pricing firms, learned by a social planner."""

from .envs import EpisodeConfig, PlannerEnv, evaluate, make_env
from .firm import FirmSpec, PriceGrid, best_response, default_firms, optimize_agnostic, optimize_aware
from .market import ConsumerGroup, NoiseConfig, fairness, purchase_probability
from .planner import PlannerAction, TaxSchedule, bracket_of, sp_reward

__version__ = "0.1.0"

__all__ = [
    "ConsumerGroup",
    "EpisodeConfig",
    "FirmSpec",
    "NoiseConfig",
    "PlannerAction",
    "PlannerEnv",
    "PriceGrid",
    "TaxSchedule",
    "best_response",
    "bracket_of",
    "default_firms",
    "evaluate",
    "fairness",
    "make_env",
    "optimize_agnostic",
    "optimize_aware",
    "purchase_probability",
    "sp_reward",
]
