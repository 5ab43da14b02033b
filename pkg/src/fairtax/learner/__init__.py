from .buffers import (
    FairReplayBuffer,
    NotReady,
    ReplayBuffer,
    Transition,
    mean_info_fairness,
    mean_obs_fairness,
)
from .sac import SAC, SacConfig, TrainingFault

__all__ = [
    "FairReplayBuffer",
    "NotReady",
    "ReplayBuffer",
    "SAC",
    "SacConfig",
    "TrainingFault",
    "Transition",
    "mean_info_fairness",
    "mean_obs_fairness",
]
