"""On-policy training of the navigation agent."""

from __future__ import annotations

from .buffer import RolloutBuffer, compute_gae, gae
from .env import EpisodeSource, NavigationEnv, StepResult, TrainingError, training_goal
from .loop import RoundStats, TrainResult, train
from .ppo import PPOConfig, UpdateStats, clipped_surrogate, ppo_update
from .rollout import EnvWorker, EpisodeSummary, build_workers, collect_rollouts

__all__ = [
    "EnvWorker",
    "EpisodeSource",
    "EpisodeSummary",
    "NavigationEnv",
    "PPOConfig",
    "RolloutBuffer",
    "RoundStats",
    "StepResult",
    "TrainResult",
    "TrainingError",
    "UpdateStats",
    "build_workers",
    "clipped_surrogate",
    "collect_rollouts",
    "compute_gae",
    "gae",
    "ppo_update",
    "train",
    "training_goal",
]
