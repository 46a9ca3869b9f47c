"""Shared support for the semnav unit tests.

Test-only builders for descriptors, hand-made view candidates and episodes,
plus the tiny run configuration the pipeline tests share.
"""

from __future__ import annotations

import dataclasses
import typing as typ

import numpy as np

from semnav import world
from semnav.episodes import Episode, ViewCandidate, generate_episodes
from semnav.semspace import InstanceDescriptor, build_codebook

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from semnav.config import RunConfig
    from semnav.semspace import Codebook

ROOM_ROWS: typ.Final = (
    "#######",
    "#.....#",
    "#.....#",
    "#.....#",
    "#######",
)

# Small enough that a full train/eval pipeline runs in seconds.
TINY_RUN: typ.Final[dict[str, object]] = {
    "seed": 3,
    "world": {
        "scene_count": 2,
        "rooms": 2,
        "size_range": [12, 14],
        "room_size": [3, 5],
    },
    "episodes": {"count": 12, "min_distance_m": 0.5, "max_distance_m": 3.0},
    "reward": {"success_reward_on": "stop"},
    "agent": {"spm_dim": 16, "obs_encoder_dims": [16], "hidden_dim": 16},
    "ppo": {
        "horizon": 8,
        "n_envs": 2,
        "minibatches": 2,
        "epochs": 2,
        "total_steps": 32,
        "max_episode_steps": 20,
        "checkpoint_every": 1,
    },
    "eval": {"max_steps": 60, "episodes": 0},
}


def descriptor(
    instance_id: str,
    category: str,
    *,
    color: str = "red",
    material: str = "wood",
    shape: str = "round",
    context: tuple[str, ...] = (),
) -> InstanceDescriptor:
    """Return a fully attributed instance descriptor."""
    return InstanceDescriptor(
        instance_id=instance_id,
        category=category,
        attributes={"color": color, "material": material, "shape": shape},
        context_tags=context,
    )


def candidate(
    index: int,
    entropy: float,
    embedding: np.ndarray | None = None,
    *,
    yaw: int = 0,
    pitch: int = 0,
) -> ViewCandidate:
    """Return a view candidate with the given entropy and embedding."""
    vector = np.ones(1) if embedding is None else embedding
    return ViewCandidate(
        index=index,
        pose=world.AgentPose.at_cell((1, 1), yaw, pitch),
        embedding=vector,
        layout=np.zeros(4),
        class_probs=np.ones(1),
        entropy=entropy,
    )


def manual_episode(
    goal: InstanceDescriptor,
    candidates: cabc.Sequence[ViewCandidate],
    goal_views: cabc.Sequence[int],
    *,
    episode_id: str = "manual/ep0",
) -> Episode:
    """Return an episode assembled from explicit candidates."""
    return Episode(
        episode_id=episode_id,
        scene_id="manual",
        start=world.AgentPose.at_cell((1, 1)),
        goal_instance=goal.instance_id,
        goal_category=goal.category,
        goal_cell=(1, 1),
        goal_views=tuple(goal_views),
        candidates=tuple(candidates),
        optimal_length=1.0,
        text_goal=goal,
    )


@dataclasses.dataclass(frozen=True, slots=True)
class TinyWorld:
    """Scenes, codebook and training episodes built from :data:`TINY_RUN`."""

    config: RunConfig
    scenes: dict[str, world.Scene]
    codebook: Codebook
    episodes: list[Episode]


def build_tiny_world(config: RunConfig) -> TinyWorld:
    """Generate the scenes and episodes *config* describes."""
    codebook = build_codebook(config.semspace)
    scenes = world.generate_scenes(
        config.seed,
        config.world.scene_count,
        config.world.generation(),
        config.semspace,
    )
    episodes = generate_episodes(
        scenes,
        codebook,
        config.seed,
        config.episodes.generation(),
        config.episodes.count,
        fov=config.world.fov(),
    )
    return TinyWorld(
        config, {scene.scene_id: scene for scene in scenes}, codebook, episodes
    )
