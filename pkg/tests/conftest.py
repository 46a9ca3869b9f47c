"""Shared pytest fixtures for semnav tests.

Scenes, codebooks and episode sets are immutable, so the expensive ones are
built once per session and shared.
"""

from __future__ import annotations

import pytest

from semnav import world
from semnav.config import run_config_from_mapping
from semnav.episodes import Episode, EpisodeConfig, generate_episodes
from semnav.semspace import (
    Codebook,
    InstanceDescriptor,
    SemanticSpaceConfig,
    build_codebook,
)
from tests.unit.nav_test_support import (
    ROOM_ROWS,
    TINY_RUN,
    TinyWorld,
    build_tiny_world,
    descriptor,
)


@pytest.fixture(scope="session")
def space_config() -> SemanticSpaceConfig:
    """Return the default semantic space with a fixed seed."""
    return SemanticSpaceConfig(seed=7)


@pytest.fixture(scope="session")
def codebook(space_config: SemanticSpaceConfig) -> Codebook:
    """Return the codebook of :func:`space_config`."""
    return build_codebook(space_config)


@pytest.fixture(scope="session")
def bed() -> InstanceDescriptor:
    """Return the descriptor of the hand-built room's bed."""
    return descriptor("room/bed", "bed", color="blue", material="fabric", shape="low")


@pytest.fixture(scope="session")
def room_scene(bed: InstanceDescriptor) -> world.Scene:
    """Return a 5x3 open room with a bed on the middle of its east wall."""
    return world.scene_from_rows(
        ROOM_ROWS, [world.PlacedObject(bed, (6, 2))], scene_id="room"
    )


@pytest.fixture(scope="session")
def generated_scenes(space_config: SemanticSpaceConfig) -> list[world.Scene]:
    """Return two procedurally generated default scenes."""
    return world.generate_scenes(5, 2, world.WorldGenConfig(), space_config)


@pytest.fixture(scope="session")
def scene_map(generated_scenes: list[world.Scene]) -> dict[str, world.Scene]:
    """Return :func:`generated_scenes` keyed by scene id."""
    return {scene.scene_id: scene for scene in generated_scenes}


@pytest.fixture(scope="session")
def sample_episodes(
    generated_scenes: list[world.Scene], codebook: Codebook
) -> list[Episode]:
    """Return 24 entropy-selected episodes over the generated scenes."""
    return generate_episodes(generated_scenes, codebook, 11, EpisodeConfig(), 24)


@pytest.fixture(scope="session")
def tiny_world() -> TinyWorld:
    """Return scenes, codebook and episodes for the tiny pipeline run."""
    return build_tiny_world(run_config_from_mapping(TINY_RUN))
