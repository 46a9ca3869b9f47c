"""Single navigation environment and per-env episode sampling."""

from __future__ import annotations

import dataclasses
import typing as typ

import numpy as np

from .. import reward, world
from ..agent import EpisodeContext, Goal
from ..errors import SemnavError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from ..episodes import Episode
    from ..semspace import Codebook


class TrainingError(SemnavError):
    """Raised when training cannot proceed as configured."""


@dataclasses.dataclass(frozen=True, slots=True)
class StepResult:
    """Outcome of one environment step."""

    observation: world.Observation
    reward: float
    terms: reward.RewardTerms
    snapshot: reward.StepSnapshot
    done: bool
    stopped: bool
    success: bool


class EpisodeSource:
    """Seeded sampler over training episodes for one environment.

    With replacement it never runs dry; without replacement it walks one
    seeded permutation and raises :class:`TrainingError` once exhausted.
    """

    def __init__(
        self,
        episodes: cabc.Sequence[Episode],
        rng: np.random.Generator,
        *,
        replace: bool = True,
    ) -> None:
        """Sample from *episodes* with the stream *rng*."""
        if not episodes:
            message = "episode source needs at least one episode"
            raise TrainingError(message)
        self._episodes = episodes
        self._rng = rng
        self._replace = replace
        self._order = (
            [] if replace else [int(i) for i in rng.permutation(len(episodes))]
        )

    def next(self) -> Episode:
        """Return the next training episode."""
        if self._replace:
            return self._episodes[int(self._rng.integers(len(self._episodes)))]
        if not self._order:
            message = "episode source exhausted"
            raise TrainingError(message)
        return self._episodes[self._order.pop(0)]


def training_goal(
    episode: Episode, rng: np.random.Generator
) -> tuple[Goal, world.AgentPose]:
    """Pick one of the episode's goal views; return it as a goal and its pose."""
    index = episode.goal_views[int(rng.integers(len(episode.goal_views)))]
    view = episode.view(index)
    return Goal(embedding=view.embedding, layout=view.layout), view.pose


class NavigationEnv:
    """Gridworld episode runner with perspective-relaxed rewards.

    Scenes and the codebook are shared read-only; each environment owns its
    pose, distance field and step counter.
    """

    def __init__(
        self,
        scenes: typ.Mapping[str, world.Scene],
        codebook: Codebook,
        reward_config: reward.RewardConfig,
        *,
        headings: int = world.DEFAULT_HEADINGS,
        fov: world.FovConfig | None = None,
        max_steps: int = 200,
    ) -> None:
        """Bind the environment to its shared scenes and settings."""
        self.scenes = scenes
        self.codebook = codebook
        self.reward_config = reward_config
        self.headings = headings
        self.fov = fov or world.FovConfig()
        self.max_steps = max_steps
        self._context: EpisodeContext | None = None
        self._field: np.ndarray | None = None
        self._goal_pose = world.AgentPose(0.0, 0.0, 0)
        self.pose = world.AgentPose(0.0, 0.0, 0)
        self.steps = 0
        self.path_length = 0.0
        self._snapshot = reward.StepSnapshot(0.0, 0.0)

    @property
    def context(self) -> EpisodeContext:
        """Return the running episode's context."""
        if self._context is None:
            message = "environment used before reset"
            raise TrainingError(message)
        return self._context

    def scene_for(self, episode: Episode) -> world.Scene:
        """Return the scene *episode* plays in."""
        try:
            return self.scenes[episode.scene_id]
        except KeyError:
            message = (
                f"episode {episode.episode_id!r} refers to unknown scene "
                f"{episode.scene_id!r}"
            )
            raise TrainingError(message) from None

    def reset(
        self,
        episode: Episode,
        goal: Goal,
        goal_pose: world.AgentPose,
        goal_cells: cabc.Sequence[world.Cell] | None = None,
    ) -> world.Observation:
        """Start *episode*; distances are measured to *goal_cells*.

        *goal_cells* defaults to the goal instance's viewpoints.
        """
        scene = self.scene_for(episode)
        cells = tuple(goal_cells or scene.viewpoints[episode.goal_instance])
        self._context = EpisodeContext(scene, episode, goal, cells, self.headings)
        self._field = world.distance_field(scene, cells)
        self._goal_pose = goal_pose
        self.pose = episode.start
        self.steps = 0
        self.path_length = 0.0
        self._snapshot = self.snapshot()
        return world.render(scene, self.pose, self.codebook, self.fov, self.headings)

    def snapshot(self) -> reward.StepSnapshot:
        """Return the current distance and view errors."""
        if self._field is None:
            message = "environment used before reset"
            raise TrainingError(message)
        distance = world.field_distance(self._field, self.pose.cell)
        return reward.snapshot(distance, self.pose, self._goal_pose, self.headings)

    def step(self, action: int) -> StepResult:
        """Apply *action*, score it and report termination."""
        scene = self.context.scene
        before = self.pose
        self.pose = world.step(scene, before, action, self.headings)
        self.path_length += world.displacement(before, self.pose)
        self.steps += 1
        stopped = world.Action(action) is world.Action.STOP
        current = self.snapshot()
        terms = reward.reward_terms(
            self._snapshot, current, self.reward_config, stopped=stopped
        )
        self._snapshot = current
        success = reward.success_test(current, self.reward_config, stopped=stopped)
        observation = world.render(
            scene, self.pose, self.codebook, self.fov, self.headings
        )
        return StepResult(
            observation=observation,
            reward=terms.total,
            terms=terms,
            snapshot=current,
            done=stopped or self.steps >= self.max_steps,
            stopped=stopped,
            success=success,
        )
