"""Parallel on-policy rollout collection.

Each :class:`EnvWorker` owns an environment, an episode source and a random
stream derived from ``(seed, "rollout", env_index)``. Workers only read the
network, so any number of threads produces the same buffer as one.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import typing as typ

import numpy as np
import torch

from .. import agent, seeding
from .buffer import RolloutBuffer
from .env import EpisodeSource, NavigationEnv, training_goal

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from .. import world
    from ..episodes import Episode
    from ..reward import RewardConfig
    from ..semspace import Codebook
    from .env import StepResult

_logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, slots=True)
class EpisodeSummary:
    """Outcome of one finished training episode."""

    episode_id: str
    env_index: int
    success: bool
    steps: int
    episode_return: float
    path_length: float


class EnvWorker:
    """One environment column of the rollout buffer.

    Episodes run on across collection rounds; a round that ends mid-episode
    resumes it in the next round from the stored recurrent state.
    """

    def __init__(
        self,
        env_index: int,
        env: NavigationEnv,
        episodes: cabc.Sequence[Episode],
        seed: int,
        config: agent.AgentConfig,
        *,
        replace: bool = True,
    ) -> None:
        """Create the worker and start its first episode."""
        self.env_index = env_index
        self.env = env
        self.config = config
        self.rng = seeding.generator(seed, "rollout", env_index)
        self.source = EpisodeSource(
            episodes,
            seeding.generator(seed, "episode-source", env_index),
            replace=replace,
        )
        self.trajectory: list[dict[str, object]] = []
        self.goal_vector = np.zeros(0)
        self.state = agent.initial_state(config)
        self.episode_return = 0.0
        self.starting = True
        self.observation = self._begin()

    def _begin(self) -> world.Observation:
        episode = self.source.next()
        goal, goal_pose = training_goal(episode, self.rng)
        observation = self.env.reset(episode, goal, goal_pose)
        self.goal_vector = agent.goal_input(self.config, goal)
        self.state = agent.initial_state(self.config)
        self.episode_return = 0.0
        self.starting = True
        return observation

    def collect(
        self,
        network: agent.PolicyNetwork,
        buffer: RolloutBuffer,
        *,
        log_trajectories: bool = False,
    ) -> list[EpisodeSummary]:
        """Fill column ``env_index`` of *buffer*; return finished episodes."""
        column = self.env_index
        buffer.hidden0[column] = self.state.hidden
        finished: list[EpisodeSummary] = []
        self.trajectory = []
        for t in range(buffer.horizon):
            observation = self.observation
            buffer.layout[t, column] = observation.layout
            buffer.semantic[t, column] = observation.semantic
            buffer.goal[t, column] = self.goal_vector
            buffer.prev_action[t, column] = self.state.prev_action
            buffer.starts[t, column] = self.starting
            logits, value, hidden = self._forward(network, observation)
            action = agent.act(logits, "sample", self.rng)
            result = self.env.step(action)
            buffer.actions[t, column] = action
            buffer.log_probs[t, column] = float(
                np.log(agent.action_probabilities(logits)[action])
            )
            buffer.values[t, column] = value
            buffer.rewards[t, column] = result.reward
            buffer.dones[t, column] = result.done
            self.episode_return += result.reward
            if log_trajectories:
                self.trajectory.append(self._record(t, action, result))
            self.state = agent.PolicyState(
                hidden, self.state.prev_action
            ).with_action(action)
            self.observation = result.observation
            self.starting = False
            if result.done:
                finished.append(
                    EpisodeSummary(
                        episode_id=self.env.context.episode.episode_id,
                        env_index=column,
                        success=result.success,
                        steps=self.env.steps,
                        episode_return=self.episode_return,
                        path_length=self.env.path_length,
                    )
                )
                self.observation = self._begin()
        # A done final step masks this bootstrap value inside the GAE recursion.
        _, buffer.last_values[column], _ = self._forward(network, self.observation)
        return finished

    def _forward(
        self, network: agent.PolicyNetwork, observation: world.Observation
    ) -> tuple[np.ndarray, float, np.ndarray]:
        with torch.no_grad():
            logits, value, hidden = network(
                _row(observation.layout),
                _row(observation.semantic),
                _row(self.goal_vector),
                _row(self.state.prev_action),
                _row(self.state.hidden),
            )
        return (
            logits.squeeze(0).numpy().copy(),
            float(value.item()),
            hidden.squeeze(0).numpy().copy(),
        )

    def _record(self, t: int, action: int, result: StepResult) -> dict[str, object]:
        pose = self.env.pose
        return {
            "env": self.env_index,
            "episode_id": self.env.context.episode.episode_id,
            "t": t,
            "action": action,
            "pose": [pose.x, pose.y, pose.yaw, pose.pitch],
            "d": result.snapshot.d,
            "yaw_err": result.snapshot.yaw_err,
            "pitch_err": result.snapshot.pitch_err,
            "reward": result.terms.as_dict(),
            "done": result.done,
            "success": result.success,
        }


def _row(values: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.asarray(values, dtype=np.float64)).unsqueeze(0)


def build_workers(
    n_envs: int,
    scenes: typ.Mapping[str, world.Scene],
    codebook: Codebook,
    reward_config: RewardConfig,
    episodes: cabc.Sequence[Episode],
    seed: int,
    config: agent.AgentConfig,
    *,
    headings: int,
    fov: world.FovConfig,
    max_steps: int,
    replace: bool = True,
) -> list[EnvWorker]:
    """Return *n_envs* independent workers sharing scenes and codebook."""
    return [
        EnvWorker(
            index,
            NavigationEnv(
                scenes,
                codebook,
                reward_config,
                headings=headings,
                fov=fov,
                max_steps=max_steps,
            ),
            episodes,
            seed,
            config,
            replace=replace,
        )
        for index in range(n_envs)
    ]


def collect_rollouts(
    workers: cabc.Sequence[EnvWorker],
    network: agent.PolicyNetwork,
    horizon: int,
    *,
    threads: int = 1,
    log_trajectories: bool = False,
) -> tuple[RolloutBuffer, list[EpisodeSummary]]:
    """Fill a ``horizon × len(workers)`` buffer with on-policy transitions."""
    config = network.config
    buffer = RolloutBuffer.allocate(
        horizon,
        len(workers),
        n_rays=config.n_rays,
        embed_dim=config.embed_dim,
        goal_dim=network.goal_dim,
        n_actions=config.n_actions,
        hidden_dim=config.hidden_dim,
    )

    def run(worker: EnvWorker) -> list[EpisodeSummary]:
        return worker.collect(network, buffer, log_trajectories=log_trajectories)

    if threads <= 1:
        results = [run(worker) for worker in workers]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, workers))
    finished = [summary for batch in results for summary in batch]
    _logger.debug(
        "collected %d transitions, %d episodes finished", len(buffer), len(finished)
    )
    return buffer, finished
