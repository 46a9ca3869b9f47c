"""Fixed-capacity on-policy rollout storage and advantage estimation."""

from __future__ import annotations

import dataclasses
import typing as typ

import numpy as np

if typ.TYPE_CHECKING:
    import numpy.typing as npt


@dataclasses.dataclass(slots=True, eq=False)
class RolloutBuffer:
    """Transitions laid out ``(horizon, n_envs, ·)``.

    Column ``b`` is one environment's contiguous trajectory; ``hidden0[b]``
    is its recurrent state before the first stored step and ``starts``
    marks steps that open a new episode, where the state is reset.
    """

    layout: np.ndarray
    semantic: np.ndarray
    goal: np.ndarray
    prev_action: np.ndarray
    starts: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    hidden0: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @classmethod
    def allocate(
        cls,
        horizon: int,
        n_envs: int,
        *,
        n_rays: int,
        embed_dim: int,
        goal_dim: int,
        n_actions: int,
        hidden_dim: int,
    ) -> RolloutBuffer:
        """Return a zero-filled buffer of capacity ``horizon × n_envs``."""
        shape = (horizon, n_envs)
        return cls(
            layout=np.zeros((*shape, n_rays)),
            semantic=np.zeros((*shape, embed_dim)),
            goal=np.zeros((*shape, goal_dim)),
            prev_action=np.zeros((*shape, n_actions)),
            starts=np.zeros(shape, dtype=bool),
            actions=np.zeros(shape, dtype=np.int64),
            log_probs=np.zeros(shape),
            values=np.zeros(shape),
            rewards=np.zeros(shape),
            dones=np.zeros(shape, dtype=bool),
            hidden0=np.zeros((n_envs, hidden_dim)),
            last_values=np.zeros(n_envs),
        )

    @property
    def horizon(self) -> int:
        """Return the number of steps per environment."""
        return int(self.rewards.shape[0])

    @property
    def n_envs(self) -> int:
        """Return the number of environment columns."""
        return int(self.rewards.shape[1])

    def __len__(self) -> int:
        """Return the number of stored transitions."""
        return int(self.rewards.size)


def gae(
    rewards: npt.ArrayLike,
    values: npt.ArrayLike,
    dones: npt.ArrayLike,
    last_value: npt.ArrayLike,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(advantages, returns)`` along axis 0.

    ``δ_t = r_t + γ V_{t+1} (1 − done_t) − V_t`` and
    ``A_t = δ_t + γ λ (1 − done_t) A_{t+1}``; ``V_T`` is *last_value*.
    A done step never bootstraps from the step after it.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    live = 1.0 - np.asarray(dones, dtype=np.float64)
    next_value = np.asarray(last_value, dtype=np.float64)
    advantages = np.zeros_like(r)
    running = np.zeros_like(next_value)
    for t in range(r.shape[0] - 1, -1, -1):
        delta = r[t] + gamma * next_value * live[t] - v[t]
        running = delta + gamma * lam * live[t] * running
        advantages[t] = running
        next_value = v[t]
    return advantages, advantages + v


def compute_gae(
    buffer: RolloutBuffer, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Fill and return the buffer's advantages and returns."""
    advantages, returns = gae(
        buffer.rewards, buffer.values, buffer.dones, buffer.last_values, gamma, lam
    )
    buffer.advantages = advantages
    buffer.returns = returns
    return advantages, returns
