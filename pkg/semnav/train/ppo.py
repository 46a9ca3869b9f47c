"""Clipped-surrogate PPO update for the recurrent agent."""

from __future__ import annotations

import dataclasses
import logging
import math
import typing as typ

import numpy as np
import torch

from ..errors import ConfigError, OperationalError

if typ.TYPE_CHECKING:
    from ..agent import PolicyNetwork
    from .buffer import RolloutBuffer

_logger = logging.getLogger(__name__)

ADVANTAGE_EPSILON: typ.Final = 1e-8


@dataclasses.dataclass(frozen=True, slots=True)
class PPOConfig:
    """On-policy optimisation settings.

    ``total_steps`` counts environment transitions over all environments;
    training runs ``total_steps // (horizon × n_envs)`` rounds.
    """

    clip_epsilon: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatches: int = 2
    learning_rate: float = 2.5e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    max_episode_steps: int = 200
    horizon: int = 128
    n_envs: int = 8
    total_steps: int = 200_000
    checkpoint_every: int = 10
    sample_with_replacement: bool = True

    def __post_init__(self) -> None:
        """Reject values outside their documented ranges."""
        if not 0 < self.clip_epsilon < 1:
            raise ConfigError("ppo.clip_epsilon", "must lie in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ConfigError("ppo.gamma", "must lie in (0, 1]")
        if not 0 < self.gae_lambda <= 1:
            raise ConfigError("ppo.gae_lambda", "must lie in (0, 1]")
        if self.learning_rate < 0:
            raise ConfigError("ppo.learning_rate", "must be non-negative")
        for key in ("epochs", "minibatches", "horizon", "n_envs", "max_episode_steps"):
            if getattr(self, key) < 1:
                raise ConfigError(f"ppo.{key}", "must be at least 1")
        if self.minibatches > self.n_envs:
            raise ConfigError(
                "ppo.minibatches",
                f"cannot exceed n_envs ({self.n_envs}); minibatches split env columns",
            )
        if self.total_steps < self.horizon * self.n_envs:
            raise ConfigError(
                "ppo.total_steps", "must cover at least one rollout round"
            )

    @property
    def rounds(self) -> int:
        """Return the number of collect/update rounds."""
        return self.total_steps // (self.horizon * self.n_envs)


@dataclasses.dataclass(frozen=True, slots=True)
class UpdateStats:
    """Mean losses over every minibatch of one update."""

    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    epoch_value_losses: tuple[float, ...] = ()


def clipped_surrogate(
    logp_new: torch.Tensor,
    logp_old: torch.Tensor,
    advantages: torch.Tensor,
    clip: float,
) -> torch.Tensor:
    """Return the PPO policy loss ``−mean(min(ρA, clip(ρ, 1±ε)A))``."""
    ratio = torch.exp(logp_new - logp_old)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages
    return -torch.minimum(unclipped, clipped).mean()


def make_optimizer(network: PolicyNetwork, cfg: PPOConfig) -> torch.optim.Adam:
    """Return the Adam optimizer the trainer keeps across rounds."""
    return torch.optim.Adam(
        network.parameters(),
        lr=cfg.learning_rate,
        betas=cfg.adam_betas,
        eps=cfg.adam_eps,
    )


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Return advantages shifted to mean 0 and scaled to std 1."""
    return (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPSILON)


def _columns(buffer: RolloutBuffer, columns: np.ndarray) -> dict[str, torch.Tensor]:
    def take(values: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(values[:, columns])

    return {
        "layout": take(buffer.layout),
        "semantic": take(buffer.semantic),
        "goal": take(buffer.goal),
        "prev_action": take(buffer.prev_action),
        "starts": take(buffer.starts),
        "hidden": torch.as_tensor(buffer.hidden0[columns]),
    }


def ppo_update(
    buffer: RolloutBuffer,
    network: PolicyNetwork,
    optimizer: torch.optim.Optimizer,
    cfg: PPOConfig,
    rng: np.random.Generator,
) -> UpdateStats:
    """Run ``cfg.epochs`` passes of minibatch PPO over *buffer*.

    Minibatches are groups of whole environment columns, so each one replays
    complete sub-sequences from its stored hidden state. A non-finite loss
    aborts the update with :class:`~semnav.errors.OperationalError` before
    any parameter changes for that minibatch.
    """
    if buffer.advantages is None or buffer.returns is None:
        message = "compute_gae must run before ppo_update"
        raise OperationalError(message, operation="ppo-update")
    advantages = torch.as_tensor(normalize_advantages(buffer.advantages))
    returns = torch.as_tensor(buffer.returns)
    old_log_probs = torch.as_tensor(buffer.log_probs)
    actions = torch.as_tensor(buffer.actions)
    totals = {"policy": 0.0, "value": 0.0, "entropy": 0.0, "clip": 0.0, "kl": 0.0}
    epoch_values: list[float] = []
    count = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(buffer.n_envs)
        epoch_value = 0.0
        groups = np.array_split(order, cfg.minibatches)
        for columns in groups:
            batch = _columns(buffer, columns)
            logits, values = network.evaluate_sequence(**batch)
            log_probs = torch.log_softmax(logits, dim=-1)
            chosen = log_probs.gather(-1, actions[:, columns].unsqueeze(-1)).squeeze(-1)
            old = old_log_probs[:, columns]
            policy_loss = clipped_surrogate(
                chosen, old, advantages[:, columns], cfg.clip_epsilon
            )
            value_loss = ((returns[:, columns] - values) ** 2).mean()
            entropy = -(log_probs.exp() * log_probs).sum(-1).mean()
            loss = (
                policy_loss
                + cfg.value_coef * value_loss
                - cfg.entropy_coef * entropy
            )
            if not torch.isfinite(loss):
                message = (
                    f"non-finite PPO loss in epoch {epoch} "
                    f"(policy={float(policy_loss)}, value={float(value_loss)}, "
                    f"entropy={float(entropy)})"
                )
                raise OperationalError(message, operation="ppo-update")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(network.parameters(), cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                ratio = torch.exp(chosen - old)
                totals["clip"] += float(
                    ((ratio - 1.0).abs() > cfg.clip_epsilon).double().mean()
                )
                totals["kl"] += float((old - chosen).mean())
            totals["policy"] += float(policy_loss)
            totals["value"] += float(value_loss)
            totals["entropy"] += float(entropy)
            epoch_value += float(value_loss)
            count += 1
        epoch_values.append(epoch_value / len(groups))
    stats = UpdateStats(
        policy_loss=totals["policy"] / count,
        value_loss=totals["value"] / count,
        entropy=totals["entropy"] / count,
        clip_fraction=totals["clip"] / count,
        approx_kl=totals["kl"] / count,
        epoch_value_losses=tuple(epoch_values),
    )
    if not all(math.isfinite(value) for value in (stats.policy_loss, stats.value_loss)):
        message = "PPO statistics are non-finite"
        raise OperationalError(message, operation="ppo-update")
    _logger.debug(
        "ppo update policy=%.4f value=%.4f entropy=%.4f clip=%.3f",
        stats.policy_loss,
        stats.value_loss,
        stats.entropy,
        stats.clip_fraction,
    )
    return stats
