"""Unit tests for the clipped-surrogate PPO update."""

from __future__ import annotations

import typing as typ

import numpy as np
import pytest
import torch

from semnav import agent
from semnav.agent import AgentConfig, PolicyNetwork
from semnav.errors import ConfigError, OperationalError
from semnav.train.buffer import RolloutBuffer
from semnav.train.ppo import (
    PPOConfig,
    clipped_surrogate,
    make_optimizer,
    normalize_advantages,
    ppo_update,
)

if typ.TYPE_CHECKING:
    from semnav.train.ppo import UpdateStats

_CONFIG = AgentConfig(
    embed_dim=8, spm_dim=8, obs_encoder_dims=(8,), hidden_dim=8, n_rays=4
)


def _buffer(horizon: int = 4, n_envs: int = 2, target: float = 3.0) -> RolloutBuffer:
    """Return a filled buffer with zero advantages and constant returns."""
    rng = np.random.default_rng(0)
    buffer = RolloutBuffer.allocate(
        horizon, n_envs, n_rays=4, embed_dim=8, goal_dim=8, n_actions=6, hidden_dim=8
    )
    buffer.layout[:] = rng.random(buffer.layout.shape)
    buffer.semantic[:] = rng.normal(size=buffer.semantic.shape)
    buffer.goal[:] = rng.normal(size=buffer.goal.shape)
    buffer.starts[0] = True
    buffer.actions[:] = rng.integers(6, size=buffer.actions.shape)
    buffer.log_probs[:] = np.log(1 / 6)
    buffer.advantages = np.zeros((horizon, n_envs))
    buffer.returns = np.full((horizon, n_envs), target)
    return buffer


def _update(
    buffer: RolloutBuffer, network: PolicyNetwork, cfg: PPOConfig
) -> UpdateStats:
    optimizer = make_optimizer(network, cfg)
    return ppo_update(buffer, network, optimizer, cfg, np.random.default_rng(0))


class TestClippedSurrogate:
    """The PPO policy objective."""

    def test_positive_advantage_is_clipped_above(self) -> None:
        """Ratio 1.5 with advantage 1 and ε = 0.2 scores −1.2."""
        loss = clipped_surrogate(
            torch.tensor([np.log(1.5)]), torch.tensor([0.0]), torch.tensor([1.0]), 0.2
        )
        assert float(loss) == pytest.approx(-1.2)

    def test_negative_advantage_keeps_the_pessimistic_term(self) -> None:
        """Ratio 0.5 with advantage −1 is clipped to 0.8."""
        loss = clipped_surrogate(
            torch.tensor([np.log(0.5)]), torch.tensor([0.0]), torch.tensor([-1.0]), 0.2
        )
        assert float(loss) == pytest.approx(0.8)

    def test_unit_ratio_is_the_negated_mean_advantage(self) -> None:
        """On-policy the loss is ``−mean(A)``."""
        logp = torch.tensor([-1.0, -2.0])
        loss = clipped_surrogate(logp, logp, torch.tensor([1.0, 3.0]), 0.2)
        assert float(loss) == pytest.approx(-2.0)


class TestPPOConfig:
    """Round arithmetic and validation."""

    def test_rounds_divide_total_steps(self) -> None:
        """Each round collects ``horizon × n_envs`` transitions."""
        assert PPOConfig(horizon=8, n_envs=2, total_steps=40).rounds == 2

    @pytest.mark.parametrize(
        ("overrides", "key"),
        [
            ({"minibatches": 3, "n_envs": 2}, "ppo.minibatches"),
            ({"total_steps": 10, "horizon": 8, "n_envs": 2}, "ppo.total_steps"),
            ({"clip_epsilon": 1.5}, "ppo.clip_epsilon"),
            ({"epochs": 0}, "ppo.epochs"),
            ({"learning_rate": -1.0}, "ppo.learning_rate"),
        ],
    )
    def test_invalid_settings_name_their_key(
        self, overrides: dict[str, object], key: str
    ) -> None:
        """Each rejected value reports its dotted key."""
        with pytest.raises(ConfigError) as caught:
            PPOConfig(**overrides)  # type: ignore[arg-type]
        assert caught.value.key == key


def test_advantages_are_normalized() -> None:
    """Normalized advantages have mean 0 and standard deviation 1."""
    values = normalize_advantages(np.array([1.0, 2.0, 3.0, 10.0]))
    assert values.mean() == pytest.approx(0.0, abs=1e-12)
    assert values.std() == pytest.approx(1.0, abs=1e-6)


class TestPPOUpdate:
    """Optimisation over a stored rollout."""

    def test_zero_learning_rate_leaves_parameters_unchanged(self) -> None:
        """With lr 0 every parameter is bit-identical after the update."""
        network = PolicyNetwork(_CONFIG)
        before = agent.parameter_digest(network)
        cfg = PPOConfig(learning_rate=0.0, horizon=4, n_envs=2, total_steps=8)
        _update(_buffer(), network, cfg)
        assert agent.parameter_digest(network) == before

    def test_value_loss_falls_across_epochs(self) -> None:
        """Fitting constant returns lowers the critic loss epoch by epoch."""
        network = PolicyNetwork(_CONFIG)
        cfg = PPOConfig(
            learning_rate=1e-2,
            value_coef=1.0,
            entropy_coef=0.0,
            epochs=10,
            minibatches=1,
            horizon=4,
            n_envs=2,
            total_steps=8,
            max_grad_norm=10.0,
        )
        stats = _update(_buffer(), network, cfg)
        losses = stats.epoch_value_losses
        assert len(losses) == 10
        assert losses[-1] < losses[0], losses

    def test_update_changes_parameters(self) -> None:
        """A positive learning rate moves the weights."""
        network = PolicyNetwork(_CONFIG)
        before = agent.parameter_digest(network)
        cfg = PPOConfig(horizon=4, n_envs=2, total_steps=8)
        _update(_buffer(), network, cfg)
        assert agent.parameter_digest(network) != before

    def test_missing_advantages_abort(self) -> None:
        """The update refuses a buffer without advantages."""
        network = PolicyNetwork(_CONFIG)
        buffer = _buffer()
        buffer.advantages = None
        cfg = PPOConfig(horizon=4, n_envs=2, total_steps=8)
        with pytest.raises(OperationalError, match="compute_gae"):
            _update(buffer, network, cfg)

    def test_non_finite_loss_aborts_before_stepping(self) -> None:
        """A NaN return raises and leaves the weights untouched."""
        network = PolicyNetwork(_CONFIG)
        before = agent.parameter_digest(network)
        buffer = _buffer()
        assert buffer.returns is not None
        buffer.returns[1, 0] = np.nan
        cfg = PPOConfig(horizon=4, n_envs=2, total_steps=8, minibatches=1)
        with pytest.raises(OperationalError, match="non-finite PPO loss") as caught:
            _update(buffer, network, cfg)
        assert caught.value.operation == "ppo-update"
        assert agent.parameter_digest(network) == before
