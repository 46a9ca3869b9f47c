"""Unit tests for the recurrent navigation agent."""

from __future__ import annotations

import typing as typ

import numpy as np
import pytest
import torch

from semnav import agent, world
from semnav.agent import AgentConfig, AgentError, Goal, PolicyNetwork
from tests.unit.nav_test_support import candidate, descriptor, manual_episode

if typ.TYPE_CHECKING:
    import pathlib

    from semnav.semspace import Codebook

SMALL: typ.Final = {
    "embed_dim": 8,
    "spm_dim": 8,
    "obs_encoder_dims": (8,),
    "hidden_dim": 8,
    "n_rays": 4,
}


def _small(variant: agent.Variant = "psl", seed: int = 0) -> AgentConfig:
    return AgentConfig(variant=variant, seed=seed, **SMALL)  # type: ignore[arg-type]


def _observation(config: AgentConfig, seed: int = 0) -> world.Observation:
    rng = np.random.default_rng(seed)
    semantic = rng.normal(size=config.embed_dim)
    return world.Observation(
        layout=rng.random(config.n_rays), semantic=semantic / np.linalg.norm(semantic)
    )


def _goal(config: AgentConfig, seed: int = 1) -> Goal:
    vector = np.random.default_rng(seed).normal(size=config.embed_dim)
    return Goal(vector / np.linalg.norm(vector))


def _batch(
    config: AgentConfig, steps: int = 3, envs: int = 2
) -> dict[str, torch.Tensor]:
    generator = torch.Generator().manual_seed(4)

    def noise(*shape: int) -> torch.Tensor:
        return torch.rand(*shape, generator=generator, dtype=torch.float64)

    starts = torch.zeros(steps, envs, dtype=torch.bool)
    starts[0] = True
    if envs > 1:
        starts[steps - 1, 1] = True
    prev = torch.zeros(steps, envs, config.n_actions, dtype=torch.float64)
    prev[1:, :, 0] = 1.0
    return {
        "layout": noise(steps, envs, config.n_rays),
        "semantic": noise(steps, envs, config.embed_dim),
        "goal": noise(steps, envs, config.embed_dim),
        "prev_action": prev,
        "starts": starts,
        "hidden": torch.zeros(envs, config.hidden_dim, dtype=torch.float64),
    }


class TestAgentConfig:
    """Dimension contract of the network configuration."""

    @pytest.mark.parametrize(
        ("overrides", "match"),
        [
            ({"variant": "vision"}, "unknown variant"),
            ({"spm_dim": 128}, "spm_dim must be below"),
            ({"n_actions": 5}, "n_actions must be 6"),
            ({"obs_encoder_dims": ()}, "obs_encoder_dims"),
            ({"hidden_dim": 0}, "positive"),
        ],
    )
    def test_invalid_shapes_are_rejected(
        self, overrides: dict[str, object], match: str
    ) -> None:
        """Each broken dimension is reported."""
        with pytest.raises(AgentError, match=match):
            AgentConfig(**overrides)  # type: ignore[arg-type]

    def test_mapping_round_trip(self) -> None:
        """``as_dict`` and ``from_dict`` agree."""
        config = _small("zson", seed=3)
        assert AgentConfig.from_dict(config.as_dict()) == config


class TestPolicyNetwork:
    """Network construction per variant."""

    def test_initialization_is_seeded(self) -> None:
        """The same seed yields identical parameters; another seed does not."""
        first = agent.parameter_digest(PolicyNetwork(_small(seed=1)))
        again = agent.parameter_digest(PolicyNetwork(_small(seed=1)))
        other = agent.parameter_digest(PolicyNetwork(_small(seed=2)))
        assert first == again
        assert first != other

    def test_initialization_leaves_the_global_rng_alone(self) -> None:
        """Building a network does not advance torch's default stream."""
        torch.manual_seed(0)
        expected = torch.rand(1)
        torch.manual_seed(0)
        PolicyNetwork(_small())
        assert torch.equal(torch.rand(1), expected)

    def test_semantic_only_has_no_observation_encoder(self) -> None:
        """The ``so`` variant trains no encoder and no SPM."""
        names = {name for name, _ in PolicyNetwork(_small("so")).named_parameters()}
        assert not any(name.startswith(("encoder", "spm")) for name in names)

    def test_only_psl_has_the_perception_module(self) -> None:
        """SPM parameters exist only for the ``psl`` variant."""
        for variant in agent.VARIANTS:
            network = PolicyNetwork(_small(variant))
            names = {name for name, _ in network.named_parameters()}
            assert any(name.startswith("spm") for name in names) == (variant == "psl")

    def test_described_with_its_parameter_count(self) -> None:
        """The summary names the variant."""
        summary = agent.describe_network(PolicyNetwork(_small("lo")))
        assert summary.startswith("lo agent with ")


class TestEncodeInputs:
    """Per-step encodings ``z_O`` and ``z_SP``."""

    def test_psl_shapes(self) -> None:
        """Encoder and SPM widths come from the configuration."""
        config = _small()
        z_obs, z_goal = agent.encode_inputs(
            _observation(config), _goal(config), PolicyNetwork(config)
        )
        assert z_obs.shape == (8,)
        assert z_goal.shape == (8,)

    def test_zson_passes_the_goal_through(self) -> None:
        """Without an SPM the goal embedding is the goal encoding."""
        config = _small("zson")
        goal = _goal(config)
        _, z_goal = agent.encode_inputs(
            _observation(config), goal, PolicyNetwork(config)
        )
        np.testing.assert_allclose(z_goal, goal.embedding)

    def test_layout_only_text_goal_is_zeros(self) -> None:
        """Goals without a layout profile give a zero goal input."""
        config = _small("lo")
        assert np.array_equal(agent.goal_input(config, _goal(config)), np.zeros(4))

    def test_wrong_layout_width_is_rejected(self) -> None:
        """Ray count must match the network."""
        config = _small()
        observation = world.Observation(np.zeros(5), _observation(config).semantic)
        with pytest.raises(AgentError, match="layout has shape"):
            agent.encode_inputs(observation, _goal(config), PolicyNetwork(config))

    def test_wrong_goal_width_is_rejected(self) -> None:
        """Goal embeddings must match the embedding width."""
        config = _small()
        with pytest.raises(AgentError, match="goal input"):
            agent.goal_input(config, Goal(np.ones(3)))

    def test_spm_weights_change_the_goal_encoding(self) -> None:
        """Perturbing the SPM moves ``z_SP``."""
        config = _small()
        network = PolicyNetwork(config)
        observation, goal = _observation(config), _goal(config)
        _, before = agent.encode_inputs(observation, goal, network)
        with torch.no_grad():
            network.spm[0].weight.add_(1e-3)  # type: ignore[index]
        _, after = agent.encode_inputs(observation, goal, network)
        assert not np.allclose(before, after)


class TestPolicyStep:
    """One recurrent step."""

    def test_outputs_and_state(self) -> None:
        """Six logits, a scalar value and a new hidden state."""
        config = _small()
        network = PolicyNetwork(config)
        state = agent.initial_state(config).with_action(2)
        z_obs, z_goal = agent.encode_inputs(
            _observation(config), _goal(config), network
        )
        logits, value, next_state = agent.policy_step(z_goal, z_obs, state, network)
        assert logits.shape == (6,)
        assert isinstance(value, float)
        assert next_state.hidden.shape == (8,)
        assert np.array_equal(next_state.prev_action, state.prev_action)

    def test_recurrent_weights_matter(self) -> None:
        """A perturbed ``weight_hh`` changes the logits from a non-zero state."""
        config = _small()
        network = PolicyNetwork(config)
        state = agent.PolicyState(np.full(8, 0.5), np.zeros(6))
        z_obs, z_goal = agent.encode_inputs(
            _observation(config), _goal(config), network
        )
        before, _, _ = agent.policy_step(z_goal, z_obs, state, network)
        with torch.no_grad():
            network.gru.weight_hh.add_(1e-2)
        after, _, _ = agent.policy_step(z_goal, z_obs, state, network)
        assert not np.allclose(before, after)

    def test_non_finite_inputs_are_rejected(self) -> None:
        """NaN encodings never reach the GRU."""
        config = _small()
        network = PolicyNetwork(config)
        z = np.full(8, np.nan)
        with pytest.raises(AgentError, match="finite"):
            agent.policy_step(z, np.zeros(8), agent.initial_state(config), network)

    def test_non_finite_parameters_are_rejected(self) -> None:
        """A diverged network refuses to act."""
        config = _small()
        network = PolicyNetwork(config)
        with torch.no_grad():
            network.actor.bias[0] = float("nan")
        with pytest.raises(AgentError, match="actor.bias"):
            agent.policy_step(
                np.zeros(8), np.zeros(8), agent.initial_state(config), network
            )

    def test_sequence_replay_matches_stepping(self) -> None:
        """``evaluate_sequence`` reproduces step-by-step logits and values."""
        config = _small()
        network = PolicyNetwork(config)
        batch = _batch(config, steps=3, envs=1)
        with torch.no_grad():
            logits, values = network.evaluate_sequence(**batch)
            hidden = batch["hidden"]
            for t in range(3):
                step_logits, step_value, hidden = network(
                    batch["layout"][t],
                    batch["semantic"][t],
                    batch["goal"][t],
                    batch["prev_action"][t],
                    hidden,
                )
                torch.testing.assert_close(logits[t], step_logits)
                torch.testing.assert_close(values[t], step_value)


class TestAct:
    """Action selection."""

    def test_greedy_ties_pick_the_lowest_index(self) -> None:
        """Equal maxima resolve to the first action."""
        logits = np.array([0.0, 2.0, 2.0, 1.0, 0.0, 0.0])
        assert agent.act(logits, "greedy", np.random.default_rng(0)) == 1

    def test_sampling_follows_a_peaked_distribution(self) -> None:
        """An overwhelming logit is always sampled."""
        logits = np.array([0.0, 0.0, 60.0, 0.0, 0.0, 0.0])
        rng = np.random.default_rng(0)
        assert {agent.act(logits, "sample", rng) for _ in range(50)} == {2}

    def test_probabilities_sum_to_one(self) -> None:
        """Softmax of large logits stays finite."""
        probs = agent.action_probabilities(np.array([1000.0, 999.0, 0.0]))
        assert probs.sum() == pytest.approx(1.0)
        assert probs[0] > probs[1] > probs[2]


def test_gradients_match_finite_differences() -> None:
    """Autograd agrees with central differences on every parameter group."""
    config = _small()
    network = PolicyNetwork(config)
    errors = agent.gradient_check(network, _batch(config), action=3, samples=120)
    assert errors
    assert max(errors.values()) < 1e-4, errors


class TestCheckpoints:
    """Checkpoint files and scripted-policy sentinels."""

    def test_round_trip(self, tmp_path: pathlib.Path) -> None:
        """A saved network reloads with the same shape and near-equal weights."""
        network = PolicyNetwork(_small("zson"))
        path = agent.save_checkpoint(tmp_path / "a.json", network, {"round": 3})
        loaded = agent.load_checkpoint(path)
        assert loaded.config == network.config
        for name, tensor in network.state_dict().items():
            torch.testing.assert_close(
                loaded.state_dict()[name], tensor, atol=1e-6, rtol=1e-6
            )
        second = agent.save_checkpoint(tmp_path / "b.json", loaded, {"round": 3})
        assert path.read_bytes() == second.read_bytes()

    def test_shape_mismatch_is_rejected(self, tmp_path: pathlib.Path) -> None:
        """Parameters must match the configured network."""
        path = agent.save_checkpoint(tmp_path / "a.json", PolicyNetwork(_small()))
        document = agent.read_checkpoint(path)
        document["parameters"]["actor.bias"] = {"shape": [2], "values": [0.0, 0.0]}
        with pytest.raises(AgentError, match="actor.bias"):
            agent.network_from_document(document, "edited")

    def test_sentinel_is_not_a_network(self, tmp_path: pathlib.Path) -> None:
        """Loading an oracle sentinel as a network fails clearly."""
        path = agent.write_sentinel_checkpoint(
            tmp_path / "o.json", agent.ORACLE_SENTINEL
        )
        with pytest.raises(AgentError, match="scripted"):
            agent.load_checkpoint(path)

    def test_unknown_sentinel_is_rejected(self, tmp_path: pathlib.Path) -> None:
        """Only the two scripted policies exist."""
        with pytest.raises(AgentError, match="unknown scripted policy"):
            agent.write_sentinel_checkpoint(tmp_path / "x.json", "teleport")

    def test_sentinels_load_as_scripted_policies(self, tmp_path: pathlib.Path) -> None:
        """Sentinel files produce the oracle and the random walk."""
        oracle = agent.write_sentinel_checkpoint(
            tmp_path / "o.json", agent.ORACLE_SENTINEL
        )
        walk = agent.write_sentinel_checkpoint(
            tmp_path / "r.json", agent.RANDOM_SENTINEL
        )
        assert isinstance(agent.load_policy(oracle), agent.OraclePolicy)
        assert isinstance(agent.policy_factory(walk)(), agent.RandomWalkPolicy)

    def test_network_factory_shares_weights(self, tmp_path: pathlib.Path) -> None:
        """Each episode gets a fresh policy over one loaded network."""
        path = agent.save_checkpoint(tmp_path / "a.json", PolicyNetwork(_small()))
        factory = agent.policy_factory(path, "sample")
        first, second = factory(), factory()
        assert first is not second
        assert isinstance(first, agent.NetworkPolicy)
        assert isinstance(second, agent.NetworkPolicy)
        assert first.network is second.network
        assert first.mode == "sample"


class TestScriptedPolicies:
    """The BFS oracle and the random walk."""

    @staticmethod
    def _context(
        scene: world.Scene, codebook: Codebook, headings: int = 12
    ) -> agent.EpisodeContext:
        goal = descriptor("room/bed", "bed")
        episode = manual_episode(goal, [candidate(0, 0.1)], (0,))
        return agent.EpisodeContext(
            scene=scene,
            episode=episode,
            goal=Goal(codebook.null),
            goal_cells=((5, 2),),
            headings=headings,
        )

    def test_oracle_turns_the_short_way(
        self, room_scene: world.Scene, codebook: Codebook
    ) -> None:
        """Facing north it turns right towards the east; facing south, left."""
        oracle = agent.OraclePolicy()
        oracle.reset(self._context(room_scene, codebook))
        rng = np.random.default_rng(0)
        blank = world.render(room_scene, world.AgentPose.at_cell((1, 2)), codebook)

        def act(cell: tuple[int, int], yaw: int) -> world.Action:
            return oracle.act(blank, world.AgentPose.at_cell(cell, yaw), rng)

        assert act((1, 2), 0) == world.Action.MOVE_FORWARD
        assert act((1, 2), 3) == world.Action.TURN_RIGHT
        assert act((1, 2), 9) == world.Action.TURN_LEFT
        assert act((5, 2), 4) == world.Action.STOP

    def test_oracle_reaches_the_goal(
        self, room_scene: world.Scene, codebook: Codebook
    ) -> None:
        """Driving the oracle ends with STOP on the goal cell."""
        oracle = agent.OraclePolicy()
        oracle.reset(self._context(room_scene, codebook))
        rng = np.random.default_rng(0)
        pose = world.AgentPose.at_cell((1, 3), 6)
        for _ in range(30):
            action = oracle.act(world.render(room_scene, pose, codebook), pose, rng)
            if action == world.Action.STOP:
                break
            pose = world.step(room_scene, pose, action)
        assert pose.cell == (5, 2)

    def test_oracle_needs_cardinal_headings(
        self, room_scene: world.Scene, codebook: Codebook
    ) -> None:
        """Ten headings do not include every cardinal direction."""
        with pytest.raises(AgentError, match="divisible by 4"):
            agent.OraclePolicy().reset(self._context(room_scene, codebook, headings=10))

    def test_random_walk_covers_every_action(
        self, room_scene: world.Scene, codebook: Codebook
    ) -> None:
        """Over many draws every action, STOP included, appears."""
        walk = agent.RandomWalkPolicy()
        walk.reset(self._context(room_scene, codebook))
        pose = world.AgentPose.at_cell((2, 2))
        blank = world.render(room_scene, pose, codebook)
        rng = np.random.default_rng(0)
        assert {walk.act(blank, pose, rng) for _ in range(200)} == set(range(6))

    def test_network_policy_requires_reset(self, codebook: Codebook) -> None:
        """Acting before an episode starts is an error."""
        policy = agent.NetworkPolicy(PolicyNetwork(AgentConfig()))
        observation = world.Observation(np.zeros(16), codebook.null)
        with pytest.raises(AgentError, match="before reset"):
            policy.act(
                observation, world.AgentPose.at_cell((1, 1)), np.random.default_rng(0)
            )
