"""Recurrent actor-critic navigation agent and its pilot-study variants.

Every variant feeds ``z_SP ⊕ z_O ⊕ a_{t−1}`` to a GRU cell whose state drives
an actor head (six action logits) and a critic head (one value). They differ
in how the two encodings are formed:

``psl``
    ``z_O`` is a trainable encoder over layout and a detached copy of the
    semantic observation; ``z_SP`` is the semantic perception module (an MLP
    bottleneck) over the goal and the frozen semantic observation.
``zson``
    ``z_O`` as in ``psl``; the goal embedding is passed straight through.
``lo``
    Layout only: the encoder sees ray depths and the goal is the goal view's
    layout profile (zeros for goals without one).
``so``
    Semantics only: ``z_O`` is the frozen semantic observation and there is
    no trainable observation encoder.

The frozen semantic encoders are the :class:`~semnav.semspace.Codebook`;
they hold no trainable parameters, so "frozen path untouched" is checked with
:func:`~semnav.semspace.codebook_digest`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import typing as typ

import numpy as np
import torch
from torch import nn

from . import codec, seeding, world
from .errors import SemnavError

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from .episodes import Episode

_logger = logging.getLogger(__name__)

VARIANTS: typ.Final = ("psl", "zson", "lo", "so")
CHECKPOINT_FORMAT: typ.Final = "semnav-checkpoint/1"
ORACLE_SENTINEL: typ.Final = "bfs-oracle"
RANDOM_SENTINEL: typ.Final = "random-walk"
INIT_SCALE: typ.Final = 0.05
HEAD_INIT_SCALE: typ.Final = 0.01

type Variant = typ.Literal["psl", "zson", "lo", "so"]
type ActMode = typ.Literal["sample", "greedy"]


class AgentError(SemnavError):
    """Raised for invalid agent configurations, inputs, or checkpoints."""


@dataclasses.dataclass(frozen=True, slots=True)
class AgentConfig:
    """Network shape and variant."""

    variant: Variant = "psl"
    embed_dim: int = 64
    spm_dim: int = 64
    obs_encoder_dims: tuple[int, ...] = (128, 64)
    hidden_dim: int = 128
    n_actions: int = world.N_ACTIONS
    n_rays: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        """Check the dimension contract."""
        if self.variant not in VARIANTS:
            expected = ", ".join(VARIANTS)
            message = f"unknown variant {self.variant!r}; expected one of {expected}"
            raise AgentError(message)
        if self.spm_dim >= 2 * self.embed_dim:
            message = (
                f"spm_dim must be below 2 * embed_dim ({2 * self.embed_dim}), "
                f"got {self.spm_dim}"
            )
            raise AgentError(message)
        if self.n_actions != world.N_ACTIONS:
            message = f"n_actions must be {world.N_ACTIONS}, got {self.n_actions}"
            raise AgentError(message)
        if not self.obs_encoder_dims or min(self.obs_encoder_dims) < 1:
            message = "obs_encoder_dims must list positive layer widths"
            raise AgentError(message)
        if min(self.embed_dim, self.spm_dim, self.hidden_dim, self.n_rays) < 1:
            message = "network widths must be positive"
            raise AgentError(message)

    def as_dict(self) -> dict[str, object]:
        """Return the JSON/YAML mapping of this configuration."""
        return {
            "variant": self.variant,
            "embed_dim": self.embed_dim,
            "spm_dim": self.spm_dim,
            "obs_encoder_dims": list(self.obs_encoder_dims),
            "hidden_dim": self.hidden_dim,
            "n_actions": self.n_actions,
            "n_rays": self.n_rays,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: typ.Mapping[str, typ.Any]) -> AgentConfig:
        """Build a configuration from a decoded mapping."""
        return cls(
            variant=typ.cast("Variant", str(data["variant"]).lower()),
            embed_dim=int(data["embed_dim"]),
            spm_dim=int(data["spm_dim"]),
            obs_encoder_dims=tuple(int(width) for width in data["obs_encoder_dims"]),
            hidden_dim=int(data["hidden_dim"]),
            n_actions=int(data["n_actions"]),
            n_rays=int(data["n_rays"]),
            seed=int(data.get("seed", 0)),
        )


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class Goal:
    """A goal as the agent receives it.

    ``layout`` is the goal view's depth profile; only layout-only agents
    read it, and goals without a view (text goals) leave it ``None``.
    """

    embedding: np.ndarray
    layout: np.ndarray | None = None


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class PolicyState:
    """Recurrent state ``h`` and the one-hot previous action."""

    hidden: np.ndarray
    prev_action: np.ndarray

    def with_action(self, action: int) -> PolicyState:
        """Return this state with *action* recorded as the previous action."""
        one_hot = np.zeros_like(self.prev_action)
        one_hot[action] = 1.0
        return PolicyState(self.hidden, one_hot)


def initial_state(config: AgentConfig) -> PolicyState:
    """Return the zero state used at the start of every episode."""
    return PolicyState(np.zeros(config.hidden_dim), np.zeros(config.n_actions))


def _mlp(widths: cabc.Sequence[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for fan_in, fan_out in zip(widths, widths[1:], strict=False):
        layers.extend((nn.Linear(fan_in, fan_out), nn.Tanh()))
    return nn.Sequential(*layers)


class PolicyNetwork(nn.Module):
    """All trainable parameters of one agent, in float64."""

    def __init__(self, config: AgentConfig) -> None:
        """Build the layers for ``config.variant`` and initialize them."""
        super().__init__()
        self.config = config
        variant = config.variant
        self.encoder: nn.Module = nn.Identity()
        self.spm: nn.Module = nn.Identity()
        if variant == "so":
            obs_dim = config.embed_dim
        else:
            encoder_in = config.n_rays + (config.embed_dim if variant != "lo" else 0)
            self.encoder = _mlp([encoder_in, *config.obs_encoder_dims])
            obs_dim = config.obs_encoder_dims[-1]
        if variant == "psl":
            self.spm = nn.Sequential(
                nn.Linear(2 * config.embed_dim, config.spm_dim),
                nn.Tanh(),
                nn.Linear(config.spm_dim, config.spm_dim),
            )
            goal_dim = config.spm_dim
        elif variant == "lo":
            goal_dim = config.n_rays
        else:
            goal_dim = config.embed_dim
        self.gru = nn.GRUCell(goal_dim + obs_dim + config.n_actions, config.hidden_dim)
        self.actor = nn.Linear(config.hidden_dim, config.n_actions)
        self.critic = nn.Linear(config.hidden_dim, 1)
        self.double()
        self._initialize()

    def _initialize(self) -> None:
        # Forked RNG keeps the caller's global torch stream untouched.
        with torch.random.fork_rng(devices=[]), torch.no_grad():
            seed = seeding.derive_seed(self.config.seed, "agent-init")
            torch.manual_seed(seed % 2**63)
            for name, parameter in self.named_parameters():
                if name.endswith("bias"):
                    nn.init.zeros_(parameter)
                elif name == "gru.weight_hh":
                    for gate in parameter.chunk(3, dim=0):
                        nn.init.orthogonal_(gate)
                elif name.startswith(("actor", "critic")):
                    nn.init.uniform_(parameter, -HEAD_INIT_SCALE, HEAD_INIT_SCALE)
                else:
                    nn.init.uniform_(parameter, -INIT_SCALE, INIT_SCALE)

    @property
    def goal_dim(self) -> int:
        """Return the width of the goal input vector."""
        config = self.config
        return config.n_rays if config.variant == "lo" else config.embed_dim

    def encode(
        self, layout: torch.Tensor, semantic: torch.Tensor, goal: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Return ``(z_O, z_SP)`` for batched inputs."""
        semantic = semantic.detach()
        match self.config.variant:
            case "psl" | "zson":
                z_obs = self.encoder(torch.cat((layout, semantic), dim=-1))
            case "lo":
                z_obs = self.encoder(layout)
            case _:
                z_obs = self.encoder(semantic)
        if self.config.variant == "psl":
            return z_obs, self.spm(torch.cat((goal, semantic), dim=-1))
        return z_obs, goal

    def core(
        self,
        z_goal: torch.Tensor,
        z_obs: torch.Tensor,
        prev_action: torch.Tensor,
        hidden: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Advance the recurrent state; return ``(logits, value, hidden')``."""
        hidden = self.gru(torch.cat((z_goal, z_obs, prev_action), dim=-1), hidden)
        return self.actor(hidden), self.critic(hidden).squeeze(-1), hidden

    def forward(
        self,
        layout: torch.Tensor,
        semantic: torch.Tensor,
        goal: torch.Tensor,
        prev_action: torch.Tensor,
        hidden: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Run one batched step from raw inputs."""
        z_obs, z_goal = self.encode(layout, semantic, goal)
        return self.core(z_goal, z_obs, prev_action, hidden)

    def evaluate_sequence(
        self,
        layout: torch.Tensor,
        semantic: torch.Tensor,
        goal: torch.Tensor,
        prev_action: torch.Tensor,
        starts: torch.Tensor,
        hidden: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Replay ``(T, B, ·)`` sequences from the hidden snapshot *hidden*.

        ``starts[t, b]`` marks the first step of an episode; the recurrent
        state is zeroed there. Returns logits ``(T, B, A)`` and values
        ``(T, B)``.
        """
        z_obs, z_goal = self.encode(layout, semantic, goal)
        logits, values = [], []
        for t in range(layout.shape[0]):
            hidden = hidden * (1.0 - starts[t].to(hidden.dtype)).unsqueeze(-1)
            step_logits, step_value, hidden = self.core(
                z_goal[t], z_obs[t], prev_action[t], hidden
            )
            logits.append(step_logits)
            values.append(step_value)
        return torch.stack(logits), torch.stack(values)

    def check_finite(self) -> None:
        """Raise :class:`AgentError` if any parameter is NaN or infinite."""
        for name, parameter in self.named_parameters():
            if not torch.isfinite(parameter).all():
                message = f"parameter {name!r} holds non-finite values"
                raise AgentError(message)


def goal_input(config: AgentConfig, goal: Goal) -> np.ndarray:
    """Return the goal vector *config*'s variant consumes."""
    if config.variant == "lo":
        if goal.layout is None:
            return np.zeros(config.n_rays)
        vector = np.asarray(goal.layout, dtype=np.float64)
        expected = config.n_rays
    else:
        vector = np.asarray(goal.embedding, dtype=np.float64)
        expected = config.embed_dim
    if vector.shape != (expected,):
        message = f"goal input has shape {vector.shape}, expected ({expected},)"
        raise AgentError(message)
    return vector


def _tensor(values: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.asarray(values, dtype=np.float64)).unsqueeze(0)


def encode_inputs(
    observation: world.Observation, goal: Goal, network: PolicyNetwork
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(z_O, z_SP)`` for one observation and goal."""
    config = network.config
    if observation.layout.shape != (config.n_rays,):
        message = (
            f"layout has shape {observation.layout.shape}, "
            f"expected ({config.n_rays},)"
        )
        raise AgentError(message)
    if observation.semantic.shape != (config.embed_dim,):
        message = (
            f"semantic embedding has shape {observation.semantic.shape}, "
            f"expected ({config.embed_dim},)"
        )
        raise AgentError(message)
    with torch.no_grad():
        z_obs, z_goal = network.encode(
            _tensor(observation.layout),
            _tensor(observation.semantic),
            _tensor(goal_input(config, goal)),
        )
    return z_obs.squeeze(0).numpy(), z_goal.squeeze(0).numpy()


def policy_step(
    z_sp: np.ndarray,
    z_o: np.ndarray,
    state: PolicyState,
    network: PolicyNetwork,
) -> tuple[np.ndarray, float, PolicyState]:
    """Return ``(logits, value, state')``; ``state'`` keeps the previous action."""
    network.check_finite()
    inputs = (z_sp, z_o, state.hidden, state.prev_action)
    if not all(np.isfinite(item).all() for item in inputs):
        message = "policy inputs must be finite"
        raise AgentError(message)
    with torch.no_grad():
        logits, value, hidden = network.core(
            _tensor(z_sp),
            _tensor(z_o),
            _tensor(state.prev_action),
            _tensor(state.hidden),
        )
    next_state = PolicyState(hidden.squeeze(0).numpy().copy(), state.prev_action)
    return logits.squeeze(0).numpy().copy(), float(value.item()), next_state


def action_probabilities(logits: np.ndarray) -> np.ndarray:
    """Return ``softmax(logits)``."""
    shifted = np.exp(logits - np.max(logits))
    return shifted / shifted.sum()


def act(logits: np.ndarray, mode: ActMode, rng: np.random.Generator) -> int:
    """Pick an action: greedy argmax (lowest index on ties) or a softmax sample."""
    values = np.asarray(logits, dtype=np.float64)
    if mode == "greedy":
        return int(np.argmax(values))
    return int(rng.choice(values.size, p=action_probabilities(values)))


def parameter_digest(network: PolicyNetwork) -> str:
    """Return a SHA-256 digest over every parameter, in name order."""
    digest = hashlib.sha256()
    for name, tensor in sorted(network.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def gradient_check(
    network: PolicyNetwork,
    batch: cabc.Mapping[str, torch.Tensor],
    *,
    action: int = 0,
    value_target: float = 1.0,
    samples: int = 100,
    epsilon: float = 1e-5,
    floor: float = 1e-4,
    seed: int = 0,
) -> dict[str, float]:
    """Compare autograd gradients with central finite differences.

    The scalar loss is ``−log π(action) + (V − value_target)²`` summed over a
    replayed sequence described by *batch* (the keyword arguments of
    :meth:`PolicyNetwork.evaluate_sequence`). Returns the worst relative
    error per parameter over a random subsample of *samples* entries.
    Errors are relative to the larger gradient magnitude, but never to less
    than *floor*, so vanishing gradients are judged on absolute error.
    """

    def loss() -> torch.Tensor:
        logits, values = network.evaluate_sequence(**batch)
        log_probs = torch.log_softmax(logits, dim=-1)[..., action]
        return (-log_probs + (values - value_target) ** 2).sum()

    network.zero_grad()
    loss().backward()
    named = list(network.named_parameters())
    sizes = np.array([parameter.numel() for _, parameter in named])
    rng = seeding.generator(seed, "gradient-check")
    total = int(sizes.sum())
    flat = rng.choice(total, size=min(samples, total), replace=False)
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    worst: dict[str, float] = {}
    with torch.no_grad():
        for position in np.sort(flat):
            slot = int(np.searchsorted(offsets, position, side="right") - 1)
            name, parameter = named[slot]
            index = int(position - offsets[slot])
            view = parameter.view(-1)
            grad = parameter.grad
            analytic = 0.0 if grad is None else float(grad.view(-1)[index])
            original = float(view[index])
            view[index] = original + epsilon
            upper = float(loss())
            view[index] = original - epsilon
            lower = float(loss())
            view[index] = original
            numeric = (upper - lower) / (2.0 * epsilon)
            scale = max(abs(analytic), abs(numeric), floor)
            worst[name] = max(worst.get(name, 0.0), abs(analytic - numeric) / scale)
    network.zero_grad()
    return worst


def save_checkpoint(
    path: pathlib.Path,
    network: PolicyNetwork,
    metadata: typ.Mapping[str, object] | None = None,
) -> pathlib.Path:
    """Write the network as a JSON checkpoint."""
    document = {
        "format": CHECKPOINT_FORMAT,
        "policy": "network",
        "config": network.config.as_dict(),
        "parameters": {
            name: codec.array_to_payload(tensor.detach().cpu().numpy())
            for name, tensor in network.state_dict().items()
        },
        "metadata": dict(metadata or {}),
    }
    return codec.write_json(path, document)


def network_from_document(
    document: typ.Mapping[str, typ.Any], source: str
) -> PolicyNetwork:
    """Rebuild a network from a checkpoint document, validating every shape."""
    try:
        config = AgentConfig.from_dict(document["config"])
        stored = document["parameters"]
    except (KeyError, TypeError, ValueError) as error:
        message = f"{source}: malformed checkpoint ({error})"
        raise AgentError(message) from error
    network = PolicyNetwork(config)
    expected = network.state_dict()
    if sorted(stored) != sorted(expected):
        message = f"{source}: parameter names do not match the {config.variant} network"
        raise AgentError(message)
    state = {}
    for name, reference in expected.items():
        values = codec.payload_to_array(stored[name])
        if tuple(values.shape) != tuple(reference.shape):
            message = (
                f"{source}: parameter {name!r} has shape {tuple(values.shape)}, "
                f"expected {tuple(reference.shape)}"
            )
            raise AgentError(message)
        state[name] = torch.as_tensor(values, dtype=torch.float64)
    network.load_state_dict(state)
    network.check_finite()
    return network


def read_checkpoint(path: pathlib.Path) -> dict[str, typ.Any]:
    """Read a checkpoint document; sentinel documents have only ``policy``."""
    document = codec.read_json(path)
    if not isinstance(document, dict) or "policy" not in document:
        message = f"{path} is not a semnav checkpoint"
        raise AgentError(message)
    return document


def load_checkpoint(path: pathlib.Path) -> PolicyNetwork:
    """Load a network checkpoint written by :func:`save_checkpoint`."""
    document = read_checkpoint(path)
    if document["policy"] != "network":
        kind = document["policy"]
        message = f"{path} holds the scripted {kind!r} policy, not a network"
        raise AgentError(message)
    return network_from_document(document, str(path))


def write_sentinel_checkpoint(path: pathlib.Path, policy: str) -> pathlib.Path:
    """Write a checkpoint that names a scripted policy."""
    if policy not in (ORACLE_SENTINEL, RANDOM_SENTINEL):
        message = f"unknown scripted policy {policy!r}"
        raise AgentError(message)
    return codec.write_json(path, {"policy": policy})


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class EpisodeContext:
    """What a policy may learn about an episode at reset.

    Only scripted policies read the scene and goal cells; learned policies
    see observations and the goal alone.
    """

    scene: world.Scene
    episode: Episode
    goal: Goal
    goal_cells: tuple[world.Cell, ...]
    headings: int = world.DEFAULT_HEADINGS


class Policy(typ.Protocol):
    """Anything that can drive the agent through an episode."""

    def reset(self, context: EpisodeContext) -> None:
        """Prepare for a new episode."""
        ...

    def act(
        self,
        observation: world.Observation,
        pose: world.AgentPose,
        rng: np.random.Generator,
    ) -> int:
        """Return the next action index."""
        ...


class NetworkPolicy:
    """Drive the agent with a :class:`PolicyNetwork`."""

    def __init__(self, network: PolicyNetwork, mode: ActMode = "greedy") -> None:
        """Wrap *network*; *mode* selects greedy or sampled actions."""
        self.network = network
        self.mode: ActMode = mode
        self._state = initial_state(network.config)
        self._goal: Goal | None = None

    def reset(self, context: EpisodeContext) -> None:
        """Clear the recurrent state and remember the goal."""
        self._state = initial_state(self.network.config)
        self._goal = context.goal

    def act(
        self,
        observation: world.Observation,
        pose: world.AgentPose,
        rng: np.random.Generator,
    ) -> int:
        """Encode, step the recurrent core, and pick an action."""
        if self._goal is None:
            message = "NetworkPolicy.act called before reset"
            raise AgentError(message)
        z_obs, z_goal = encode_inputs(observation, self._goal, self.network)
        logits, _, state = policy_step(z_goal, z_obs, self._state, self.network)
        action = act(logits, self.mode, rng)
        self._state = state.with_action(action)
        return action


_CARDINAL_OFFSETS: typ.Final = {(1, 0): 0, (0, -1): 1, (-1, 0): 2, (0, 1): 3}


class OraclePolicy:
    """Follow a BFS shortest path to the nearest goal cell, then ``STOP``.

    Needs ``headings % 4 == 0`` so every cardinal direction is a heading.
    """

    def __init__(self) -> None:
        """Start without a goal."""
        self._context: EpisodeContext | None = None

    def reset(self, context: EpisodeContext) -> None:
        """Remember the scene and goal cells."""
        if context.headings % 4:
            message = (
                f"the BFS oracle needs headings divisible by 4, got {context.headings}"
            )
            raise AgentError(message)
        self._context = context

    def act(
        self,
        observation: world.Observation,
        pose: world.AgentPose,
        rng: np.random.Generator,
    ) -> int:
        """Turn towards the next path cell, move, or stop on arrival."""
        context = self._context
        if context is None:
            message = "OraclePolicy.act called before reset"
            raise AgentError(message)
        path = world.shortest_path(context.scene, pose.cell, context.goal_cells)
        if len(path) <= 1:
            return int(world.Action.STOP)
        (x, y), (nx, ny) = path[0], path[1]
        quarter = _CARDINAL_OFFSETS[(nx - x, ny - y)]
        target = quarter * context.headings // 4
        turn = (target - pose.yaw) % context.headings
        if turn == 0:
            return int(world.Action.MOVE_FORWARD)
        if turn <= context.headings // 2:
            return int(world.Action.TURN_LEFT)
        return int(world.Action.TURN_RIGHT)


class RandomWalkPolicy:
    """Uniformly random actions, ``STOP`` included."""

    def reset(self, context: EpisodeContext) -> None:
        """Random walks keep no state."""

    def act(
        self,
        observation: world.Observation,
        pose: world.AgentPose,
        rng: np.random.Generator,
    ) -> int:
        """Draw one of the six actions uniformly."""
        return int(rng.integers(world.N_ACTIONS))


def load_policy(path: pathlib.Path, mode: ActMode = "greedy") -> Policy:
    """Load a checkpoint as a policy; sentinel files yield scripted policies."""
    document = read_checkpoint(path)
    match document["policy"]:
        case "network":
            return NetworkPolicy(network_from_document(document, str(path)), mode)
        case "bfs-oracle":
            return OraclePolicy()
        case "random-walk":
            return RandomWalkPolicy()
        case other:
            message = f"{path}: unknown policy kind {other!r}"
            raise AgentError(message)


def policy_factory(
    path: pathlib.Path, mode: ActMode = "greedy"
) -> cabc.Callable[[], Policy]:
    """Load *path* once; return a callable that builds a fresh policy per episode."""
    policy = load_policy(path, mode)
    if isinstance(policy, NetworkPolicy):
        network = policy.network
        return lambda: NetworkPolicy(network, mode)
    return type(policy)


def describe_network(network: PolicyNetwork) -> str:
    """Return a one-line parameter count summary."""
    total = sum(parameter.numel() for parameter in network.parameters())
    return f"{network.config.variant} agent with {total} parameters"
