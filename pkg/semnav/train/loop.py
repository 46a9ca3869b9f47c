"""The training driver: strict collect, advantage, update alternation."""

from __future__ import annotations

import dataclasses
import logging
import typing as typ

import numpy as np

from .. import agent, codec, seeding
from ..errors import OperationalError
from ..semspace import codebook_digest
from .buffer import compute_gae
from .env import TrainingError
from .ppo import make_optimizer, ppo_update
from .rollout import build_workers, collect_rollouts

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from .. import world
    from ..config import RunConfig
    from ..episodes import Episode
    from ..semspace import Codebook
    from .buffer import RolloutBuffer
    from .ppo import UpdateStats
    from .rollout import EpisodeSummary

_logger = logging.getLogger(__name__)

PROGRESS_HEADER: typ.Final = (
    "round",
    "env_steps",
    "episodes",
    "success_rate",
    "mean_return",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
)
PROGRESS_FILENAME: typ.Final = "progress.csv"
TRAJECTORY_FILENAME: typ.Final = "trajectories.jsonl"
FINAL_CHECKPOINT: typ.Final = "final.json"
DIAGNOSTIC_FILENAME: typ.Final = "nan-diagnostic.json"


@dataclasses.dataclass(frozen=True, slots=True)
class RoundStats:
    """One row of the progress log."""

    round: int
    env_steps: int
    episodes: int
    success_rate: float
    mean_return: float
    update: UpdateStats

    def row(self) -> tuple[object, ...]:
        """Return the CSV row for this round."""
        return (
            self.round,
            self.env_steps,
            self.episodes,
            codec.format_float(self.success_rate),
            codec.format_float(self.mean_return),
            codec.format_float(self.update.policy_loss),
            codec.format_float(self.update.value_loss),
            codec.format_float(self.update.entropy),
            codec.format_float(self.update.clip_fraction),
        )


@dataclasses.dataclass(frozen=True, slots=True)
class TrainResult:
    """What a finished training run produced."""

    checkpoint: pathlib.Path
    progress: pathlib.Path
    history: tuple[RoundStats, ...]
    network: agent.PolicyNetwork

    @property
    def env_steps(self) -> int:
        """Return the number of environment transitions collected."""
        return self.history[-1].env_steps if self.history else 0

    def summary_line(self) -> str:
        """Return the final summary the CLI prints."""
        last = self.history[-1] if self.history else None
        rate = last.success_rate if last else 0.0
        return (
            f"variant={self.network.config.variant} rounds={len(self.history)} "
            f"env_steps={self.env_steps} SR={rate:.4f} checkpoint={self.checkpoint}"
        )


def _round_stats(
    index: int,
    env_steps: int,
    finished: cabc.Sequence[EpisodeSummary],
    update: UpdateStats,
) -> RoundStats:
    successes = sum(summary.success for summary in finished)
    returns = [summary.episode_return for summary in finished]
    return RoundStats(
        round=index,
        env_steps=env_steps,
        episodes=len(finished),
        success_rate=successes / len(finished) if finished else 0.0,
        mean_return=float(np.mean(returns)) if returns else 0.0,
        update=update,
    )


def _finite_report(values: np.ndarray) -> dict[str, object]:
    finite = values[np.isfinite(values)]
    return {
        "non_finite": int(values.size - finite.size),
        "min": float(finite.min()) if finite.size else None,
        "max": float(finite.max()) if finite.size else None,
    }


def write_diagnostic(
    path: pathlib.Path,
    round_index: int,
    error: Exception,
    network: agent.PolicyNetwork,
    buffer: RolloutBuffer | None,
) -> pathlib.Path:
    """Dump what is known about a diverged update."""
    parameters = {
        name: _finite_report(tensor.detach().cpu().numpy())
        for name, tensor in network.state_dict().items()
    }
    document: dict[str, object] = {
        "round": round_index,
        "error": str(error),
        "parameters": parameters,
    }
    if buffer is not None:
        document["buffer"] = {
            "rewards": _finite_report(buffer.rewards),
            "values": _finite_report(buffer.values),
            "log_probs": _finite_report(buffer.log_probs),
        }
    return codec.write_json(path, document)


def train(
    run_config: RunConfig,
    episodes: cabc.Sequence[Episode],
    scenes: typ.Mapping[str, world.Scene],
    codebook: Codebook,
    out_dir: pathlib.Path,
    *,
    threads: int = 1,
    log_trajectories: bool = False,
) -> TrainResult:
    """Train the configured agent variant on *episodes*.

    Each round collects ``horizon × n_envs`` transitions, computes
    advantages and runs one PPO update; collection never overlaps an update.
    Checkpoints land in *out_dir* every ``checkpoint_every`` rounds and at
    the end as ``final.json``.
    """
    if not episodes:
        message = "training needs at least one episode"
        raise TrainingError(message)
    cfg = run_config.ppo
    seed = run_config.seed
    network = agent.PolicyNetwork(run_config.agent)
    optimizer = make_optimizer(network, cfg)
    workers = build_workers(
        cfg.n_envs,
        scenes,
        codebook,
        run_config.reward,
        episodes,
        seed,
        run_config.agent,
        headings=run_config.headings,
        fov=run_config.world.fov(),
        max_steps=cfg.max_episode_steps,
        replace=cfg.sample_with_replacement,
    )
    update_rng = seeding.generator(seed, "ppo-minibatch")
    frozen_digest = codebook_digest(codebook)
    progress_path = out_dir / PROGRESS_FILENAME
    trajectory_path = out_dir / TRAJECTORY_FILENAME
    if log_trajectories:
        codec.write_jsonl(trajectory_path, ())
    history: list[RoundStats] = []
    _logger.info(
        "training %s for %d rounds", agent.describe_network(network), cfg.rounds
    )
    for index in range(1, cfg.rounds + 1):
        buffer: RolloutBuffer | None = None
        try:
            buffer, finished = collect_rollouts(
                workers,
                network,
                cfg.horizon,
                threads=threads,
                log_trajectories=log_trajectories,
            )
            compute_gae(buffer, cfg.gamma, cfg.gae_lambda)
            stats = ppo_update(buffer, network, optimizer, cfg, update_rng)
            network.check_finite()
        except (OperationalError, agent.AgentError) as error:
            diagnostic = write_diagnostic(
                out_dir / DIAGNOSTIC_FILENAME, index, error, network, buffer
            )
            _logger.exception(
                "training diverged in round %d; wrote %s", index, diagnostic
            )
            raise
        if codebook_digest(codebook) != frozen_digest:
            message = "the frozen semantic codebook changed during training"
            raise TrainingError(message)
        if log_trajectories:
            codec.append_jsonl(
                trajectory_path,
                (
                    {"round": index, **record}
                    for worker in workers
                    for record in worker.trajectory
                ),
            )
        history.append(_round_stats(index, index * len(buffer), finished, stats))
        codec.write_csv(progress_path, PROGRESS_HEADER, (row.row() for row in history))
        _logger.info(
            "round %d/%d SR=%.3f value_loss=%.4f",
            index,
            cfg.rounds,
            history[-1].success_rate,
            stats.value_loss,
        )
        if cfg.checkpoint_every and index % cfg.checkpoint_every == 0:
            agent.save_checkpoint(
                out_dir / f"round-{index:05d}.json",
                network,
                _metadata(run_config, index),
            )
    final = agent.save_checkpoint(
        out_dir / FINAL_CHECKPOINT, network, _metadata(run_config, cfg.rounds)
    )
    if not history:
        codec.write_csv(progress_path, PROGRESS_HEADER, ())
    return TrainResult(final, progress_path, tuple(history), network)


def _metadata(run_config: RunConfig, round_index: int) -> dict[str, object]:
    return {
        "round": round_index,
        "seed": run_config.seed,
        "env_steps": round_index * run_config.ppo.horizon * run_config.ppo.n_envs,
        "headings": run_config.headings,
    }
