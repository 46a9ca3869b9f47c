"""Frozen-policy evaluation with success rate and SPL."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import typing as typ

from .. import codec, seeding, world
from ..reward import RewardConfig
from ..train.env import NavigationEnv
from .goals import goal_target, make_goal
from .support import InferenceError

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from ..agent import ActMode, Policy
    from ..episodes import Episode
    from ..semspace import Codebook
    from .goals import GoalMode
    from .support import Retrieval, SupportSet

_logger = logging.getLogger(__name__)

REPORT_HEADER: typ.Final = ("episode_id", "mode", "success", "l", "l_star", "steps")

type SupportSource = typ.Literal["train", "eval"]


@dataclasses.dataclass(frozen=True, slots=True)
class EvalConfig:
    """Evaluation protocol settings.

    ``support_source`` chooses the corpus the support set is built from:
    the training episodes' goal views or the evaluation episodes' own.
    """

    goal_mode: GoalMode = "image"
    retrieval: Retrieval = "weighted"
    support_lambda: float = 0.8
    support_source: SupportSource = "train"
    act_mode: ActMode = "greedy"
    max_steps: int = 200
    episodes: int = 100


@dataclasses.dataclass(frozen=True, slots=True)
class EpisodeResult:
    """One evaluated episode."""

    episode_id: str
    goal_mode: str
    success: bool
    path_length: float
    optimal_length: float
    steps: int

    @property
    def spl(self) -> float:
        """Return ``SR_i · l*_i / max(l_i, l*_i)``."""
        if not self.success:
            return 0.0
        longest = max(self.path_length, self.optimal_length)
        return 1.0 if longest == 0.0 else self.optimal_length / longest


@dataclasses.dataclass(frozen=True, slots=True)
class EvalReport:
    """Per-episode results and their aggregates."""

    goal_mode: str
    records: tuple[EpisodeResult, ...]

    @property
    def success_rate(self) -> float:
        """Return the fraction of successful episodes."""
        if not self.records:
            return 0.0
        return sum(record.success for record in self.records) / len(self.records)

    @property
    def spl(self) -> float:
        """Return the mean SPL summand."""
        if not self.records:
            return 0.0
        return sum(record.spl for record in self.records) / len(self.records)

    def summary_line(self) -> str:
        """Return the one-line summary the CLI prints."""
        return (
            f"mode={self.goal_mode} episodes={len(self.records)} "
            f"SR={self.success_rate:.4f} SPL={self.spl:.4f}"
        )


type PolicyFactory = cabc.Callable[[], Policy]


def run_episode(
    policy: Policy,
    episode: Episode,
    env: NavigationEnv,
    codebook: Codebook,
    mode: GoalMode,
    *,
    seed: int,
    support: SupportSet | None = None,
    retrieval: Retrieval = "weighted",
) -> EpisodeResult:
    """Roll *policy* out on *episode* until ``STOP`` or the step limit."""
    scene = env.scene_for(episode)
    goal = make_goal(episode, mode, codebook, support, retrieval=retrieval)
    cells, goal_pose = goal_target(episode, mode, scene)
    observation = env.reset(episode, goal, goal_pose, cells)
    optimal = episode.optimal_length
    if mode == "category":
        field = world.distance_field(scene, cells)
        optimal = world.field_distance(field, episode.start.cell)
    policy.reset(env.context)
    rng = seeding.generator(seed, "eval", episode.episode_id)
    success = False
    while True:
        result = env.step(policy.act(observation, env.pose, rng))
        observation = result.observation
        if result.done:
            success = result.success
            break
    return EpisodeResult(
        episode_id=episode.episode_id,
        goal_mode=mode,
        success=success,
        path_length=env.path_length,
        optimal_length=optimal,
        steps=env.steps,
    )


def evaluate(
    policy_factory: PolicyFactory,
    episodes: cabc.Sequence[Episode],
    mode: GoalMode,
    cfg: EvalConfig,
    *,
    scenes: typ.Mapping[str, world.Scene],
    codebook: Codebook,
    support: SupportSet | None = None,
    reward_config: RewardConfig | None = None,
    headings: int = world.DEFAULT_HEADINGS,
    fov: world.FovConfig | None = None,
    seed: int = 0,
    threads: int = 1,
) -> EvalReport:
    """Evaluate a frozen policy on *episodes* under goal *mode*.

    Each episode gets a fresh policy from *policy_factory* and its own
    random stream, so reports are identical at any thread count.
    """
    if mode == "text_expanded" and support is None:
        message = "goal mode text_expanded requires a support set (--support-set)"
        raise InferenceError(message)
    rewards = reward_config or RewardConfig()

    def run(episode: Episode) -> EpisodeResult:
        env = NavigationEnv(
            scenes,
            codebook,
            rewards,
            headings=headings,
            fov=fov,
            max_steps=cfg.max_steps,
        )
        return run_episode(
            policy_factory(),
            episode,
            env,
            codebook,
            mode,
            seed=seed,
            support=support,
            retrieval=cfg.retrieval,
        )

    if threads <= 1:
        records = [run(episode) for episode in episodes]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, episodes))
    report = EvalReport(mode, tuple(records))
    _logger.info("evaluation finished: %s", report.summary_line())
    return report


def write_report_csv(path: pathlib.Path, report: EvalReport) -> pathlib.Path:
    """Write one CSV row per evaluated episode."""
    rows = (
        (
            record.episode_id,
            record.goal_mode,
            int(record.success),
            codec.format_float(record.path_length),
            codec.format_float(record.optimal_length),
            record.steps,
        )
        for record in report.records
    )
    return codec.write_csv(path, REPORT_HEADER, rows)


def support_corpus(
    train: cabc.Sequence[Episode],
    evaluation: cabc.Sequence[Episode],
    source: SupportSource,
) -> cabc.Sequence[Episode]:
    """Return the episodes whose goal views seed the support set."""
    match source:
        case "train":
            corpus = train
        case "eval":
            corpus = evaluation
        case _:
            message = f"unknown support source {source!r}; expected train or eval"
            raise InferenceError(message)
    if not corpus:
        message = f"the {source} corpus is empty; cannot build a support set"
        raise InferenceError(message)
    return corpus
