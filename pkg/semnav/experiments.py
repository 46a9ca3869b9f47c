"""The pilot experiment: every agent variant under every goal mode.

Each variant is trained per seed on the same scenes and episodes, then
evaluated with image, text and expanded-text goals. A random walk over the
same evaluation episodes is the chance baseline.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import typing as typ

import numpy as np

from . import agent, codec
from .infer.evaluate import evaluate, support_corpus, write_report_csv
from .infer.support import build_support_set, save_support_set
from .train.loop import train

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from . import world
    from .config import RunConfig
    from .episodes import Episode
    from .infer.evaluate import EvalReport, PolicyFactory
    from .infer.goals import GoalMode
    from .semspace import Codebook

_logger = logging.getLogger(__name__)

PILOT_MODES: typ.Final[tuple[GoalMode, ...]] = ("image", "text", "text_expanded")
PILOT_SEEDS: typ.Final = (0, 1, 2)
PILOT_HEADER: typ.Final = (
    "policy",
    "seed",
    "goal_mode",
    "episodes",
    "success_rate",
    "spl",
)
SUMMARY_FILENAME: typ.Final = "pilot.csv"
BASELINE: typ.Final = agent.RANDOM_SENTINEL


@dataclasses.dataclass(frozen=True, slots=True)
class PilotRow:
    """One (policy, seed, goal mode) evaluation."""

    policy: str
    seed: int
    goal_mode: str
    episodes: int
    success_rate: float
    spl: float

    @classmethod
    def from_report(cls, policy: str, seed: int, report: EvalReport) -> PilotRow:
        """Summarize *report*."""
        return cls(
            policy=policy,
            seed=seed,
            goal_mode=report.goal_mode,
            episodes=len(report.records),
            success_rate=report.success_rate,
            spl=report.spl,
        )

    def row(self) -> tuple[object, ...]:
        """Return the CSV row."""
        return (
            self.policy,
            self.seed,
            self.goal_mode,
            self.episodes,
            codec.format_float(self.success_rate),
            codec.format_float(self.spl),
        )


@dataclasses.dataclass(frozen=True, slots=True)
class PilotResult:
    """All pilot rows and where they were written."""

    rows: tuple[PilotRow, ...]
    summary: pathlib.Path

    def mean_success(self, policy: str, goal_mode: str) -> float:
        """Return the seed-averaged success rate of *policy* under *goal_mode*."""
        rates = [
            row.success_rate
            for row in self.rows
            if row.policy == policy and row.goal_mode == goal_mode
        ]
        return float(np.mean(rates)) if rates else 0.0

    def table(self) -> str:
        """Render seed-averaged success rates as a policy × mode table."""
        policies = list(dict.fromkeys(row.policy for row in self.rows))
        modes = list(dict.fromkeys(row.goal_mode for row in self.rows))
        lines = ["policy".ljust(12) + "".join(mode.rjust(15) for mode in modes)]
        lines.extend(
            policy.ljust(12)
            + "".join(f"{self.mean_success(policy, mode):15.3f}" for mode in modes)
            for policy in policies
        )
        return "\n".join(lines)


def run_pilot(
    run_config: RunConfig,
    scenes: typ.Mapping[str, world.Scene],
    codebook: Codebook,
    train_episodes: cabc.Sequence[Episode],
    eval_episodes: cabc.Sequence[Episode],
    out_dir: pathlib.Path,
    *,
    variants: cabc.Sequence[str] = agent.VARIANTS,
    seeds: cabc.Sequence[int] = PILOT_SEEDS,
    modes: cabc.Sequence[GoalMode] = PILOT_MODES,
    threads: int = 1,
) -> PilotResult:
    """Train and evaluate every variant; write ``pilot.csv`` under *out_dir*."""
    settings = run_config.evaluation
    support = build_support_set(
        support_corpus(train_episodes, eval_episodes, settings.support_source),
        codebook,
        settings.support_lambda,
    )
    save_support_set(out_dir / "support.json", support)

    def run_eval(factory: PolicyFactory, mode: GoalMode, seed: int) -> EvalReport:
        return evaluate(
            factory,
            eval_episodes,
            mode,
            settings,
            scenes=scenes,
            codebook=codebook,
            support=support,
            reward_config=run_config.reward,
            headings=run_config.headings,
            fov=run_config.world.fov(),
            seed=seed,
            threads=threads,
        )

    rows: list[PilotRow] = []
    for variant in variants:
        for seed in seeds:
            config = run_config.with_variant(variant).with_seed(seed)
            run_dir = out_dir / variant / f"seed-{seed}"
            result = train(
                config, train_episodes, scenes, codebook, run_dir, threads=threads
            )
            factory = functools.partial(
                agent.NetworkPolicy, result.network, settings.act_mode
            )
            for mode in modes:
                report = run_eval(factory, mode, seed)
                write_report_csv(run_dir / f"eval-{mode}.csv", report)
                rows.append(PilotRow.from_report(variant, seed, report))
                _logger.info("%s seed %d: %s", variant, seed, report.summary_line())
    for seed in seeds:
        for mode in modes:
            report = run_eval(agent.RandomWalkPolicy, mode, seed)
            rows.append(PilotRow.from_report(BASELINE, seed, report))
    summary = codec.write_csv(
        out_dir / SUMMARY_FILENAME, PILOT_HEADER, (row.row() for row in rows)
    )
    return PilotResult(tuple(rows), summary)
