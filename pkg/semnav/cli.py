"""Command line entry points for semnav."""

from __future__ import annotations

import dataclasses
import importlib.metadata
import logging
import os
import pathlib
import platform
import sys
import typing as typ

import numpy as np
import torch
from cyclopts import App, Parameter

from . import PACKAGE_NAME, agent, episodes, paths, world
from .config import (
    RunConfig,
    dump_run_config,
    packaged_config,
    resolve_run_config,
    validate_run_config,
)
from .errors import ConfigError, OperationalError, SemnavError
from .experiments import PILOT_SEEDS, run_pilot
from .infer.diagnostics import dump_embeddings, gap_closure_report
from .infer.evaluate import evaluate, write_report_csv
from .infer.goals import parse_goal_mode
from .infer.support import (
    InferenceError,
    build_support_set,
    load_support_set,
    save_support_set,
)
from .semspace import (
    build_codebook,
    codebook_digest,
    config_mismatch,
    save_codebook,
)
from .train.loop import train as run_training

if typ.TYPE_CHECKING:
    from .semspace import Codebook

ENV_LOG_LEVEL: typ.Final = "SEMNAV_LOG_LEVEL"
LOG_FORMAT: typ.Final = "level=%(levelname)s logger=%(name)s msg=%(message)s"
ERROR_SUPPORT_REQUIRED: typ.Final = (
    "goal mode text_expanded requires a support set; build one with "
    "`semnav support --episodes <train.json> --scenes <dir> --out support.json` "
    "and pass it as --support-set"
)
ERROR_CODEBOOK_MISMATCH: typ.Final = (
    "the scene set's codebook was built with {key}={stored!r}, but the "
    "configuration asks for {configured!r}; regenerate the scenes or use the "
    "configuration they were generated with"
)


def _version() -> str:
    try:
        version = importlib.metadata.version(PACKAGE_NAME)
    except importlib.metadata.PackageNotFoundError:
        version = "0+unknown"
    return (
        f"{PACKAGE_NAME} {version} (python {platform.python_version()}, "
        f"numpy {np.__version__}, torch {torch.__version__})"
    )


app = App(name=PACKAGE_NAME, version=_version)

scene_app = App(name="scene", help="Generate and inspect scene sets.")

diagnose_app = App(name="diagnose", help="Embedding and goal-distribution diagnostics.")

experiment_app = App(name="experiment", help="Multi-run experiment drivers.")

codebook_app = App(name="codebook", help="Semantic codebook utilities.")


def configure_logging(*, verbose: bool = False) -> None:
    """Configure the root logger once per invocation.

    ``SEMNAV_LOG_LEVEL`` wins over ``--verbose``.
    """
    level: int | str = logging.DEBUG if verbose else logging.WARNING
    if override := os.getenv(ENV_LOG_LEVEL):
        level = override.strip().upper()
    try:
        logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    except ValueError as error:
        raise ConfigError(ENV_LOG_LEVEL, f"unknown log level {level!r}") from error


def _load_config(config: pathlib.Path | None, seed: int | None = None) -> RunConfig:
    run_config = resolve_run_config(config)
    return run_config if seed is None else run_config.with_seed(seed)


def _load_scenes(
    scenes: pathlib.Path, run_config: RunConfig
) -> tuple[dict[str, world.Scene], Codebook]:
    scene_map, codebook = world.load_scene_set(scenes)
    if mismatch := config_mismatch(codebook.config, run_config.semspace):
        key, stored, configured = mismatch
        raise ConfigError(
            f"semspace.{key}",
            ERROR_CODEBOOK_MISMATCH.format(
                key=key, stored=stored, configured=configured
            ),
        )
    return scene_map, codebook


@scene_app.command(name="gen")
def scene_gen(
    *,
    seed: int = 0,
    count: int | None = None,
    out: pathlib.Path | None = None,
    config: pathlib.Path | None = None,
    verbose: bool = False,
) -> None:
    """Generate scenes plus their codebook and manifest.

    Parameters
    ----------
    seed:
        Seed of the scene layouts.
    count:
        Number of scenes; defaults to ``world.scene_count``.
    out:
        Output directory; defaults to ``$SEMNAV_OUTPUT_DIR/scenes``.
    config:
        Run configuration file.
    verbose:
        Log debug detail.

    """
    configure_logging(verbose=verbose)
    run_config = _load_config(config)
    total = run_config.world.scene_count if count is None else count
    if total < 0:
        raise ConfigError("--count", "must be non-negative")
    target = paths.resolve_output(out, "scenes")
    codebook = build_codebook(run_config.semspace)
    generated = world.generate_scenes(
        seed, total, run_config.world.generation(), run_config.semspace
    )
    manifest = world.save_scene_set(target, generated, codebook, seed)
    print(f"wrote {len(generated)} scenes: {manifest}")


@scene_app.command(name="show")
def scene_show(path: pathlib.Path) -> None:
    """Print a scene file as ASCII."""
    print(world.render_ascii(world.load_scene(path)))


@app.command(name="episodes")
def episodes_cmd(
    *,
    scenes: pathlib.Path,
    out: pathlib.Path,
    count: int | None = None,
    select: typ.Literal["entropy", "random"] | None = None,
    views: int | None = None,
    pitch: int | None = None,
    seed: int | None = None,
    config: pathlib.Path | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> None:
    """Generate episodes over a scene set and report their goal distribution.

    Parameters
    ----------
    scenes:
        Scene directory or manifest written by ``semnav scene gen``.
    out:
        Episodes JSON file; the goal-distribution CSV lands beside it.
    count:
        Number of episodes; defaults to ``episodes.count``.
    select:
        Goal-view selection mode.
    views:
        Number of headings (yaw views per pitch level).
    pitch:
        Number of pitch levels (1 or 3).
    seed:
        Episode seed; defaults to the configuration seed.
    config:
        Run configuration file.
    threads:
        Worker threads; results do not depend on it.
    verbose:
        Log debug detail.

    """
    configure_logging(verbose=verbose)
    run_config = _load_config(config, seed)
    overrides = {
        key: value
        for key, value in (
            ("count", count),
            ("selection", select),
            ("headings", views),
            ("pitch_levels", pitch),
        )
        if value is not None
    }
    settings = dataclasses.replace(run_config.episodes, **overrides)
    run_config = validate_run_config(dataclasses.replace(run_config, episodes=settings))
    scene_map, codebook = _load_scenes(scenes, run_config)
    generated = episodes.generate_episodes(
        list(scene_map.values()),
        codebook,
        run_config.seed,
        settings.generation(),
        settings.count,
        threads=threads,
        fov=run_config.world.fov(),
    )
    episodes.save_episodes(out, generated, settings.generation())
    print(f"wrote {len(generated)} episodes: {out}")
    if generated:
        report = episodes.goal_distribution_report(
            generated, codebook, settings.ambiguous_threshold
        )
        csv_path = episodes.write_goal_distribution_csv(
            out.with_suffix(".goal-dist.csv"), report
        )
        print(
            f"mean goal-view entropy={episodes.mean_goal_view_entropy(generated):.4f} "
            f"ambiguous={report.ambiguous_fraction:.4f} ({csv_path})"
        )


@app.command(name="support")
def support_cmd(
    *,
    episodes_path: typ.Annotated[pathlib.Path, Parameter(name="--episodes")],
    scenes: pathlib.Path,
    out: pathlib.Path,
    support_lambda: typ.Annotated[float | None, Parameter(name="--lambda")] = None,
    config: pathlib.Path | None = None,
    verbose: bool = False,
) -> None:
    """Build the deduplicated support set from episode goal views.

    Parameters
    ----------
    episodes_path:
        Episodes file whose goal views seed the set.
    scenes:
        Scene set the episodes were generated on (for the codebook).
    out:
        Support-set JSON file.
    support_lambda:
        Cosine deduplication threshold; defaults to ``eval.support_lambda``.
    config:
        Run configuration file.
    verbose:
        Log debug detail.

    """
    configure_logging(verbose=verbose)
    run_config = _load_config(config)
    threshold = (
        run_config.evaluation.support_lambda
        if support_lambda is None
        else support_lambda
    )
    if not 0 < threshold <= 1:
        raise ConfigError("--lambda", "must lie in (0, 1]")
    _, codebook = _load_scenes(scenes, run_config)
    support = build_support_set(
        episodes.load_episodes(episodes_path), codebook, threshold
    )
    save_support_set(out, support)
    print(f"support set size={len(support)} lambda={threshold}: {out}")


@app.command(name="train")
def train_cmd(
    *,
    episodes_path: typ.Annotated[pathlib.Path, Parameter(name="--episodes")],
    scenes: pathlib.Path,
    config: pathlib.Path | None = None,
    variant: str | None = None,
    seed: int | None = None,
    out: pathlib.Path | None = None,
    threads: int = 1,
    log_trajectories: bool = False,
    verbose: bool = False,
) -> None:
    """Train an agent variant with PPO.

    Parameters
    ----------
    episodes_path:
        Training episodes file.
    scenes:
        Scene set the episodes were generated on.
    config:
        Run configuration file.
    variant:
        Agent variant: psl, zson, lo or so.
    seed:
        Training seed; defaults to the configuration seed.
    out:
        Run directory; defaults to ``$SEMNAV_OUTPUT_DIR/train``.
    threads:
        Rollout threads; ``1`` guarantees bit-identical reruns.
    log_trajectories:
        Write per-step reward terms to ``trajectories.jsonl``.
    verbose:
        Log debug detail.

    """
    configure_logging(verbose=verbose)
    run_config = _load_config(config, seed)
    if variant is not None:
        run_config = run_config.with_variant(variant)
    target = paths.resolve_output(out, "train")
    scene_map, codebook = _load_scenes(scenes, run_config)
    dump_run_config(run_config, target / "config.yaml")
    result = run_training(
        run_config,
        episodes.load_episodes(episodes_path),
        scene_map,
        codebook,
        target,
        threads=threads,
        log_trajectories=log_trajectories,
    )
    print(result.summary_line())


@app.command(name="eval")
def eval_cmd(
    *,
    ckpt: pathlib.Path,
    episodes_path: typ.Annotated[pathlib.Path, Parameter(name="--episodes")],
    scenes: pathlib.Path,
    goal_mode: str | None = None,
    support_set: pathlib.Path | None = None,
    retrieval: typ.Literal["weighted", "nearest"] | None = None,
    limit: int | None = None,
    out: pathlib.Path | None = None,
    config: pathlib.Path | None = None,
    seed: int | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> None:
    """Evaluate a checkpoint and write the per-episode report.

    Parameters
    ----------
    ckpt:
        Network checkpoint or scripted-policy sentinel file.
    episodes_path:
        Evaluation episodes file.
    scenes:
        Scene set the episodes were generated on.
    goal_mode:
        image, text, text-expanded or category.
    support_set:
        Support-set file; required for text-expanded goals.
    retrieval:
        Support-set retrieval: weighted (default) or nearest.
    limit:
        Evaluate at most this many episodes; defaults to ``eval.episodes``
        (0 evaluates all).
    out:
        Report CSV; defaults to ``$SEMNAV_OUTPUT_DIR/eval-<mode>.csv``.
    config:
        Run configuration file.
    seed:
        Evaluation seed; defaults to the configuration seed.
    threads:
        Evaluation threads; reports do not depend on it.
    verbose:
        Log debug detail.

    """
    configure_logging(verbose=verbose)
    run_config = _load_config(config, seed)
    settings = run_config.evaluation
    mode = parse_goal_mode(goal_mode or settings.goal_mode)
    if mode == "text_expanded" and support_set is None:
        raise InferenceError(ERROR_SUPPORT_REQUIRED)
    settings = dataclasses.replace(
        settings,
        goal_mode=mode,
        retrieval=retrieval or settings.retrieval,
        episodes=settings.episodes if limit is None else limit,
    )
    scene_map, codebook = _load_scenes(scenes, run_config)
    support = load_support_set(support_set) if support_set is not None else None
    loaded = episodes.load_episodes(episodes_path)
    selected = loaded[: settings.episodes] if settings.episodes else loaded
    report = evaluate(
        agent.policy_factory(ckpt, settings.act_mode),
        selected,
        mode,
        settings,
        scenes=scene_map,
        codebook=codebook,
        support=support,
        reward_config=run_config.reward,
        headings=run_config.headings,
        fov=run_config.world.fov(),
        seed=run_config.seed,
        threads=threads,
    )
    target = paths.resolve_output(out, f"eval-{mode}.csv")
    write_report_csv(target, report)
    print(report.summary_line())
    print(f"report: {target}")


@diagnose_app.command(name="goal-dist")
def diagnose_goal_dist(
    *,
    episodes_path: typ.Annotated[pathlib.Path, Parameter(name="--episodes")],
    scenes: pathlib.Path,
    threshold: float | None = None,
    out: pathlib.Path | None = None,
    config: pathlib.Path | None = None,
) -> None:
    """Print the category distribution of selected goal views.

    Parameters
    ----------
    episodes_path:
        Episodes file.
    scenes:
        Scene set the episodes were generated on.
    threshold:
        Normalized entropy above which a view counts as ambiguous.
    out:
        Optional CSV destination.
    config:
        Run configuration file.

    """
    configure_logging()
    run_config = _load_config(config)
    _, codebook = _load_scenes(scenes, run_config)
    loaded = episodes.load_episodes(episodes_path)
    cutoff = run_config.episodes.ambiguous_threshold if threshold is None else threshold
    report = episodes.goal_distribution_report(loaded, codebook, cutoff)
    print(episodes.render_bar_chart(report))
    print(
        f"ambiguous={report.ambiguous_fraction:.4f} "
        f"mean_entropy={episodes.mean_goal_view_entropy(loaded):.4f}"
    )
    if out is not None:
        episodes.write_goal_distribution_csv(out, report)


@diagnose_app.command(name="gap-closure")
def diagnose_gap_closure(
    *,
    episodes_path: typ.Annotated[pathlib.Path, Parameter(name="--episodes")],
    scenes: pathlib.Path,
    support_set: pathlib.Path,
    retrieval: typ.Literal["weighted", "nearest"] = "weighted",
    dump: pathlib.Path | None = None,
    config: pathlib.Path | None = None,
) -> None:
    """Compare raw and expanded text goals with the held-out image goals.

    Parameters
    ----------
    episodes_path:
        Evaluation episodes file.
    scenes:
        Scene set the episodes were generated on.
    support_set:
        Support-set file used for expansion.
    retrieval:
        Support-set retrieval: weighted or nearest.
    dump:
        Optional JSONL file for the embeddings (for external t-SNE).
    config:
        Run configuration file.

    """
    configure_logging()
    run_config = _load_config(config)
    _, codebook = _load_scenes(scenes, run_config)
    loaded = episodes.load_episodes(episodes_path)
    support = load_support_set(support_set)
    closure = gap_closure_report(loaded, codebook, support, retrieval)
    print(closure.summary_line())
    if dump is not None:
        dump_embeddings(dump, loaded, codebook, support)
        print(f"embeddings: {dump}")


@experiment_app.command(name="pilot")
def experiment_pilot(
    *,
    scenes: pathlib.Path,
    train_episodes: pathlib.Path,
    eval_episodes: pathlib.Path,
    config: pathlib.Path | None = None,
    variants: list[str] | None = None,
    seeds: list[int] | None = None,
    out: pathlib.Path | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> None:
    """Train every variant and evaluate it under image and text goals.

    Parameters
    ----------
    scenes:
        Scene set shared by all runs.
    train_episodes:
        Training episodes file.
    eval_episodes:
        Evaluation episodes file.
    config:
        Run configuration; defaults to the packaged easy suite.
    variants:
        Variants to train; defaults to all four.
    seeds:
        Training seeds; defaults to 0, 1 and 2.
    out:
        Output directory; defaults to ``$SEMNAV_OUTPUT_DIR/pilot``.
    threads:
        Worker threads for rollouts and evaluation.
    verbose:
        Log debug detail.

    """
    configure_logging(verbose=verbose)
    run_config = (
        packaged_config("easy") if config is None else resolve_run_config(config)
    )
    for variant in variants or ():
        if variant.lower() not in agent.VARIANTS:
            raise ConfigError("--variants", f"unknown variant {variant!r}")
    target = paths.resolve_output(out, "pilot")
    scene_map, codebook = _load_scenes(scenes, run_config)
    evaluation = episodes.load_episodes(eval_episodes)
    if run_config.evaluation.episodes:
        evaluation = evaluation[: run_config.evaluation.episodes]
    dump_run_config(run_config, target / "config.yaml")
    result = run_pilot(
        run_config,
        scene_map,
        codebook,
        episodes.load_episodes(train_episodes),
        evaluation,
        target,
        variants=(
            [variant.lower() for variant in variants] if variants else agent.VARIANTS
        ),
        seeds=seeds or PILOT_SEEDS,
        threads=threads,
    )
    print(result.table())
    print(f"summary: {result.summary}")


@codebook_app.command(name="export")
def codebook_export(
    *,
    out: pathlib.Path,
    config: pathlib.Path | None = None,
) -> None:
    """Write the codebook the configuration describes.

    Parameters
    ----------
    out:
        Codebook JSON file.
    config:
        Run configuration file.

    """
    configure_logging()
    codebook = build_codebook(_load_config(config).semspace)
    save_codebook(codebook, out)
    print(f"codebook sha256={codebook_digest(codebook)}: {out}")


app.command(scene_app)
app.command(diagnose_app)
app.command(experiment_app)
app.command(codebook_app)


def main(argv: list[str] | tuple[str, ...] | None = None) -> int:
    """Entry point for the semnav CLI."""
    try:
        result = app(argv)
    except OperationalError as error:
        print(f"{PACKAGE_NAME}: {error}", file=sys.stderr)
        return 2
    except SemnavError as error:
        print(f"{PACKAGE_NAME}: {error}")
        return 1
    return int(result or 0)


if __name__ == "__main__":
    raise SystemExit(main())
