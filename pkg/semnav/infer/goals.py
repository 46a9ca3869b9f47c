"""Goal-mode dispatch for zero-shot evaluation."""

from __future__ import annotations

import typing as typ

from ..agent import Goal
from ..episodes import held_out_view
from ..semspace import text_embed
from .support import InferenceError, expand_text_goal

if typ.TYPE_CHECKING:
    from .. import world
    from ..episodes import Episode
    from ..semspace import Codebook
    from .support import Retrieval, SupportSet

GOAL_MODES: typ.Final = ("image", "text", "text_expanded", "category")

type GoalMode = typ.Literal["image", "text", "text_expanded", "category"]


def parse_goal_mode(value: str) -> GoalMode:
    """Accept ``text-expanded`` and ``text_expanded`` spellings."""
    mode = value.strip().lower().replace("-", "_")
    if mode not in GOAL_MODES:
        expected = ", ".join(GOAL_MODES)
        message = f"unknown goal mode {value!r}; expected one of {expected}"
        raise InferenceError(message)
    return typ.cast("GoalMode", mode)


def make_goal(
    episode: Episode,
    mode: GoalMode,
    codebook: Codebook,
    support: SupportSet | None = None,
    *,
    retrieval: Retrieval = "weighted",
) -> Goal:
    """Return the goal the agent is given under *mode*.

    ``image`` uses the held-out goal view (same heading as the first goal
    view, different camera pitch); ``text`` embeds the instance description;
    ``text_expanded`` expands that through *support*; ``category`` embeds the
    bare category name.
    """
    descriptor = episode.text_goal
    match mode:
        case "image":
            view = held_out_view(episode)
            return Goal(embedding=view.embedding, layout=view.layout)
        case "text":
            return Goal(
                text_embed(
                    codebook,
                    descriptor.category,
                    descriptor.attributes,
                    descriptor.context_tags,
                )
            )
        case "text_expanded":
            if support is None:
                message = "goal mode text_expanded requires a support set"
                raise InferenceError(message)
            query = text_embed(
                codebook,
                descriptor.category,
                descriptor.attributes,
                descriptor.context_tags,
            )
            expanded = expand_text_goal(
                query, support, codebook.config.temperature, retrieval
            )
            return Goal(expanded)
        case "category":
            return Goal(text_embed(codebook, episode.goal_category))
        case _:
            message = f"unknown goal mode {mode!r}"
            raise InferenceError(message)


def goal_target(
    episode: Episode, mode: GoalMode, scene: world.Scene
) -> tuple[tuple[world.Cell, ...], world.AgentPose]:
    """Return the success cells and reference goal pose for *mode*.

    Category goals succeed at any instance of the category; every other mode
    targets the episode's instance.
    """
    if mode == "category":
        cells = scene.category_viewpoints(episode.goal_category)
    else:
        cells = tuple(scene.viewpoints[episode.goal_instance])
    if mode == "image":
        pose = held_out_view(episode).pose
    else:
        pose = episode.view(episode.goal_views[0]).pose
    return cells, pose
