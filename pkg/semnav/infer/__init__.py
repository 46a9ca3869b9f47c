"""Zero-shot evaluation: support sets, goal modes and metrics."""

from __future__ import annotations

from .diagnostics import GapClosure, dump_embeddings, gap_closure_report
from .evaluate import (
    EpisodeResult,
    EvalConfig,
    EvalReport,
    evaluate,
    run_episode,
    support_corpus,
)
from .goals import GOAL_MODES, goal_target, make_goal, parse_goal_mode
from .support import (
    InferenceError,
    SupportSet,
    build_support_set,
    expand_text_goal,
    load_support_set,
    save_support_set,
    support_insert,
)

__all__ = [
    "GOAL_MODES",
    "EpisodeResult",
    "EvalConfig",
    "EvalReport",
    "GapClosure",
    "InferenceError",
    "SupportSet",
    "build_support_set",
    "dump_embeddings",
    "evaluate",
    "expand_text_goal",
    "gap_closure_report",
    "goal_target",
    "load_support_set",
    "make_goal",
    "parse_goal_mode",
    "run_episode",
    "save_support_set",
    "support_corpus",
    "support_insert",
]
