"""Embedding-level diagnostics for goal modes."""

from __future__ import annotations

import dataclasses
import typing as typ

import numpy as np

from .. import codec
from ..episodes import held_out_view
from ..semspace import cosine, text_embed
from .support import InferenceError, expand_text_goal

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from ..episodes import Episode
    from ..semspace import Codebook
    from .support import Retrieval, SupportSet


@dataclasses.dataclass(frozen=True, slots=True)
class GapClosure:
    """Mean cosine of raw and expanded text goals to the held-out image goal."""

    text: tuple[float, ...]
    expanded: tuple[float, ...]

    @property
    def mean_text(self) -> float:
        """Return the mean raw-text cosine."""
        return float(np.mean(self.text))

    @property
    def mean_expanded(self) -> float:
        """Return the mean expanded-text cosine."""
        return float(np.mean(self.expanded))

    @property
    def closure(self) -> float:
        """Return how much expansion moved text goals towards image goals."""
        return self.mean_expanded - self.mean_text

    def summary_line(self) -> str:
        """Return the line ``diagnose gap-closure`` prints."""
        return (
            f"episodes={len(self.text)} text={self.mean_text:.4f} "
            f"expanded={self.mean_expanded:.4f} closure={self.closure:+.4f}"
        )


def _text_goal(episode: Episode, codebook: Codebook) -> np.ndarray:
    descriptor = episode.text_goal
    return text_embed(
        codebook, descriptor.category, descriptor.attributes, descriptor.context_tags
    )


def gap_closure_report(
    episodes: cabc.Sequence[Episode],
    codebook: Codebook,
    support: SupportSet,
    retrieval: Retrieval = "weighted",
) -> GapClosure:
    """Compare ``cos(z_T, image)`` with ``cos(z_R, image)`` per episode."""
    if not episodes:
        message = "gap closure needs at least one episode"
        raise InferenceError(message)
    text: list[float] = []
    expanded: list[float] = []
    temperature = codebook.config.temperature
    for episode in episodes:
        image = held_out_view(episode).embedding
        query = _text_goal(episode, codebook)
        text.append(cosine(query, image))
        expansion = expand_text_goal(query, support, temperature, retrieval)
        expanded.append(cosine(expansion, image))
    return GapClosure(tuple(text), tuple(expanded))


def dump_embeddings(
    path: pathlib.Path,
    episodes: cabc.Sequence[Episode],
    codebook: Codebook,
    support: SupportSet | None = None,
) -> pathlib.Path:
    """Write image, text and expanded goal embeddings as JSON lines.

    Each record carries ``kind``, ``episode_id``, ``category`` and
    ``vector``; support vectors follow with kind ``support``.
    """

    def records() -> cabc.Iterator[dict[str, object]]:
        temperature = codebook.config.temperature
        for episode in episodes:
            base = {"episode_id": episode.episode_id, "category": episode.goal_category}
            query = _text_goal(episode, codebook)
            yield {
                **base,
                "kind": "image",
                "vector": codec.vector_to_list(held_out_view(episode).embedding),
            }
            yield {**base, "kind": "text", "vector": codec.vector_to_list(query)}
            if support is not None and len(support):
                yield {
                    **base,
                    "kind": "text_expanded",
                    "vector": codec.vector_to_list(
                        expand_text_goal(query, support, temperature)
                    ),
                }
        if support is not None:
            pairs = zip(support.provenance, support.vectors, strict=True)
            for provenance, vector in pairs:
                yield {
                    "episode_id": provenance,
                    "category": "",
                    "kind": "support",
                    "vector": codec.vector_to_list(vector),
                }

    return codec.write_jsonl(path, records())
