"""Deduplicated support set of goal-view embeddings and text-goal expansion.

A text goal embedding sits on the text side of the modality gap. Expanding
it replaces it with a similarity-weighted mixture of image-side goal
embeddings seen during training, which lands it back among image goals.
"""

from __future__ import annotations

import dataclasses
import logging
import typing as typ

import numpy as np

from .. import codec
from ..errors import SemnavError
from ..semspace import is_unit, normalize, softmax

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from ..episodes import Episode
    from ..semspace import Codebook

_logger = logging.getLogger(__name__)

SUPPORT_FORMAT: typ.Final = "semnav-support/1"
DEFAULT_THRESHOLD: typ.Final = 0.8
# Insertion needs max cosine < threshold - COSINE_TOLERANCE. The margin is
# float rounding of unit dot products: a duplicate may score 1 - 2e-16 and is
# still rejected at a threshold of 1.0. Cosines more than 1e-9 below the
# threshold are inserted as usual.
COSINE_TOLERANCE: typ.Final = 1e-9

type Retrieval = typ.Literal["weighted", "nearest"]


class InferenceError(SemnavError):
    """Raised for invalid support sets, goals, or evaluation requests."""


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class SupportSet:
    """Unit vectors whose pairwise raw cosines all stay below ``threshold``."""

    threshold: float = DEFAULT_THRESHOLD
    vectors: tuple[np.ndarray, ...] = ()
    provenance: tuple[str, ...] = ()

    def __len__(self) -> int:
        """Return the number of stored vectors."""
        return len(self.vectors)

    @property
    def matrix(self) -> np.ndarray:
        """Return the vectors stacked as rows."""
        if not self.vectors:
            return np.zeros((0, 0))
        return np.stack(self.vectors)


def _check_unit(vector: np.ndarray) -> np.ndarray:
    values = np.asarray(vector, dtype=np.float64)
    if values.ndim != 1 or not is_unit(values):
        message = "support vectors must be unit-norm 1-D embeddings"
        raise InferenceError(message)
    return values


def _max_cosine(matrix: np.ndarray, vector: np.ndarray) -> float:
    if matrix.size == 0:
        return -np.inf
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(vector)
    return float(np.max(matrix @ vector / norms))


def support_insert(
    support: SupportSet, vector: np.ndarray, provenance: str = ""
) -> tuple[SupportSet, bool]:
    """Return ``(set', inserted)``; insertion needs every cosine below the threshold."""
    values = _check_unit(vector)
    if _max_cosine(support.matrix, values) >= support.threshold - COSINE_TOLERANCE:
        return support, False
    return (
        SupportSet(
            support.threshold,
            (*support.vectors, values),
            (*support.provenance, provenance),
        ),
        True,
    )


class SupportSetBuilder:
    """Streaming greedy deduplication; one writer, insertion order kept."""

    def __init__(
        self, threshold: float = DEFAULT_THRESHOLD, dim: int | None = None
    ) -> None:
        """Start an empty set with cosine *threshold*."""
        if not 0 < threshold <= 1:
            message = f"support threshold must lie in (0, 1], got {threshold}"
            raise InferenceError(message)
        self.threshold = threshold
        self._rows: list[np.ndarray] = []
        self._provenance: list[str] = []
        self._matrix = np.zeros((0, dim or 0))

    def offer(self, vector: np.ndarray, provenance: str = "") -> bool:
        """Insert *vector* unless it is too similar to a stored one."""
        values = _check_unit(vector)
        if self._matrix.shape[1] == 0:
            self._matrix = np.zeros((0, values.size))
        if _max_cosine(self._matrix, values) >= self.threshold - COSINE_TOLERANCE:
            return False
        self._rows.append(values)
        self._provenance.append(provenance)
        self._matrix = np.vstack((self._matrix, values))
        return True

    def build(self) -> SupportSet:
        """Return the immutable set."""
        return SupportSet(self.threshold, tuple(self._rows), tuple(self._provenance))


def build_support_set(
    episodes: cabc.Sequence[Episode],
    codebook: Codebook,
    threshold: float = DEFAULT_THRESHOLD,
) -> SupportSet:
    """Stream every selected goal view of *episodes* through the deduplicator."""
    if not episodes:
        message = "a support set needs at least one episode"
        raise InferenceError(message)
    builder = SupportSetBuilder(threshold, codebook.dim)
    offered = 0
    for episode in episodes:
        for view in episode.goal_view_candidates:
            if view.embedding.shape != (codebook.dim,):
                message = (
                    f"episode {episode.episode_id!r} embeddings do not match "
                    "the codebook"
                )
                raise InferenceError(message)
            builder.offer(view.embedding, f"{episode.episode_id}#{view.index}")
            offered += 1
    support = builder.build()
    _logger.info("support set kept %d of %d goal views", len(support), offered)
    return support


def retrieval_weights(
    query: np.ndarray,
    support: SupportSet,
    temperature: float,
    retrieval: Retrieval = "weighted",
) -> np.ndarray:
    """Return the mixture weights over support vectors for *query*."""
    if not support.vectors:
        message = "cannot expand a goal with an empty support set"
        raise InferenceError(message)
    matrix = support.matrix
    cosines = matrix @ query / (np.linalg.norm(matrix, axis=1) * np.linalg.norm(query))
    if retrieval == "nearest":
        weights = np.zeros(len(support))
        weights[int(np.argmax(cosines))] = 1.0
        return weights
    if retrieval != "weighted":
        message = f"unknown retrieval mode {retrieval!r}"
        raise InferenceError(message)
    return softmax(temperature * cosines)


def expand_text_goal(
    query: np.ndarray,
    support: SupportSet,
    temperature: float,
    retrieval: Retrieval = "weighted",
) -> np.ndarray:
    """Return ``normalize(Σ softmax_i(τ·cos(z_T, s_i)) s_i)``.

    ``retrieval="nearest"`` returns the single most similar support vector.
    """
    weights = retrieval_weights(query, support, temperature, retrieval)
    return normalize(weights @ support.matrix)


def save_support_set(path: pathlib.Path, support: SupportSet) -> pathlib.Path:
    """Write the support set JSON file."""
    document = {
        "format": SUPPORT_FORMAT,
        "lambda": support.threshold,
        "vectors": [codec.vector_to_list(vector) for vector in support.vectors],
        "provenance": list(support.provenance),
    }
    return codec.write_json(path, document)


def load_support_set(path: pathlib.Path) -> SupportSet:
    """Read a support set written by :func:`save_support_set`."""
    document = codec.read_json(path)
    if not isinstance(document, dict) or document.get("format") != SUPPORT_FORMAT:
        message = f"{path} is not a semnav support-set file"
        raise InferenceError(message)
    vectors = tuple(np.asarray(row, dtype=np.float64) for row in document["vectors"])
    provenance = tuple(str(item) for item in document["provenance"])
    if len(vectors) != len(provenance):
        message = f"{path}: vectors and provenance differ in length"
        raise InferenceError(message)
    return SupportSet(float(document["lambda"]), vectors, provenance)
