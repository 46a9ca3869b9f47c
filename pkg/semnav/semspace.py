"""Synthetic semantic embedding space standing in for a frozen vision-language encoder.

A :class:`Codebook` assigns a fixed unit direction to every category and
attribute name, plus two special directions: a null-content direction for
views that contain nothing, and the modality-gap direction ``δ`` that every
text embedding is offset along. When the named directions fit in the
embedding dimension they are mutually orthonormal, so similarities between
embeddings are exact sums of shared components.

Image-side and text-side encoders share the same directions. The only
systematic difference between ``text_embed`` and ``image_embed`` of the same
content is ``gap_magnitude · δ`` (instance noise is kept orthogonal to
``δ``), which makes the text/image cosine non-increasing in the gap
magnitude.
"""

from __future__ import annotations

import dataclasses
import hashlib
import typing as typ

import numpy as np

from . import codec, seeding
from .errors import SemnavError

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    import numpy.typing as npt

DEFAULT_CATEGORIES: typ.Final = ("chair", "bed", "plant", "toilet", "tv", "sofa")
DEFAULT_ATTRIBUTE_VOCAB: typ.Final[dict[str, tuple[str, ...]]] = {
    "color": ("red", "blue", "green", "white", "black", "beige"),
    "material": ("wood", "metal", "fabric", "plastic", "glass"),
    "shape": ("round", "square", "tall", "low"),
}
NULL_KEY: typ.Final = "special/null"
GAP_KEY: typ.Final = "special/gap"
MIN_DIM: typ.Final = 8
UNIT_TOLERANCE: typ.Final = 1e-6
CODEBOOK_FORMAT: typ.Final = "semnav-codebook/1"


class SemanticSpaceError(SemnavError):
    """Raised for invalid semantic-space configuration or inputs."""


@dataclasses.dataclass(frozen=True, slots=True)
class SemanticSpaceConfig:
    """Shape and seed of the synthetic embedding space.

    Attributes
    ----------
    dim:
        Embedding dimension (the encoder width ``C_1``).
    categories:
        Ordered category names; the zero-shot classes.
    attribute_vocab:
        Attribute names per facet (``color``, ``material``, ``shape``).
    temperature:
        Logit scale ``τ`` of the scaled cosine ``g``; shared by goal-view
        scoring and text-goal expansion.
    gap_magnitude:
        Strength of the constant text-side offset along ``δ``.
    noise_scale:
        Weight of the per-instance noise direction in image embeddings.
    seed:
        Seed of the codebook stream.

    """

    dim: int = 64
    categories: tuple[str, ...] = DEFAULT_CATEGORIES
    attribute_vocab: typ.Mapping[str, tuple[str, ...]] = dataclasses.field(
        default_factory=lambda: dict(DEFAULT_ATTRIBUTE_VOCAB)
    )
    temperature: float = 100.0
    gap_magnitude: float = 0.15
    noise_scale: float = 0.05
    seed: int = 0


@dataclasses.dataclass(frozen=True, slots=True)
class InstanceDescriptor:
    """Identity of one object instance.

    ``attributes`` holds the intrinsic facets (colour, material, shape);
    ``context_tags`` lists the categories of nearby objects (extrinsic).
    """

    instance_id: str
    category: str
    attributes: typ.Mapping[str, str] = dataclasses.field(default_factory=dict)
    context_tags: tuple[str, ...] = ()

    def describe(self) -> str:
        """Return the natural-language goal text for this instance."""
        adjectives = " ".join(
            self.attributes[facet] for facet in sorted(self.attributes)
        )
        head = f"Find a {adjectives} {self.category}".replace("  ", " ")
        if not self.context_tags:
            return head
        return f"{head} near a {' and a '.join(self.context_tags)}"


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class Codebook:
    """Immutable map from names to unit directions.

    Lookups are pure; the two private caches only memoize values derived
    from the directions, so concurrent readers are safe.
    """

    config: SemanticSpaceConfig
    directions: typ.Mapping[str, np.ndarray]
    _noise: dict[str, np.ndarray] = dataclasses.field(
        default_factory=dict, repr=False
    )
    _queries: dict[str, np.ndarray] = dataclasses.field(
        default_factory=dict, repr=False
    )

    @property
    def dim(self) -> int:
        """Return the embedding dimension."""
        return self.config.dim

    @property
    def categories(self) -> tuple[str, ...]:
        """Return the ordered category names."""
        return self.config.categories

    @property
    def null(self) -> np.ndarray:
        """Return the null-content direction used for empty views."""
        return self.directions[NULL_KEY]

    @property
    def gap(self) -> np.ndarray:
        """Return the modality-gap direction ``δ``."""
        return self.directions[GAP_KEY]

    def category_dir(self, category: str) -> np.ndarray:
        """Return the direction of *category*."""
        try:
            return self.directions[category_key(category)]
        except KeyError:
            message = f"unknown category {category!r}"
            raise SemanticSpaceError(message) from None

    def attribute_dir(self, facet: str, name: str) -> np.ndarray:
        """Return the direction of attribute *name* within *facet*."""
        try:
            return self.directions[attribute_key(facet, name)]
        except KeyError:
            message = f"unknown attribute {facet}={name!r}"
            raise SemanticSpaceError(message) from None

    def instance_noise(self, instance_id: str) -> np.ndarray:
        """Return the deterministic unit noise direction of an instance."""
        if (cached := self._noise.get(instance_id)) is not None:
            return cached
        rng = seeding.generator(self.config.seed, "instance-noise", instance_id)
        raw = rng.standard_normal(self.dim)
        # Orthogonal to δ, so the gap offset is the only text/image asymmetry.
        raw -= float(raw @ self.gap) * self.gap
        noise = _frozen(normalize(raw))
        self._noise[instance_id] = noise
        return noise

    def instance_embedding(self, descriptor: InstanceDescriptor) -> np.ndarray:
        """Return the image-side embedding of a single instance."""
        content = self.content(descriptor.category, descriptor.attributes)
        noise = self.config.noise_scale * self.instance_noise(descriptor.instance_id)
        return normalize(content + noise)

    def category_query(self, category: str) -> np.ndarray:
        """Return the zero-shot class query ``q_c`` (text side, no attributes)."""
        if (cached := self._queries.get(category)) is not None:
            return cached
        query = _frozen(text_embed(self, category))
        self._queries[category] = query
        return query

    def content(
        self, category: str, attributes: typ.Mapping[str, str]
    ) -> np.ndarray:
        """Return the unnormalized sum of a category and its attribute directions."""
        total = self.category_dir(category).copy()
        for facet, name in attributes.items():
            total += self.attribute_dir(facet, name)
        return total


def category_key(category: str) -> str:
    """Return the direction key of a category."""
    return f"category/{category}"


def attribute_key(facet: str, name: str) -> str:
    """Return the direction key of an attribute."""
    return f"{facet}/{name}"


def _frozen(vector: np.ndarray) -> np.ndarray:
    vector.flags.writeable = False
    return vector


def normalize(vector: npt.ArrayLike) -> np.ndarray:
    """Return *vector* scaled to unit L2 norm."""
    values = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if not np.isfinite(norm) or norm == 0.0:
        message = "cannot normalize a zero or non-finite vector"
        raise SemanticSpaceError(message)
    return values / norm


def _direction_names(config: SemanticSpaceConfig) -> list[str]:
    names = [category_key(category) for category in config.categories]
    for facet, vocabulary in config.attribute_vocab.items():
        names.extend(attribute_key(facet, name) for name in vocabulary)
    names.extend((NULL_KEY, GAP_KEY))
    return names


def _validate_config(config: SemanticSpaceConfig) -> None:
    if config.dim < MIN_DIM:
        message = f"embedding dimension must be at least {MIN_DIM}, got {config.dim}"
        raise SemanticSpaceError(message)
    if len(config.categories) < 2:  # noqa: PLR2004 - zero-shot needs a choice
        message = "at least two categories are required"
        raise SemanticSpaceError(message)
    if len(set(config.categories)) != len(config.categories):
        duplicates = sorted(
            {name for name in config.categories if config.categories.count(name) > 1}
        )
        message = f"duplicate category names: {', '.join(duplicates)}"
        raise SemanticSpaceError(message)
    for facet, vocabulary in config.attribute_vocab.items():
        if len(set(vocabulary)) != len(vocabulary):
            message = f"duplicate attribute names in facet {facet!r}"
            raise SemanticSpaceError(message)
    if config.temperature <= 0:
        message = f"temperature must be positive, got {config.temperature}"
        raise SemanticSpaceError(message)
    if config.gap_magnitude < 0 or config.noise_scale < 0:
        message = "gap_magnitude and noise_scale must be non-negative"
        raise SemanticSpaceError(message)


def build_codebook(config: SemanticSpaceConfig) -> Codebook:
    """Generate the codebook for *config*.

    Directions come from one Gaussian draw on the ``codebook`` stream. When
    they fit in ``dim`` they are orthonormalized (QR with a sign convention
    that makes the result unique); otherwise each is normalized on its own.
    """
    _validate_config(config)
    names = _direction_names(config)
    rng = seeding.generator(config.seed, "codebook")
    draws = rng.standard_normal((len(names), config.dim))
    if len(names) <= config.dim:
        basis, upper = np.linalg.qr(draws.T)
        signs = np.sign(np.diag(upper))
        signs[signs == 0] = 1.0
        vectors = (basis * signs).T
    else:
        vectors = draws / np.linalg.norm(draws, axis=1, keepdims=True)
    directions = {
        name: _frozen(np.ascontiguousarray(vector))
        for name, vector in zip(names, vectors, strict=True)
    }
    return Codebook(config=config, directions=directions)


def image_embed(
    codebook: Codebook,
    visible: cabc.Sequence[tuple[InstanceDescriptor, float]],
) -> np.ndarray:
    """Embed a view as the normalized weighted sum of its visible instances.

    An empty view returns the null-content direction.
    """
    if not visible:
        return codebook.null.copy()
    total = np.zeros(codebook.dim)
    for descriptor, weight in visible:
        if not weight > 0:
            message = f"visibility weight must be positive, got {weight}"
            raise SemanticSpaceError(message)
        total += weight * codebook.instance_embedding(descriptor)
    return normalize(total)


def text_embed(
    codebook: Codebook,
    category: str,
    attributes: typ.Mapping[str, str] | None = None,
    context_tags: cabc.Sequence[str] = (),
    *,
    gap_magnitude: float | None = None,
) -> np.ndarray:
    """Embed a goal description on the text side of the space.

    ``normalize(category + Σ attributes + Σ context + gap_magnitude · δ)``;
    the configured gap magnitude applies unless one is given.
    """
    magnitude = (
        codebook.config.gap_magnitude if gap_magnitude is None else gap_magnitude
    )
    total = codebook.content(category, attributes or {})
    for tag in context_tags:
        total += codebook.category_dir(tag)
    total += magnitude * codebook.gap
    return normalize(total)


def scaled_cosine(a: npt.ArrayLike, b: npt.ArrayLike, temperature: float) -> float:
    """Return ``τ · aᵀb / (‖a‖‖b‖)``."""
    left = np.asarray(a, dtype=np.float64)
    right = np.asarray(b, dtype=np.float64)
    left_norm = float(np.linalg.norm(left))
    right_norm = float(np.linalg.norm(right))
    if left_norm == 0.0 or right_norm == 0.0:
        message = "scaled cosine is undefined for zero vectors"
        raise SemanticSpaceError(message)
    cosine = float(left @ right) / (left_norm * right_norm)
    return temperature * min(1.0, max(-1.0, cosine))


def cosine(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Return the raw cosine similarity of two vectors."""
    return scaled_cosine(a, b, 1.0)


def softmax(logits: npt.ArrayLike) -> np.ndarray:
    """Return the numerically stable softmax of *logits*."""
    values = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(values - values.max())
    return shifted / shifted.sum()


def classify(codebook: Codebook, embedding: npt.ArrayLike) -> np.ndarray:
    """Return zero-shot class probabilities ``softmax_c(g(v, q_c))``."""
    temperature = codebook.config.temperature
    logits = [
        scaled_cosine(embedding, codebook.category_query(category), temperature)
        for category in codebook.categories
    ]
    return softmax(logits)


def is_unit(vector: npt.ArrayLike, tolerance: float = UNIT_TOLERANCE) -> bool:
    """Return whether *vector* has unit L2 norm within *tolerance*."""
    return abs(float(np.linalg.norm(np.asarray(vector))) - 1.0) <= tolerance


def codebook_digest(codebook: Codebook) -> str:
    """Return a SHA-256 digest over every direction, in name order."""
    digest = hashlib.sha256()
    for name in sorted(codebook.directions):
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(codebook.directions[name]).tobytes())
    return digest.hexdigest()


def config_to_dict(config: SemanticSpaceConfig) -> dict[str, object]:
    """Return the YAML/JSON mapping for *config*."""
    return {
        "dim": config.dim,
        "categories": list(config.categories),
        "attribute_vocab": {
            facet: list(names) for facet, names in config.attribute_vocab.items()
        },
        "temperature": config.temperature,
        "gap_magnitude": config.gap_magnitude,
        "noise_scale": config.noise_scale,
        "seed": config.seed,
    }


def config_mismatch(
    stored: SemanticSpaceConfig, configured: SemanticSpaceConfig
) -> tuple[str, object, object] | None:
    """Return the first key on which two configurations disagree, with both values.

    Keys are compared in field order, so ``dim`` is reported before the
    settings that only change direction values.
    """
    left = config_to_dict(stored)
    right = config_to_dict(configured)
    for key, value in left.items():
        if right[key] != value:
            return key, value, right[key]
    return None


def config_from_dict(data: typ.Mapping[str, typ.Any]) -> SemanticSpaceConfig:
    """Build a :class:`SemanticSpaceConfig` from a decoded mapping."""
    vocab = data.get("attribute_vocab", DEFAULT_ATTRIBUTE_VOCAB)
    return SemanticSpaceConfig(
        dim=int(data.get("dim", 64)),
        categories=tuple(
            str(name) for name in data.get("categories", DEFAULT_CATEGORIES)
        ),
        attribute_vocab={
            str(facet): tuple(str(name) for name in names)
            for facet, names in dict(vocab).items()
        },
        temperature=float(data.get("temperature", 100.0)),
        gap_magnitude=float(data.get("gap_magnitude", 0.15)),
        noise_scale=float(data.get("noise_scale", 0.05)),
        seed=int(data.get("seed", 0)),
    )


def save_codebook(codebook: Codebook, path: pathlib.Path) -> pathlib.Path:
    """Write the codebook JSON file."""
    document = {
        "format": CODEBOOK_FORMAT,
        "config": config_to_dict(codebook.config),
        "directions": {
            name: codec.vector_to_list(vector)
            for name, vector in codebook.directions.items()
        },
    }
    return codec.write_json(path, document)


def load_codebook(path: pathlib.Path) -> Codebook:
    """Read a codebook JSON file written by :func:`save_codebook`."""
    document = codec.read_json(path)
    if not isinstance(document, dict) or document.get("format") != CODEBOOK_FORMAT:
        message = f"{path} is not a semnav codebook file"
        raise SemanticSpaceError(message)
    config = config_from_dict(document["config"])
    _validate_config(config)
    expected = _direction_names(config)
    stored = document["directions"]
    if list(stored) != expected:
        message = f"{path}: direction names do not match the stored configuration"
        raise SemanticSpaceError(message)
    directions = {
        name: _frozen(np.asarray(stored[name], dtype=np.float64)) for name in expected
    }
    for name, vector in directions.items():
        if vector.shape != (config.dim,):
            message = f"{path}: direction {name!r} has shape {vector.shape}"
            raise SemanticSpaceError(message)
    return Codebook(config=config, directions=directions)
