"""Episode generation with entropy-prioritized goal views.

At the goal point the agent renders a grid of candidate views, one per
``(pitch, yaw)`` pair. Each view is zero-shot classified against the
category queries; views whose class distribution has low normalized
entropy frame an object clearly and make informative goals. Candidate
``ω`` has pitch index ``ω // headings`` into :data:`PITCH_ORDER` and yaw
``ω % headings``.
"""

from __future__ import annotations

import collections
import concurrent.futures
import dataclasses
import logging
import math
import operator
import typing as typ

import numpy as np

from . import codec, seeding, world
from .errors import SemnavError
from .semspace import InstanceDescriptor, classify

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from .semspace import Codebook

_logger = logging.getLogger(__name__)

PITCH_ORDER: typ.Final = (0, -1, 1)
AMBIGUOUS: typ.Final = "ambiguous"
EPISODES_FORMAT: typ.Final = "semnav-episodes/1"
PROBABILITY_TOLERANCE: typ.Final = 1e-6
# Lowest entropy first; ties go to the lower candidate index.
_BY_ENTROPY: typ.Final = operator.attrgetter("entropy", "index")

type Selection = typ.Literal["entropy", "random"]


class EpisodeError(SemnavError):
    """Raised when episodes cannot be generated or read as requested."""


@dataclasses.dataclass(frozen=True, slots=True)
class EpisodeConfig:
    """Episode sampling and goal-view selection parameters."""

    k_pool: int = 10
    k_pick: int = 4
    selection: Selection = "entropy"
    headings: int = world.DEFAULT_HEADINGS
    pitch_levels: int = 3
    min_distance_m: float = 1.5
    max_distance_m: float = 10.0
    ambiguous_threshold: float = 0.9
    max_retries: int = 100

    @property
    def n_candidates(self) -> int:
        """Return the number of candidate views rendered per goal point."""
        return self.headings * self.pitch_levels


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ViewCandidate:
    """One rendered perspective at the goal point."""

    index: int
    pose: world.AgentPose
    embedding: np.ndarray
    layout: np.ndarray
    class_probs: np.ndarray
    entropy: float


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class Episode:
    """A navigation trial towards one object instance.

    ``goal_views`` holds candidate indices; ``optimal_length`` is the
    geodesic distance from the start to the nearest viewpoint of the goal
    instance. ``text_goal`` is the goal instance's descriptor.
    """

    episode_id: str
    scene_id: str
    start: world.AgentPose
    goal_instance: str
    goal_category: str
    goal_cell: world.Cell
    goal_views: tuple[int, ...]
    candidates: tuple[ViewCandidate, ...]
    optimal_length: float
    text_goal: InstanceDescriptor

    def view(self, index: int) -> ViewCandidate:
        """Return the candidate with index *index*."""
        return self.candidates[index]

    @property
    def goal_view_candidates(self) -> tuple[ViewCandidate, ...]:
        """Return the selected goal views."""
        return tuple(self.candidates[index] for index in self.goal_views)


@dataclasses.dataclass(frozen=True, slots=True)
class GoalDistribution:
    """Category histogram of selected goal views."""

    counts: typ.Mapping[str, int]
    threshold: float

    @property
    def total(self) -> int:
        """Return the number of classified goal views."""
        return sum(self.counts.values())

    @property
    def ambiguous_fraction(self) -> float:
        """Return the share of goal views classified as ambiguous."""
        return self.counts.get(AMBIGUOUS, 0) / self.total if self.total else 0.0


def pitch_levels(count: int) -> tuple[int, ...]:
    """Return the first *count* pitch levels in candidate order."""
    if not 1 <= count <= len(PITCH_ORDER):
        message = f"pitch levels must be between 1 and {len(PITCH_ORDER)}, got {count}"
        raise EpisodeError(message)
    return PITCH_ORDER[:count]


def normalized_entropy(probs: typ.Sequence[float] | np.ndarray) -> float:
    """Return ``−Σ p log p / log |C|`` in ``[0, 1]`` with ``0 log 0 = 0``."""
    values = np.asarray(probs, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        message = "probabilities must be a non-empty vector"
        raise EpisodeError(message)
    if (values < 0).any() or abs(float(values.sum()) - 1.0) > PROBABILITY_TOLERANCE:
        message = f"not a probability vector (sum {float(values.sum()):.9f})"
        raise EpisodeError(message)
    if values.size == 1:
        return 0.0
    positive = values[values > 0]
    entropy = -float(np.sum(positive * np.log(positive))) / math.log(values.size)
    return min(1.0, max(0.0, entropy))


def score_views(
    goal_cell: world.Cell,
    scene: world.Scene,
    codebook: Codebook,
    headings: int = world.DEFAULT_HEADINGS,
    n_pitch: int = 3,
    fov: world.FovConfig | None = None,
) -> list[ViewCandidate]:
    """Render and zero-shot score every ``(pitch, yaw)`` view at *goal_cell*."""
    if not scene.is_floor(goal_cell):
        message = f"goal cell {goal_cell} is not a floor cell"
        raise EpisodeError(message)
    candidates: list[ViewCandidate] = []
    for pitch_index, pitch in enumerate(pitch_levels(n_pitch)):
        for yaw in range(headings):
            pose = world.AgentPose.at_cell(goal_cell, yaw, pitch)
            observation = world.render(scene, pose, codebook, fov, headings)
            probs = classify(codebook, observation.semantic)
            candidates.append(
                ViewCandidate(
                    index=pitch_index * headings + yaw,
                    pose=pose,
                    embedding=observation.semantic,
                    layout=observation.layout,
                    class_probs=probs,
                    entropy=normalized_entropy(probs),
                )
            )
    return candidates


def select_goal_views(
    candidates: cabc.Sequence[ViewCandidate],
    k_pool: int,
    k_pick: int,
    rng: np.random.Generator,
) -> list[int]:
    """Sample *k_pick* views from the *k_pool* lowest-entropy candidates.

    The pool is ordered by ``(entropy, index)``; the returned indices are
    sorted ascending.
    """
    if k_pick < 1 or k_pick > k_pool:
        message = f"need 1 <= k_pick <= k_pool, got k_pick={k_pick} k_pool={k_pool}"
        raise EpisodeError(message)
    if len(candidates) < k_pool:
        message = f"{len(candidates)} candidates cannot fill a pool of {k_pool}"
        raise EpisodeError(message)
    pool = sorted(candidates, key=_BY_ENTROPY)
    picked = rng.choice(k_pool, size=k_pick, replace=False)
    return sorted(pool[int(slot)].index for slot in picked)


def _select_random(
    candidates: cabc.Sequence[ViewCandidate], k_pick: int, rng: np.random.Generator
) -> list[int]:
    ordered = sorted(candidate.index for candidate in candidates)
    picked = rng.choice(len(ordered), size=k_pick, replace=False)
    return sorted(ordered[int(slot)] for slot in picked)


def held_out_view(episode: Episode) -> ViewCandidate:
    """Return the view at the first goal view's yaw with a different pitch.

    Views that are not themselves selected goal views are preferred; among
    them the lowest-entropy view wins, ties by index.
    This models an instance image taken with camera parameters unused in
    training. With a single pitch level there is no other tilt to hold out,
    so the lowest-entropy view that is not a goal view is used instead; if
    every view is a goal view, the lowest-entropy view of all.
    """
    reference = episode.view(episode.goal_views[0]).pose
    others = [
        candidate
        for candidate in episode.candidates
        if candidate.pose.yaw == reference.yaw
        and candidate.pose.pitch != reference.pitch
    ]
    if not others:
        _logger.debug(
            "episode %s has a single pitch level; holding out another heading",
            episode.episode_id,
        )
        others = list(episode.candidates)
    unused = [
        candidate for candidate in others if candidate.index not in episode.goal_views
    ]
    return min(unused or others, key=_BY_ENTROPY)


def _validate_config(config: EpisodeConfig) -> None:
    if config.k_pool > config.n_candidates:
        message = (
            f"k_pool={config.k_pool} exceeds the {config.n_candidates} candidate views"
        )
        raise EpisodeError(message)
    if not 0 < config.min_distance_m <= config.max_distance_m:
        message = (
            "distance band must satisfy 0 < min <= max, got "
            f"[{config.min_distance_m}, {config.max_distance_m}]"
        )
        raise EpisodeError(message)
    if config.selection not in ("entropy", "random"):
        message = f"unknown selection mode {config.selection!r}"
        raise EpisodeError(message)


def generate_episode(
    scene: world.Scene,
    codebook: Codebook,
    rng: np.random.Generator,
    config: EpisodeConfig,
    episode_id: str = "episode",
    fov: world.FovConfig | None = None,
) -> Episode:
    """Sample a start, a goal instance and its goal views.

    The goal point is one viewpoint of the goal instance; the start is drawn
    uniformly from floor cells whose distance to the nearest viewpoint lies
    inside the configured band.
    """
    _validate_config(config)
    if not scene.objects:
        message = f"scene {scene.scene_id!r} has no objects"
        raise EpisodeError(message)
    for _ in range(config.max_retries):
        placed = scene.objects[int(rng.integers(len(scene.objects)))]
        viewpoints = scene.viewpoints[placed.instance_id]
        field = world.distance_field(scene, viewpoints)
        metres = np.where(field >= 0, field * world.CELL_SIZE_M, np.inf)
        band = (metres >= config.min_distance_m) & (metres <= config.max_distance_m)
        ys, xs = np.nonzero(band & (field > 0))
        if xs.size == 0:
            continue
        slot = int(rng.integers(xs.size))
        start_cell = (int(xs[slot]), int(ys[slot]))
        goal_cell = viewpoints[int(rng.integers(len(viewpoints)))]
        start = world.AgentPose.at_cell(start_cell, int(rng.integers(config.headings)))
        candidates = score_views(
            goal_cell, scene, codebook, config.headings, config.pitch_levels, fov
        )
        if config.selection == "entropy":
            views = select_goal_views(candidates, config.k_pool, config.k_pick, rng)
        else:
            views = _select_random(candidates, config.k_pick, rng)
        return Episode(
            episode_id=episode_id,
            scene_id=scene.scene_id,
            start=start,
            goal_instance=placed.instance_id,
            goal_category=placed.descriptor.category,
            goal_cell=goal_cell,
            goal_views=tuple(views),
            candidates=tuple(candidates),
            optimal_length=float(metres[start_cell[1], start_cell[0]]),
            text_goal=placed.descriptor,
        )
    message = (
        f"no start/goal pair in {scene.scene_id!r} satisfies the distance band "
        f"[{config.min_distance_m}, {config.max_distance_m}] m after "
        f"{config.max_retries} attempts"
    )
    raise EpisodeError(message)


def generate_episodes(
    scenes: cabc.Sequence[world.Scene],
    codebook: Codebook,
    seed: int,
    config: EpisodeConfig,
    count: int,
    *,
    threads: int = 1,
    fov: world.FovConfig | None = None,
) -> list[Episode]:
    """Generate *count* episodes round-robin over *scenes*.

    Episode ``i`` draws from its own stream ``(seed, "episode", scene_id, i)``
    so the result does not depend on *threads*.
    """
    if not scenes:
        message = "at least one scene is required"
        raise EpisodeError(message)

    def build(index: int) -> Episode:
        scene = scenes[index % len(scenes)]
        rng = seeding.generator(seed, "episode", scene.scene_id, index)
        return generate_episode(
            scene, codebook, rng, config, f"{scene.scene_id}/ep{index:05d}", fov
        )

    if threads <= 1:
        episodes = [build(index) for index in range(count)]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            episodes = list(pool.map(build, range(count)))
    _logger.info("generated %d episodes over %d scenes", len(episodes), len(scenes))
    return episodes


def mean_goal_view_entropy(episodes: cabc.Sequence[Episode]) -> float:
    """Return the mean entropy of every selected goal view."""
    values = [
        view.entropy for episode in episodes for view in episode.goal_view_candidates
    ]
    return float(np.mean(values)) if values else math.nan


def goal_distribution_report(
    episodes: cabc.Sequence[Episode],
    codebook: Codebook,
    threshold: float = 0.9,
) -> GoalDistribution:
    """Classify every selected goal view to its top category or ``ambiguous``."""
    if not episodes:
        message = "goal distribution needs at least one episode"
        raise EpisodeError(message)
    tally: collections.Counter[str] = collections.Counter()
    for episode in episodes:
        for view in episode.goal_view_candidates:
            probs = classify(codebook, view.embedding)
            if normalized_entropy(probs) > threshold:
                tally[AMBIGUOUS] += 1
            else:
                tally[codebook.categories[int(np.argmax(probs))]] += 1
    labels = (*codebook.categories, AMBIGUOUS)
    return GoalDistribution({label: tally[label] for label in labels}, threshold)


def write_goal_distribution_csv(
    path: pathlib.Path, report: GoalDistribution
) -> pathlib.Path:
    """Write ``category,count`` rows."""
    return codec.write_csv(path, ("category", "count"), report.counts.items())


def render_bar_chart(report: GoalDistribution, width: int = 40) -> str:
    """Return a text bar chart of *report*, one line per label."""
    peak = max(report.counts.values(), default=0)
    label_width = max((len(label) for label in report.counts), default=0)
    lines = []
    for label, count in report.counts.items():
        bar = "#" * (round(width * count / peak) if peak else 0)
        share = count / report.total if report.total else 0.0
        lines.append(f"{label:<{label_width}} {bar:<{width}} {count:>6} ({share:6.1%})")
    return "\n".join(lines)


def _pose_to_dict(pose: world.AgentPose) -> dict[str, object]:
    return {
        "x": codec.quantize(pose.x),
        "y": codec.quantize(pose.y),
        "yaw": pose.yaw,
        "pitch": pose.pitch,
    }


def _pose_from_dict(data: typ.Mapping[str, typ.Any]) -> world.AgentPose:
    return world.AgentPose(
        float(data["x"]), float(data["y"]), int(data["yaw"]), int(data["pitch"])
    )


def episode_to_dict(episode: Episode) -> dict[str, object]:
    """Return the JSON record for *episode*."""
    descriptor = episode.text_goal
    return {
        "episode_id": episode.episode_id,
        "scene_id": episode.scene_id,
        "start": _pose_to_dict(episode.start),
        "goal_instance": episode.goal_instance,
        "goal_category": episode.goal_category,
        "goal_cell": list(episode.goal_cell),
        "goal_views": list(episode.goal_views),
        "optimal_length": codec.quantize(episode.optimal_length),
        "text_goal": {
            "category": descriptor.category,
            "attributes": dict(descriptor.attributes),
            "context_tags": list(descriptor.context_tags),
            "description": descriptor.describe(),
        },
        "candidates": [
            {
                "index": candidate.index,
                "pose": _pose_to_dict(candidate.pose),
                "entropy": codec.quantize(candidate.entropy),
                "class_probs": codec.vector_to_list(candidate.class_probs),
                "embedding": codec.vector_to_list(candidate.embedding),
                "layout": codec.vector_to_list(candidate.layout),
            }
            for candidate in episode.candidates
        ],
    }


def episode_from_dict(record: typ.Mapping[str, typ.Any]) -> Episode:
    """Rebuild an episode from its JSON record."""
    text = record["text_goal"]
    return Episode(
        episode_id=str(record["episode_id"]),
        scene_id=str(record["scene_id"]),
        start=_pose_from_dict(record["start"]),
        goal_instance=str(record["goal_instance"]),
        goal_category=str(record["goal_category"]),
        goal_cell=(int(record["goal_cell"][0]), int(record["goal_cell"][1])),
        goal_views=tuple(int(index) for index in record["goal_views"]),
        candidates=tuple(
            ViewCandidate(
                index=int(entry["index"]),
                pose=_pose_from_dict(entry["pose"]),
                embedding=np.asarray(entry["embedding"], dtype=np.float64),
                layout=np.asarray(entry["layout"], dtype=np.float64),
                class_probs=np.asarray(entry["class_probs"], dtype=np.float64),
                entropy=float(entry["entropy"]),
            )
            for entry in record["candidates"]
        ),
        optimal_length=float(record["optimal_length"]),
        text_goal=InstanceDescriptor(
            instance_id=str(record["goal_instance"]),
            category=str(text["category"]),
            attributes={str(k): str(v) for k, v in text["attributes"].items()},
            context_tags=tuple(str(tag) for tag in text["context_tags"]),
        ),
    )


def save_episodes(
    path: pathlib.Path, episodes: cabc.Sequence[Episode], config: EpisodeConfig
) -> pathlib.Path:
    """Write an episodes file."""
    document = {
        "format": EPISODES_FORMAT,
        "headings": config.headings,
        "pitch_levels": config.pitch_levels,
        "selection": config.selection,
        "episodes": [episode_to_dict(episode) for episode in episodes],
    }
    return codec.write_json(path, document)


def load_episodes(path: pathlib.Path) -> list[Episode]:
    """Read an episodes file written by :func:`save_episodes`."""
    document = codec.read_json(path)
    if not isinstance(document, dict) or document.get("format") != EPISODES_FORMAT:
        message = f"{path} is not a semnav episodes file"
        raise EpisodeError(message)
    try:
        return [episode_from_dict(record) for record in document["episodes"]]
    except (KeyError, TypeError, ValueError, IndexError) as error:
        message = f"{path}: malformed episode record ({error})"
        raise EpisodeError(message) from error
