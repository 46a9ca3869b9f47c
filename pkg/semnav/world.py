"""Procedural multi-room gridworld: scenes, kinematics, rendering, geodesics.

Cells are 0.25 m squares addressed as ``(x, y)`` with ``x`` the column and
``y`` the row (rows grow downwards). Objects stand on wall cells that border
a room, so they block rays and never split the floor. Poses keep continuous
coordinates; ``MOVE_FORWARD`` advances one cell length along the heading.
"""

from __future__ import annotations

import collections
import dataclasses
import enum
import logging
import math
import typing as typ

import numpy as np

from . import codec, seeding
from .errors import SemnavError
from .semspace import InstanceDescriptor, image_embed, load_codebook, save_codebook

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    from .semspace import Codebook, SemanticSpaceConfig

_logger = logging.getLogger(__name__)

CELL_SIZE_M: typ.Final = 0.25
DEFAULT_HEADINGS: typ.Final = 12
PITCH_LEVELS: typ.Final = (-1, 0, 1)
PITCH_STEP_RAD: typ.Final = math.radians(30.0)
SCENE_FORMAT: typ.Final = "semnav-scene/1"
MANIFEST_FORMAT: typ.Final = "semnav-scenes/1"
MANIFEST_FILENAME: typ.Final = "manifest.json"
CODEBOOK_FILENAME: typ.Final = "codebook.json"
FLOOR_CHAR: typ.Final = "."
WALL_CHAR: typ.Final = "#"
_SNAP: typ.Final = 1e-12

type Cell = tuple[int, int]

_NEIGHBOURS: typ.Final = ((1, 0), (-1, 0), (0, 1), (0, -1))


class WorldError(SemnavError):
    """Raised for invalid scenes, poses, or generation requests."""


class Action(enum.IntEnum):
    """The six discrete agent actions."""

    MOVE_FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    LOOK_UP = 3
    LOOK_DOWN = 4
    STOP = 5


N_ACTIONS: typ.Final = len(Action)


@dataclasses.dataclass(frozen=True, slots=True)
class PlacedObject:
    """An instance standing on a cell at an elevation (−1 low, 0 level, +1 high)."""

    descriptor: InstanceDescriptor
    cell: Cell
    elevation: int = 0

    @property
    def instance_id(self) -> str:
        """Return the instance identifier."""
        return self.descriptor.instance_id


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class Scene:
    """An immutable grid map with attributed object instances.

    ``walls`` is a read-only boolean array indexed ``[y, x]``.
    """

    scene_id: str
    walls: np.ndarray
    objects: tuple[PlacedObject, ...]
    viewpoints: typ.Mapping[str, tuple[Cell, ...]]
    _object_cells: dict[Cell, int] = dataclasses.field(
        default_factory=dict, repr=False
    )

    def __post_init__(self) -> None:
        """Index objects by cell and freeze the grid."""
        self.walls.flags.writeable = False
        for index, placed in enumerate(self.objects):
            self._object_cells[placed.cell] = index

    @property
    def width(self) -> int:
        """Return the number of columns."""
        return int(self.walls.shape[1])

    @property
    def height(self) -> int:
        """Return the number of rows."""
        return int(self.walls.shape[0])

    def in_bounds(self, cell: Cell) -> bool:
        """Return whether *cell* lies on the grid."""
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_floor(self, cell: Cell) -> bool:
        """Return whether *cell* is a traversable floor cell."""
        return self.in_bounds(cell) and not bool(self.walls[cell[1], cell[0]])

    def object_slot(self, cell: Cell) -> int | None:
        """Return the index in ``objects`` of the object on *cell*, if any."""
        return self._object_cells.get(cell)

    def object_at(self, cell: Cell) -> PlacedObject | None:
        """Return the object occupying *cell*, if any."""
        index = self._object_cells.get(cell)
        return None if index is None else self.objects[index]

    def find(self, instance_id: str) -> PlacedObject:
        """Return the placed object with *instance_id*."""
        for placed in self.objects:
            if placed.instance_id == instance_id:
                return placed
        message = f"scene {self.scene_id!r} has no instance {instance_id!r}"
        raise WorldError(message)

    def floor_cells(self) -> list[Cell]:
        """Return every floor cell in row-major order."""
        ys, xs = np.nonzero(~self.walls)
        return [(int(x), int(y)) for y, x in zip(ys, xs, strict=True)]

    def category_viewpoints(self, category: str) -> tuple[Cell, ...]:
        """Return the union of viewpoints of every instance of *category*."""
        cells: list[Cell] = []
        for placed in self.objects:
            if placed.descriptor.category == category:
                cells.extend(self.viewpoints[placed.instance_id])
        return tuple(sorted(set(cells)))


@dataclasses.dataclass(frozen=True, slots=True)
class AgentPose:
    """Agent position (continuous cell coordinates), heading and camera tilt."""

    x: float
    y: float
    yaw: int
    pitch: int = 0

    @property
    def cell(self) -> Cell:
        """Return the cell containing the agent."""
        return (math.floor(self.x), math.floor(self.y))

    @classmethod
    def at_cell(cls, cell: Cell, yaw: int = 0, pitch: int = 0) -> AgentPose:
        """Return a pose at the centre of *cell*."""
        return cls(cell[0] + 0.5, cell[1] + 0.5, yaw, pitch)


@dataclasses.dataclass(frozen=True, slots=True)
class FovConfig:
    """Ray-cast camera model."""

    n_rays: int = 16
    hfov_deg: float = 79.0
    max_range: float = 8.0


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class Observation:
    """Per-step sensor reading.

    ``layout`` is the normalized free distance per ray in ``[0, 1]``;
    ``semantic`` is the unit embedding of the visible field of view;
    ``visible`` records the instance weights that produced it.
    """

    layout: np.ndarray
    semantic: np.ndarray
    visible: tuple[tuple[str, float], ...] = ()


@dataclasses.dataclass(frozen=True, slots=True)
class WorldGenConfig:
    """Procedural scene generation parameters.

    ``duplicate_categories`` forces two instances with different attributes
    for each named category, so instance-level goals must be told apart from
    category-level ones.
    """

    rooms: int = 4
    size_range: tuple[int, int] = (16, 24)
    room_size: tuple[int, int] = (4, 7)
    objects_per_room: tuple[int, int] = (1, 2)
    duplicate_categories: tuple[str, ...] = ()
    context_radius_m: float = 2.0
    viewpoint_radius_m: float = 0.5
    max_retries: int = 50


def _unit(angle: float) -> tuple[float, float]:
    dx, dy = math.cos(angle), -math.sin(angle)
    return (0.0 if abs(dx) < _SNAP else dx, 0.0 if abs(dy) < _SNAP else dy)


def heading_vector(yaw: int, headings: int = DEFAULT_HEADINGS) -> tuple[float, float]:
    """Return the unit ``(dx, dy)`` of heading *yaw*; yaw grows counter-clockwise."""
    return _unit(2.0 * math.pi * yaw / headings)


def validate_pose(
    scene: Scene, pose: AgentPose, headings: int = DEFAULT_HEADINGS
) -> None:
    """Raise :class:`WorldError` unless *pose* is a valid pose in *scene*."""
    if not scene.is_floor(pose.cell):
        message = f"pose {pose} is not on a floor cell of {scene.scene_id!r}"
        raise WorldError(message)
    if not 0 <= pose.yaw < headings or pose.pitch not in PITCH_LEVELS:
        message = f"pose {pose} has yaw/pitch out of range"
        raise WorldError(message)


def step(
    scene: Scene,
    pose: AgentPose,
    action: Action | int,
    headings: int = DEFAULT_HEADINGS,
) -> AgentPose:
    """Apply *action* to *pose*.

    Blocked motion is a silent no-op. A diagonal move that would pass
    between two wall cells is blocked as well. ``STOP`` leaves the pose
    unchanged; the caller ends the episode.
    """
    match Action(action):
        case Action.MOVE_FORWARD:
            return _advance(scene, pose, headings)
        case Action.TURN_LEFT:
            return dataclasses.replace(pose, yaw=(pose.yaw + 1) % headings)
        case Action.TURN_RIGHT:
            return dataclasses.replace(pose, yaw=(pose.yaw - 1) % headings)
        case Action.LOOK_UP:
            return dataclasses.replace(
                pose, pitch=min(pose.pitch + 1, PITCH_LEVELS[-1])
            )
        case Action.LOOK_DOWN:
            return dataclasses.replace(
                pose, pitch=max(pose.pitch - 1, PITCH_LEVELS[0])
            )
        case Action.STOP:
            return pose


def _advance(scene: Scene, pose: AgentPose, headings: int) -> AgentPose:
    dx, dy = heading_vector(pose.yaw, headings)
    x, y = pose.x + dx, pose.y + dy
    source = pose.cell
    target = (math.floor(x), math.floor(y))
    if not scene.is_floor(target):
        return pose
    if (
        target[0] != source[0]
        and target[1] != source[1]
        and not scene.is_floor((target[0], source[1]))
        and not scene.is_floor((source[0], target[1]))
    ):
        return pose
    return dataclasses.replace(pose, x=x, y=y)


def displacement(before: AgentPose, after: AgentPose) -> float:
    """Return the distance travelled between two poses, in metres."""
    return math.hypot(after.x - before.x, after.y - before.y) * CELL_SIZE_M


def _cast(
    scene: Scene,
    origin: tuple[float, float],
    direction: tuple[float, float],
    max_range: float,
) -> tuple[float, Cell | None]:
    """Walk cells along a ray (Amanatides–Woo traversal).

    Returns the distance in cells to the first opaque cell (wall, object, or
    the grid edge) and that cell, or ``(max_range, None)`` when nothing is
    hit within range.
    """
    x, y = origin
    dx, dy = direction
    cx, cy = math.floor(x), math.floor(y)
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    t_max_x = ((cx + 1 - x) / dx if dx > 0 else (x - cx) / -dx) if dx else math.inf
    t_max_y = ((cy + 1 - y) / dy if dy > 0 else (y - cy) / -dy) if dy else math.inf
    t_delta_x = abs(1.0 / dx) if dx else math.inf
    t_delta_y = abs(1.0 / dy) if dy else math.inf
    while True:
        if t_max_x < t_max_y:
            cx += step_x
            travelled = t_max_x
            t_max_x += t_delta_x
        else:
            cy += step_y
            travelled = t_max_y
            t_max_y += t_delta_y
        if travelled > max_range:
            return max_range, None
        cell = (cx, cy)
        if not scene.is_floor(cell) or scene.object_at(cell) is not None:
            return travelled, cell


def ray_angles(pose: AgentPose, fov: FovConfig, headings: int) -> np.ndarray:
    """Return ray angles from the left edge of the field of view to the right."""
    centre = 2.0 * math.pi * pose.yaw / headings
    half = math.radians(fov.hfov_deg) / 2.0
    if fov.n_rays == 1:
        return np.array([centre])
    return centre + np.linspace(half, -half, fov.n_rays)


def render(
    scene: Scene,
    pose: AgentPose,
    codebook: Codebook,
    fov: FovConfig | None = None,
    headings: int = DEFAULT_HEADINGS,
) -> Observation:
    """Ray-cast the field of view into layout features and a semantic embedding.

    Every ray that stops on an object adds ``1 / (1 + distance_m)`` to that
    object's weight, halved when the camera pitch differs from the object's
    elevation; nearer and larger-looking objects therefore dominate.
    """
    fov = fov or FovConfig()
    layout = np.empty(fov.n_rays)
    weights: dict[int, float] = {}
    origin = (pose.x, pose.y)
    for index, angle in enumerate(ray_angles(pose, fov, headings)):
        direction = _unit(angle)
        travelled, cell = _cast(scene, origin, direction, fov.max_range)
        layout[index] = min(travelled, fov.max_range) / fov.max_range
        if cell is None or (slot := scene.object_slot(cell)) is None:
            continue
        weight = 1.0 / (1.0 + travelled * CELL_SIZE_M)
        if pose.pitch != scene.objects[slot].elevation:
            weight *= 0.5
        weights[slot] = weights.get(slot, 0.0) + weight
    visible = [
        (scene.objects[slot].descriptor, weights[slot]) for slot in sorted(weights)
    ]
    return Observation(
        layout=layout,
        semantic=image_embed(codebook, visible),
        visible=tuple((d.instance_id, w) for d, w in visible),
    )


def _require_floor(scene: Scene, cell: Cell) -> None:
    if not scene.is_floor(cell):
        message = f"cell {cell} is not a floor cell of {scene.scene_id!r}"
        raise WorldError(message)


def distance_field(scene: Scene, sources: cabc.Iterable[Cell]) -> np.ndarray:
    """Return 4-connected BFS step counts from the nearest source (−1 unreachable)."""
    field = np.full((scene.height, scene.width), -1, dtype=np.int64)
    queue: collections.deque[Cell] = collections.deque()
    for cell in sources:
        _require_floor(scene, cell)
        if field[cell[1], cell[0]] < 0:
            field[cell[1], cell[0]] = 0
            queue.append(cell)
    while queue:
        x, y = queue.popleft()
        base = field[y, x]
        for ox, oy in _NEIGHBOURS:
            nxt = (x + ox, y + oy)
            if scene.is_floor(nxt) and field[nxt[1], nxt[0]] < 0:
                field[nxt[1], nxt[0]] = base + 1
                queue.append(nxt)
    return field


def field_distance(field: np.ndarray, cell: Cell) -> float:
    """Return the metric distance a :func:`distance_field` assigns to *cell*."""
    steps = int(field[cell[1], cell[0]])
    return math.inf if steps < 0 else steps * CELL_SIZE_M


def geodesic_distance(scene: Scene, a: Cell, b: Cell) -> float:
    """Return the shortest 4-connected path length from *a* to *b*, in metres."""
    _require_floor(scene, a)
    _require_floor(scene, b)
    return field_distance(distance_field(scene, [b]), a)


def shortest_path(scene: Scene, start: Cell, goals: cabc.Iterable[Cell]) -> list[Cell]:
    """Return a shortest 4-connected cell path from *start* to the nearest goal.

    Ties between equally short moves resolve in the fixed neighbour order
    (east, west, south, north). Returns ``[]`` when no goal is reachable.
    """
    field = distance_field(scene, goals)
    _require_floor(scene, start)
    if field[start[1], start[0]] < 0:
        return []
    path = [start]
    x, y = start
    while field[y, x] > 0:
        for ox, oy in _NEIGHBOURS:
            nxt = (x + ox, y + oy)
            if scene.is_floor(nxt) and field[nxt[1], nxt[0]] == field[y, x] - 1:
                x, y = nxt
                break
        path.append((x, y))
    return path


def _line_of_sight(scene: Scene, cell: Cell, target: Cell) -> bool:
    dx, dy = target[0] - cell[0], target[1] - cell[1]
    if dx == 0 and dy == 0:
        return True
    origin = (cell[0] + 0.5, cell[1] + 0.5)
    _, hit = _cast(scene, origin, _unit(math.atan2(-dy, dx)), math.hypot(dx, dy) + 1.0)
    return hit == target


def compute_viewpoints(
    walls: np.ndarray,
    objects: cabc.Sequence[PlacedObject],
    radius_m: float,
) -> dict[str, tuple[Cell, ...]]:
    """Return, per instance, the floor cells in range and in sight of it."""
    scratch = Scene("scratch", walls.copy(), tuple(objects), {})
    radius = radius_m / CELL_SIZE_M
    reach = math.ceil(radius)
    viewpoints: dict[str, tuple[Cell, ...]] = {}
    for placed in objects:
        ox, oy = placed.cell
        cells: list[Cell] = []
        for y in range(oy - reach, oy + reach + 1):
            for x in range(ox - reach, ox + reach + 1):
                cell = (x, y)
                if cell == placed.cell or not scratch.is_floor(cell):
                    continue
                if scratch.object_at(cell) is not None:
                    continue
                if math.hypot(x - ox, y - oy) > radius:
                    continue
                if _line_of_sight(scratch, cell, placed.cell):
                    cells.append(cell)
        viewpoints[placed.instance_id] = tuple(cells)
    return viewpoints


def is_connected(walls: np.ndarray) -> bool:
    """Return whether all floor cells form one 4-connected component."""
    scratch = Scene("scratch", walls.copy(), (), {})
    floor = scratch.floor_cells()
    if not floor:
        return False
    field = distance_field(scratch, [floor[0]])
    return bool((field[~walls] >= 0).all())


def validate_scene(scene: Scene) -> None:
    """Raise :class:`WorldError` if *scene* breaks a scene invariant."""
    if not is_connected(scene.walls):
        message = f"scene {scene.scene_id!r}: floor is not one connected component"
        raise WorldError(message)
    seen: set[str] = set()
    for placed in scene.objects:
        if placed.instance_id in seen:
            message = (
                f"scene {scene.scene_id!r}: duplicate instance {placed.instance_id!r}"
            )
            raise WorldError(message)
        seen.add(placed.instance_id)
        x, y = placed.cell
        if not scene.in_bounds(placed.cell):
            message = f"object {placed.instance_id!r} lies outside the grid"
            raise WorldError(message)
        beside_floor = any(scene.is_floor((x + ox, y + oy)) for ox, oy in _NEIGHBOURS)
        if not (scene.is_floor(placed.cell) or beside_floor):
            message = f"object {placed.instance_id!r} is not on or beside the floor"
            raise WorldError(message)
        if not scene.viewpoints.get(placed.instance_id):
            message = f"object {placed.instance_id!r} has no viewpoint"
            raise WorldError(message)


def scene_from_rows(
    rows: cabc.Sequence[str],
    objects: cabc.Sequence[PlacedObject] = (),
    *,
    scene_id: str = "manual",
    viewpoint_radius_m: float = 0.5,
    validate: bool = True,
) -> Scene:
    """Build a scene from ``'.'``/``'#'`` row strings."""
    if not rows or any(len(row) != len(rows[0]) for row in rows):
        message = "scene rows must be non-empty and of equal length"
        raise WorldError(message)
    walls = np.array([[char == WALL_CHAR for char in row] for row in rows], dtype=bool)
    viewpoints = compute_viewpoints(walls, objects, viewpoint_radius_m)
    scene = Scene(scene_id, walls, tuple(objects), viewpoints)
    if validate:
        validate_scene(scene)
    return scene


@dataclasses.dataclass(frozen=True, slots=True)
class _Room:
    x: int
    y: int
    w: int
    h: int

    def overlaps(self, other: _Room) -> bool:
        return not (
            self.x + self.w + 1 <= other.x
            or other.x + other.w + 1 <= self.x
            or self.y + self.h + 1 <= other.y
            or other.y + other.h + 1 <= self.y
        )

    @property
    def centre(self) -> Cell:
        return (self.x + self.w // 2, self.y + self.h // 2)

    def border(self) -> list[Cell]:
        cells = [(x, self.y - 1) for x in range(self.x, self.x + self.w)]
        cells += [(x, self.y + self.h) for x in range(self.x, self.x + self.w)]
        cells += [(self.x - 1, y) for y in range(self.y, self.y + self.h)]
        cells += [(self.x + self.w, y) for y in range(self.y, self.y + self.h)]
        return cells


def _validate_gen_config(config: WorldGenConfig, space: SemanticSpaceConfig) -> None:
    if config.rooms < 1:
        message = f"at least one room is required, got {config.rooms}"
        raise WorldError(message)
    low, high = config.size_range
    if low < 8 or high < low:  # noqa: PLR2004 - smallest useful grid
        message = (
            f"size range must be at least 8x8 and ordered, got {config.size_range}"
        )
        raise WorldError(message)
    room_low, room_high = config.room_size
    if room_low < 2 or room_high < room_low:  # noqa: PLR2004
        message = f"invalid room size range {config.room_size}"
        raise WorldError(message)
    fewest, most = config.objects_per_room
    if fewest < 0 or most < fewest:
        message = f"invalid objects-per-room range {config.objects_per_room}"
        raise WorldError(message)
    unknown = [
        name for name in config.duplicate_categories if name not in space.categories
    ]
    if unknown:
        message = f"duplicate_categories names unknown categories: {', '.join(unknown)}"
        raise WorldError(message)


def _place_rooms(
    rng: np.random.Generator, config: WorldGenConfig, width: int, height: int
) -> list[_Room] | None:
    rooms: list[_Room] = []
    for _ in range(config.rooms * config.max_retries):
        if len(rooms) == config.rooms:
            break
        w = int(rng.integers(config.room_size[0], config.room_size[1] + 1))
        h = int(rng.integers(config.room_size[0], config.room_size[1] + 1))
        if w + 2 > width or h + 2 > height:
            continue
        candidate = _Room(
            int(rng.integers(1, width - w)), int(rng.integers(1, height - h)), w, h
        )
        if not any(candidate.overlaps(room) for room in rooms):
            rooms.append(candidate)
    return rooms if len(rooms) == config.rooms else None


def _carve(walls: np.ndarray, rooms: list[_Room], rng: np.random.Generator) -> None:
    for room in rooms:
        walls[room.y : room.y + room.h, room.x : room.x + room.w] = False
    for previous, current in zip(rooms, rooms[1:], strict=False):
        (ax, ay), (bx, by) = previous.centre, current.centre
        if rng.random() < 0.5:  # noqa: PLR2004 - coin flip for the corridor bend
            walls[ay, min(ax, bx) : max(ax, bx) + 1] = False
            walls[min(ay, by) : max(ay, by) + 1, bx] = False
        else:
            walls[min(ay, by) : max(ay, by) + 1, ax] = False
            walls[by, min(ax, bx) : max(ax, bx) + 1] = False


def _random_attributes(
    rng: np.random.Generator, space: SemanticSpaceConfig
) -> dict[str, str]:
    return {
        facet: str(vocabulary[int(rng.integers(len(vocabulary)))])
        for facet, vocabulary in space.attribute_vocab.items()
    }


def _object_plan(
    rng: np.random.Generator,
    config: WorldGenConfig,
    space: SemanticSpaceConfig,
    rooms: list[_Room],
) -> list[tuple[int, str, dict[str, str]]]:
    """Return ``(room index, category, attributes)`` for every object to place."""
    plan: list[tuple[int, str, dict[str, str]]] = []
    for index in range(len(rooms)):
        fewest, most = config.objects_per_room
        count = int(rng.integers(fewest, most + 1))
        for _ in range(count):
            category = space.categories[int(rng.integers(len(space.categories)))]
            plan.append((index, category, _random_attributes(rng, space)))
    for category in config.duplicate_categories:
        first = _random_attributes(rng, space)
        second = _random_attributes(rng, space)
        for _ in range(config.max_retries):
            if second != first:
                break
            second = _random_attributes(rng, space)
        if second == first:
            message = f"cannot draw two distinct attribute sets for {category!r}"
            raise WorldError(message)
        plan.append((int(rng.integers(len(rooms))), category, first))
        plan.append((int(rng.integers(len(rooms))), category, second))
    return plan


def _context_tags(
    placed: list[tuple[Cell, str]], index: int, radius_m: float, order: tuple[str, ...]
) -> tuple[str, ...]:
    (ox, oy), own = placed[index]
    radius = radius_m / CELL_SIZE_M
    nearby = {
        category
        for slot, ((x, y), category) in enumerate(placed)
        if slot != index and category != own and math.hypot(x - ox, y - oy) <= radius
    }
    return tuple(name for name in order if name in nearby)


def _try_generate(
    rng: np.random.Generator,
    config: WorldGenConfig,
    space: SemanticSpaceConfig,
    scene_id: str,
) -> Scene | None:
    width = int(rng.integers(config.size_range[0], config.size_range[1] + 1))
    height = int(rng.integers(config.size_range[0], config.size_range[1] + 1))
    rooms = _place_rooms(rng, config, width, height)
    if rooms is None:
        return None
    walls = np.ones((height, width), dtype=bool)
    _carve(walls, rooms, rng)
    plan = _object_plan(rng, config, space, rooms)
    taken: set[Cell] = set()
    cells: list[Cell] = []
    for room_index, _category, _attributes in plan:
        free = [
            cell
            for cell in rooms[room_index].border()
            if walls[cell[1], cell[0]] and cell not in taken
        ]
        if not free:
            return None
        cell = free[int(rng.integers(len(free)))]
        taken.add(cell)
        cells.append(cell)
    tagged = [
        (cell, category)
        for cell, (_, category, _) in zip(cells, plan, strict=True)
    ]
    objects = tuple(
        PlacedObject(
            InstanceDescriptor(
                instance_id=f"{scene_id}/obj{index:02d}",
                category=category,
                attributes=attributes,
                context_tags=_context_tags(
                    tagged, index, config.context_radius_m, space.categories
                ),
            ),
            cell,
        )
        for index, (cell, (_, category, attributes)) in enumerate(
            zip(cells, plan, strict=True)
        )
    )
    viewpoints = compute_viewpoints(walls, objects, config.viewpoint_radius_m)
    scene = Scene(scene_id, walls, objects, viewpoints)
    try:
        validate_scene(scene)
    except WorldError as error:
        _logger.debug("rejected candidate scene %s: %s", scene_id, error)
        return None
    return scene


def generate_scene(
    seed: int,
    config: WorldGenConfig,
    space: SemanticSpaceConfig,
    scene_id: str | None = None,
) -> Scene:
    """Generate a connected multi-room scene with attributed objects.

    Rooms are non-overlapping rectangles joined in placement order by
    L-shaped corridors; objects stand on room border walls. Candidate layouts
    that break an invariant are redrawn up to ``max_retries`` times.
    """
    _validate_gen_config(config, space)
    identifier = scene_id or f"scene-{seed}"
    rng = seeding.generator(seed, "scene-layout")
    for attempt in range(config.max_retries):
        if (scene := _try_generate(rng, config, space, identifier)) is not None:
            _logger.debug("generated %s on attempt %d", identifier, attempt + 1)
            return scene
    message = (
        f"cannot generate scene {identifier!r} after {config.max_retries} attempts; "
        "reduce rooms or objects for the grid size"
    )
    raise WorldError(message)


def render_ascii(scene: Scene, pose: AgentPose | None = None) -> str:
    """Return a text picture of *scene*.

    Walls draw as ``#`` and floor as ``.``. Objects show their initial and the
    agent is ``@``.
    """
    grid = [
        [WALL_CHAR if scene.walls[y, x] else FLOOR_CHAR for x in range(scene.width)]
        for y in range(scene.height)
    ]
    for placed in scene.objects:
        grid[placed.cell[1]][placed.cell[0]] = placed.descriptor.category[0].upper()
    if pose is not None:
        grid[pose.cell[1]][pose.cell[0]] = "@"
    return "\n".join("".join(row) for row in grid)


def scene_to_dict(scene: Scene) -> dict[str, object]:
    """Return the JSON document for *scene*."""
    return {
        "format": SCENE_FORMAT,
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "cells": [
            "".join(WALL_CHAR if wall else FLOOR_CHAR for wall in row)
            for row in scene.walls
        ],
        "objects": [
            {
                "instance_id": placed.instance_id,
                "category": placed.descriptor.category,
                "attributes": dict(placed.descriptor.attributes),
                "context_tags": list(placed.descriptor.context_tags),
                "cell": list(placed.cell),
                "elevation": placed.elevation,
            }
            for placed in scene.objects
        ],
        "viewpoints": {
            instance_id: [list(cell) for cell in cells]
            for instance_id, cells in scene.viewpoints.items()
        },
    }


def scene_from_dict(document: typ.Mapping[str, typ.Any]) -> Scene:
    """Rebuild a scene from its JSON document."""
    if document.get("format") != SCENE_FORMAT:
        message = "not a semnav scene document"
        raise WorldError(message)
    rows: list[str] = list(document["cells"])
    walls = np.array([[char == WALL_CHAR for char in row] for row in rows], dtype=bool)
    if walls.shape != (int(document["height"]), int(document["width"])):
        message = f"scene {document.get('scene_id')!r}: cells do not match width/height"
        raise WorldError(message)
    objects = tuple(
        PlacedObject(
            InstanceDescriptor(
                instance_id=str(entry["instance_id"]),
                category=str(entry["category"]),
                attributes={str(k): str(v) for k, v in entry["attributes"].items()},
                context_tags=tuple(str(tag) for tag in entry["context_tags"]),
            ),
            (int(entry["cell"][0]), int(entry["cell"][1])),
            int(entry.get("elevation", 0)),
        )
        for entry in document["objects"]
    )
    viewpoints = {
        str(instance_id): tuple((int(c[0]), int(c[1])) for c in cells)
        for instance_id, cells in document["viewpoints"].items()
    }
    return Scene(str(document["scene_id"]), walls, objects, viewpoints)


def save_scene(scene: Scene, path: pathlib.Path) -> pathlib.Path:
    """Write *scene* as JSON."""
    return codec.write_json(path, scene_to_dict(scene))


def load_scene(path: pathlib.Path) -> Scene:
    """Read a scene JSON file."""
    document = codec.read_json(path)
    try:
        return scene_from_dict(document)
    except (KeyError, TypeError, ValueError) as error:
        message = f"{path}: malformed scene document ({error})"
        raise WorldError(message) from error


def generate_scenes(
    seed: int, count: int, config: WorldGenConfig, space: SemanticSpaceConfig
) -> list[Scene]:
    """Generate *count* scenes ``scene-000``, ``scene-001``, … from *seed*."""
    return [
        generate_scene(
            seeding.derive_seed(seed, "scene", index),
            config,
            space,
            f"scene-{index:03d}",
        )
        for index in range(count)
    ]


def save_scene_set(
    out_dir: pathlib.Path,
    scenes: cabc.Sequence[Scene],
    codebook: Codebook,
    seed: int,
) -> pathlib.Path:
    """Write every scene, the codebook and ``manifest.json`` into *out_dir*."""
    files = [
        save_scene(scene, out_dir / f"{scene.scene_id}.json").name for scene in scenes
    ]
    save_codebook(codebook, out_dir / CODEBOOK_FILENAME)
    manifest = {
        "format": MANIFEST_FORMAT,
        "seed": seed,
        "codebook": CODEBOOK_FILENAME,
        "scenes": files,
    }
    return codec.write_json(out_dir / MANIFEST_FILENAME, manifest)


def load_scene_set(path: pathlib.Path) -> tuple[dict[str, Scene], Codebook]:
    """Read a scene set from its directory or its ``manifest.json``."""
    manifest_path = path / MANIFEST_FILENAME if path.is_dir() else path
    document = codec.read_json(manifest_path)
    if not isinstance(document, dict) or document.get("format") != MANIFEST_FORMAT:
        message = f"{manifest_path} is not a semnav scene manifest"
        raise WorldError(message)
    root = manifest_path.parent
    codebook = load_codebook(root / str(document["codebook"]))
    scenes: dict[str, Scene] = {}
    for name in document["scenes"]:
        scene = load_scene(root / str(name))
        scenes[scene.scene_id] = scene
    _logger.debug("loaded %d scenes from %s", len(scenes), manifest_path)
    return scenes, codebook
