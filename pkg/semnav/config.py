"""YAML run configuration: one frozen section per subsystem.

A run file has the top-level keys ``seed``, ``semspace``, ``world``,
``episodes``, ``reward``, ``agent``, ``ppo`` and ``eval``. Every key is
optional and defaults to the documented value; unknown keys are rejected
with their dotted path. ``agent.embed_dim`` and ``agent.n_rays`` follow
``semspace.dim`` and ``world.n_rays``, and ``agent.seed`` follows the run
seed; naming them is allowed only when they agree.
"""

from __future__ import annotations

import collections.abc as cabc
import dataclasses
import importlib.resources
import io
import typing as typ

from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from . import world
from .agent import AgentConfig
from .episodes import EpisodeConfig
from .errors import ConfigError, OperationalError, SemnavError
from .infer.evaluate import EvalConfig
from .infer.goals import GOAL_MODES
from .reward import RewardConfig
from .semspace import SemanticSpaceConfig
from .train.ppo import PPOConfig

if typ.TYPE_CHECKING:
    import pathlib

    from _typeshed import DataclassInstance

    from .agent import Variant
    from .episodes import Selection

PACKAGED_CONFIGS: typ.Final = ("default", "easy")
# Tuple fields whose length is part of their meaning.
_PAIR_FIELDS: typ.Final = frozenset(
    {"size_range", "room_size", "objects_per_room", "adam_betas"}
)

_yaml = YAML(typ="safe")
_yaml.default_flow_style = False
_yaml.indent(mapping=2, sequence=4, offset=2)
_yaml.sort_base_mapping_type_on_output = False


@dataclasses.dataclass(frozen=True, slots=True)
class WorldSettings:
    """Scene generation and field-of-view settings plus the scene count."""

    scene_count: int = 8
    rooms: int = 4
    size_range: tuple[int, int] = (16, 24)
    room_size: tuple[int, int] = (4, 7)
    objects_per_room: tuple[int, int] = (1, 2)
    duplicate_categories: tuple[str, ...] = ()
    context_radius_m: float = 2.0
    viewpoint_radius_m: float = 0.5
    max_retries: int = 50
    n_rays: int = 16
    hfov_deg: float = 79.0
    max_range: float = 8.0

    def __post_init__(self) -> None:
        """Reject counts and optics that cannot work."""
        if self.scene_count < 0:
            raise ConfigError("world.scene_count", "must be non-negative")
        if self.n_rays < 1:
            raise ConfigError("world.n_rays", "must be at least 1")
        if not 0 < self.hfov_deg < 360:  # noqa: PLR2004 - full circle
            raise ConfigError("world.hfov_deg", "must lie in (0, 360)")
        if self.max_range <= 0:
            raise ConfigError("world.max_range", "must be positive")

    def generation(self) -> world.WorldGenConfig:
        """Return the scene-generator settings."""
        return world.WorldGenConfig(
            rooms=self.rooms,
            size_range=self.size_range,
            room_size=self.room_size,
            objects_per_room=self.objects_per_room,
            duplicate_categories=self.duplicate_categories,
            context_radius_m=self.context_radius_m,
            viewpoint_radius_m=self.viewpoint_radius_m,
            max_retries=self.max_retries,
        )

    def fov(self) -> world.FovConfig:
        """Return the renderer settings."""
        return world.FovConfig(
            n_rays=self.n_rays, hfov_deg=self.hfov_deg, max_range=self.max_range
        )


@dataclasses.dataclass(frozen=True, slots=True)
class EpisodeSettings:
    """Episode generation settings plus the number of training episodes."""

    count: int = 1000
    k_pool: int = 10
    k_pick: int = 4
    selection: Selection = "entropy"
    headings: int = world.DEFAULT_HEADINGS
    pitch_levels: int = 3
    min_distance_m: float = 1.5
    max_distance_m: float = 10.0
    ambiguous_threshold: float = 0.9
    max_retries: int = 100

    def generation(self) -> EpisodeConfig:
        """Return the episode-generator settings."""
        return EpisodeConfig(
            k_pool=self.k_pool,
            k_pick=self.k_pick,
            selection=self.selection,
            headings=self.headings,
            pitch_levels=self.pitch_levels,
            min_distance_m=self.min_distance_m,
            max_distance_m=self.max_distance_m,
            ambiguous_threshold=self.ambiguous_threshold,
            max_retries=self.max_retries,
        )


@dataclasses.dataclass(frozen=True, slots=True)
class RunConfig:
    """A resolved run configuration."""

    seed: int = 0
    semspace: SemanticSpaceConfig = dataclasses.field(
        default_factory=SemanticSpaceConfig
    )
    world: WorldSettings = dataclasses.field(default_factory=WorldSettings)
    episodes: EpisodeSettings = dataclasses.field(default_factory=EpisodeSettings)
    reward: RewardConfig = dataclasses.field(default_factory=RewardConfig)
    agent: AgentConfig = dataclasses.field(default_factory=AgentConfig)
    ppo: PPOConfig = dataclasses.field(default_factory=PPOConfig)
    evaluation: EvalConfig = dataclasses.field(default_factory=EvalConfig)

    @property
    def headings(self) -> int:
        """Return the yaw discretization shared by episodes and environments."""
        return self.episodes.headings

    def with_variant(self, variant: str) -> RunConfig:
        """Return a copy whose agent uses *variant*."""
        try:
            agent = dataclasses.replace(
                self.agent, variant=typ.cast("Variant", variant.lower())
            )
        except SemnavError as error:
            raise ConfigError("agent.variant", str(error)) from error
        return dataclasses.replace(self, agent=agent)

    def with_seed(self, seed: int) -> RunConfig:
        """Return a copy with a new run and agent seed; the codebook seed is kept."""
        return dataclasses.replace(
            self,
            seed=seed,
            agent=dataclasses.replace(self.agent, seed=seed),
        )


# YAML section name -> RunConfig attribute.
SECTIONS: typ.Final = {
    "semspace": "semspace",
    "world": "world",
    "episodes": "episodes",
    "reward": "reward",
    "agent": "agent",
    "ppo": "ppo",
    "eval": "evaluation",
}


def _coerce_scalar(key: str, value: object, default: object) -> object:
    match default:
        case bool():
            if not isinstance(value, bool):
                raise ConfigError(key, f"expected true or false, got {value!r}")
            return value
        case int():
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(key, f"expected an integer, got {value!r}")
            return value
        case float():
            if isinstance(value, bool) or not isinstance(value, int | float):
                raise ConfigError(key, f"expected a number, got {value!r}")
            return float(value)
        case str():
            if not isinstance(value, str):
                raise ConfigError(key, f"expected a string, got {value!r}")
            return value
        case _:
            return value


def _coerce(key: str, value: object, default: object) -> object:
    """Coerce a decoded YAML value to the type of the field's default."""
    if isinstance(default, tuple):
        if not isinstance(value, list | tuple):
            raise ConfigError(key, f"expected a sequence, got {value!r}")
        items = typ.cast("cabc.Sequence[object]", value)
        field_name = key.rsplit(".", 1)[-1]
        if field_name in _PAIR_FIELDS and len(items) != len(default):
            raise ConfigError(key, f"expected {len(default)} values, got {len(items)}")
        template: object = default[0] if default else ""
        return tuple(
            _coerce_scalar(f"{key}[{index}]", item, template)
            for index, item in enumerate(items)
        )
    if isinstance(default, cabc.Mapping):
        if not isinstance(value, dict):
            raise ConfigError(key, f"expected a mapping, got {value!r}")
        mapping = typ.cast("dict[object, object]", value)
        return {
            str(facet): _coerce(f"{key}.{facet}", names, ("",))
            for facet, names in mapping.items()
        }
    return _coerce_scalar(key, value, default)


def _section[T: DataclassInstance](
    cls: type[T],
    data: object,
    path: str,
    derived: typ.Mapping[str, object] | None = None,
) -> T:
    """Build section *cls* from *data*, filling gaps from defaults and *derived*."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    raw = typ.cast("dict[str, object]", data)
    defaults = cls()
    names = [
        field.name
        for field in dataclasses.fields(cls)
        if not field.name.startswith("_")
    ]
    if unknown := sorted(set(map(str, raw)) - set(names)):
        raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
    values = {
        name: _coerce(f"{path}.{name}", raw[name], getattr(defaults, name))
        for name in raw
    }
    for name, expected in (derived or {}).items():
        if name in values and values[name] != expected:
            raise ConfigError(
                f"{path}.{name}",
                f"must match the derived value {expected!r}, got {values[name]!r}",
            )
        values[name] = expected
    try:
        return cls(**values)
    except ConfigError:
        raise
    except SemnavError as error:
        raise ConfigError(path, str(error)) from error
    except (TypeError, ValueError) as error:
        raise ConfigError(path, str(error)) from error


def validate_run_config(config: RunConfig) -> RunConfig:
    """Check the constraints that span sections; return *config*."""
    if config.agent.embed_dim != config.semspace.dim:
        raise ConfigError("agent.embed_dim", "must equal semspace.dim")
    if config.agent.n_rays != config.world.n_rays:
        raise ConfigError("agent.n_rays", "must equal world.n_rays")
    if config.agent.spm_dim >= 2 * config.semspace.dim:
        raise ConfigError(
            "agent.spm_dim",
            f"must be below 2 * semspace.dim ({2 * config.semspace.dim})",
        )
    episodes = config.episodes
    candidates = episodes.headings * episodes.pitch_levels
    if not 1 <= episodes.k_pick <= episodes.k_pool:
        raise ConfigError("episodes.k_pick", "must lie in [1, k_pool]")
    if episodes.k_pool > candidates:
        raise ConfigError(
            "episodes.k_pool", f"must not exceed headings * pitch_levels ({candidates})"
        )
    if episodes.headings < 4:  # noqa: PLR2004 - one turn per cardinal direction
        raise ConfigError("episodes.headings", "must be at least 4")
    if episodes.pitch_levels not in (1, 3):
        raise ConfigError("episodes.pitch_levels", "must be 1 or 3")
    if episodes.selection not in ("entropy", "random"):
        raise ConfigError("episodes.selection", "must be entropy or random")
    if not 0 < episodes.min_distance_m <= episodes.max_distance_m:
        raise ConfigError("episodes.min_distance_m", "must lie in (0, max_distance_m]")
    if episodes.count < 0:
        raise ConfigError("episodes.count", "must be non-negative")
    evaluation = config.evaluation
    if not 0 < evaluation.support_lambda <= 1:
        raise ConfigError("eval.support_lambda", "must lie in (0, 1]")
    if evaluation.goal_mode not in GOAL_MODES:
        raise ConfigError("eval.goal_mode", f"must be one of {', '.join(GOAL_MODES)}")
    if evaluation.retrieval not in ("weighted", "nearest"):
        raise ConfigError("eval.retrieval", "must be weighted or nearest")
    if evaluation.support_source not in ("train", "eval"):
        raise ConfigError("eval.support_source", "must be train or eval")
    if evaluation.act_mode not in ("greedy", "sample"):
        raise ConfigError("eval.act_mode", "must be greedy or sample")
    if evaluation.max_steps < 1 or evaluation.episodes < 0:
        raise ConfigError(
            "eval", "max_steps must be positive and episodes non-negative"
        )
    unknown = [
        name
        for name in config.world.duplicate_categories
        if name not in config.semspace.categories
    ]
    if unknown:
        raise ConfigError("world.duplicate_categories", f"unknown categories {unknown}")
    return config


def run_config_from_mapping(data: object) -> RunConfig:
    """Resolve a decoded YAML document into a validated :class:`RunConfig`."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    document = typ.cast("dict[str, object]", data)
    if unknown := sorted(set(map(str, document)) - {"seed", *SECTIONS}):
        raise ConfigError(unknown[0], "unknown key")
    seed = typ.cast("int", _coerce("seed", document.get("seed", 0), 0))
    semspace_data = dict(typ.cast("dict[str, object]", document.get("semspace") or {}))
    semspace_data.setdefault("seed", seed)
    semspace = _section(SemanticSpaceConfig, semspace_data, "semspace")
    world_settings = _section(WorldSettings, document.get("world"), "world")
    agent = _section(
        AgentConfig,
        document.get("agent"),
        "agent",
        {"embed_dim": semspace.dim, "n_rays": world_settings.n_rays, "seed": seed},
    )
    config = RunConfig(
        seed=seed,
        semspace=semspace,
        world=world_settings,
        episodes=_section(EpisodeSettings, document.get("episodes"), "episodes"),
        reward=_section(RewardConfig, document.get("reward"), "reward"),
        agent=agent,
        ppo=_section(PPOConfig, document.get("ppo"), "ppo"),
        evaluation=_section(EvalConfig, document.get("eval"), "eval"),
    )
    return validate_run_config(config)


def _plain(value: object) -> object:
    """Return *value* with tuples as lists and mappings as dicts."""
    match value:
        case tuple() | list():
            return [_plain(item) for item in typ.cast("cabc.Sequence[object]", value)]
        case cabc.Mapping():
            mapping = typ.cast("cabc.Mapping[object, object]", value)
            return {str(key): _plain(item) for key, item in mapping.items()}
        case _:
            return value


def _section_dict(section: DataclassInstance) -> dict[str, object]:
    return {
        field.name: _plain(getattr(section, field.name))
        for field in dataclasses.fields(section)
        if not field.name.startswith("_")
    }


def run_config_to_dict(config: RunConfig) -> dict[str, object]:
    """Return the YAML mapping that reloads to *config*."""
    document: dict[str, object] = {"seed": config.seed}
    for section, attribute in SECTIONS.items():
        document[section] = _section_dict(getattr(config, attribute))
    return document


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse YAML *text* into a validated configuration."""
    try:
        data = _yaml.load(text)
    except YAMLError as error:
        message = f"cannot parse run configuration {source}: {error}"
        raise OperationalError(
            message, operation="read-config", resource=source
        ) from error
    return run_config_from_mapping(data)


def load_run_config(path: pathlib.Path) -> RunConfig:
    """Read and validate the YAML run configuration at *path*."""
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as error:
        message = f"cannot read run configuration {path}: {error}"
        raise OperationalError(
            message, operation="read-config", resource=path
        ) from error
    return parse_run_config(text, str(path))


def dumps_run_config(config: RunConfig) -> str:
    """Return *config* as YAML text."""
    stream = io.StringIO()
    _yaml.dump(run_config_to_dict(config), stream)
    return stream.getvalue()


def dump_run_config(config: RunConfig, path: pathlib.Path) -> pathlib.Path:
    """Write *config* as YAML to *path* and return the path."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps_run_config(config), encoding="utf-8")
    except OSError as error:
        message = f"cannot write run configuration {path}: {error}"
        raise OperationalError(
            message, operation="write-config", resource=path
        ) from error
    return path


def packaged_config(name: str) -> RunConfig:
    """Load one of the configurations shipped in ``semnav/configs``."""
    if name not in PACKAGED_CONFIGS:
        raise ConfigError(
            "<config>",
            f"unknown packaged config {name!r}; expected one of {PACKAGED_CONFIGS}",
        )
    resource = importlib.resources.files("semnav") / "configs" / f"{name}.yaml"
    return parse_run_config(
        resource.read_text(encoding="utf-8"), f"semnav/configs/{name}.yaml"
    )


def resolve_run_config(path: pathlib.Path | None) -> RunConfig:
    """Return the configuration at *path*, or the packaged default."""
    return packaged_config("default") if path is None else load_run_config(path)
