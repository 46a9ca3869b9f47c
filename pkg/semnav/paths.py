"""Default locations for semnav run artefacts.

Outputs go to ``$SEMNAV_OUTPUT_DIR`` when it is set; otherwise to
``$XDG_STATE_HOME/semnav/runs`` (``~/.local/state/semnav/runs`` when the
variable is unset or relative, as the XDG base-directory rules require).
"""

from __future__ import annotations

import os
import typing as typ
from pathlib import Path

APP_DIRNAME: typ.Final = "semnav"
RUNS_DIRNAME: typ.Final = "runs"
ENV_OUTPUT_DIR: typ.Final = "SEMNAV_OUTPUT_DIR"

type EnvMapping = typ.Mapping[str, str]


def _environ(env: EnvMapping | None) -> EnvMapping:
    return os.environ if env is None else env


def state_root(env: EnvMapping | None = None) -> Path:
    """Return the semnav state root."""
    source = _environ(env)
    # The XDG specification requires relative base directories to be
    # ignored, falling back to the default location.
    if root := source.get("XDG_STATE_HOME"):
        candidate = Path(root).expanduser()
        if candidate.is_absolute():
            return candidate / APP_DIRNAME
    return Path.home() / ".local" / "state" / APP_DIRNAME


def default_output_dir(env: EnvMapping | None = None) -> Path:
    """Return the directory run artefacts default to."""
    if explicit := _environ(env).get(ENV_OUTPUT_DIR):
        return Path(explicit).expanduser()
    return state_root(env) / RUNS_DIRNAME


def resolve_output(path: Path | None, name: str, env: EnvMapping | None = None) -> Path:
    """Return *path*, or *name* under the default output directory."""
    if path is not None:
        return path
    return default_output_dir(env) / name
