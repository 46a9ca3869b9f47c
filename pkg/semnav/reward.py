"""Perspective-relaxed navigation reward.

Per step the agent earns

* a reach bonus while inside the goal region (``d < dist_threshold``),
* a view-match bonus while also facing the goal view's heading,
* the reduction in distance to the nearest goal viewpoint,
* inside the goal region, the reduction in heading error,
* minus a constant delay penalty.

Relaxed mode ignores camera pitch entirely. Strict mode is the ablation
baseline and changes one term only: its view-match bonus requires the full
view error, pitch included, to be under the angle threshold. The dense angle
term uses the yaw error in both modes, so the two modes differ by at most
one view-match bonus and strict never pays more than relaxed.
"""

from __future__ import annotations

import dataclasses
import math
import typing as typ

from . import world
from .errors import ConfigError

type RewardMode = typ.Literal["relaxed", "strict"]
type SuccessGate = typ.Literal["every_step", "stop"]


@dataclasses.dataclass(frozen=True, slots=True)
class RewardConfig:
    """Reward weights and thresholds.

    ``success_reward_on`` chooses whether the reach and view-match bonuses
    accrue on every step inside the goal region or only on the ``STOP``
    step. ``success_radius`` is the evaluation radius used by
    :func:`success_test` and is independent of ``dist_threshold``.
    """

    success_reward: float = 5.0
    dist_threshold: float = 1.0
    angle_threshold: float = math.radians(25.0)
    delay_penalty: float = 0.01
    mode: RewardMode = "relaxed"
    success_reward_on: SuccessGate = "every_step"
    success_radius: float = 0.25

    def __post_init__(self) -> None:
        """Reject out-of-range weights and thresholds."""
        if self.success_reward <= 0:
            raise ConfigError("reward.success_reward", "must be positive")
        if self.dist_threshold <= 0:
            raise ConfigError("reward.dist_threshold", "must be positive")
        if not 0 < self.angle_threshold <= math.pi:
            raise ConfigError("reward.angle_threshold", "must lie in (0, pi]")
        if self.delay_penalty < 0:
            raise ConfigError("reward.delay_penalty", "must be non-negative")
        if self.success_radius <= 0:
            raise ConfigError("reward.success_radius", "must be positive")
        if self.mode not in ("relaxed", "strict"):
            raise ConfigError("reward.mode", f"unknown mode {self.mode!r}")
        if self.success_reward_on not in ("every_step", "stop"):
            raise ConfigError(
                "reward.success_reward_on", f"unknown gate {self.success_reward_on!r}"
            )


@dataclasses.dataclass(frozen=True, slots=True)
class StepSnapshot:
    """Distance to the goal region and view errors at one timestep."""

    d: float
    yaw_err: float
    pitch_err: float = 0.0


@dataclasses.dataclass(frozen=True, slots=True)
class RewardTerms:
    """Breakdown of one step's reward."""

    reach: float
    view_match: float
    distance: float
    angle: float
    delay: float

    @property
    def total(self) -> float:
        """Return the step reward."""
        return self.reach + self.view_match + self.distance + self.angle - self.delay

    def as_dict(self) -> dict[str, float]:
        """Return the terms and their total for trajectory logs."""
        return {
            "reach": self.reach,
            "view_match": self.view_match,
            "distance": self.distance,
            "angle": self.angle,
            "delay": self.delay,
            "total": self.total,
        }


def yaw_error(yaw: int, goal_yaw: int, headings: int = world.DEFAULT_HEADINGS) -> float:
    """Return the absolute heading difference in radians, in ``[0, π]``."""
    steps = (yaw - goal_yaw) % headings
    return 2.0 * math.pi * min(steps, headings - steps) / headings


def pitch_error(pitch: int, goal_pitch: int) -> float:
    """Return the absolute camera tilt difference in radians."""
    return abs(pitch - goal_pitch) * world.PITCH_STEP_RAD


def view_error(yaw_err: float, pitch_err: float) -> float:
    """Return the angle between two view directions offset by yaw and pitch."""
    cosine = math.cos(yaw_err) * math.cos(pitch_err)
    return math.acos(min(1.0, max(-1.0, cosine)))


def snapshot(
    distance: float,
    pose: world.AgentPose,
    goal_pose: world.AgentPose,
    headings: int = world.DEFAULT_HEADINGS,
) -> StepSnapshot:
    """Return the snapshot of *pose* against the goal view at *goal_pose*."""
    return StepSnapshot(
        d=distance,
        yaw_err=yaw_error(pose.yaw, goal_pose.yaw, headings),
        pitch_err=pitch_error(pose.pitch, goal_pose.pitch),
    )


def reward_terms(
    prev: StepSnapshot,
    cur: StepSnapshot,
    cfg: RewardConfig,
    *,
    stopped: bool = False,
) -> RewardTerms:
    """Return the reward breakdown for the step ``prev → cur``."""
    inside = cur.d < cfg.dist_threshold
    granted = inside and (cfg.success_reward_on == "every_step" or stopped)
    if cfg.mode == "relaxed":
        facing = cur.yaw_err < cfg.angle_threshold
    else:
        facing = view_error(cur.yaw_err, cur.pitch_err) < cfg.angle_threshold
    return RewardTerms(
        reach=cfg.success_reward if granted else 0.0,
        view_match=cfg.success_reward if granted and facing else 0.0,
        distance=prev.d - cur.d,
        angle=prev.yaw_err - cur.yaw_err if inside else 0.0,
        delay=cfg.delay_penalty,
    )


def step_reward(
    prev: StepSnapshot,
    cur: StepSnapshot,
    cfg: RewardConfig,
    *,
    stopped: bool = False,
) -> float:
    """Return the scalar reward for the step ``prev → cur``."""
    return reward_terms(prev, cur, cfg, stopped=stopped).total


def success_test(cur: StepSnapshot, cfg: RewardConfig, *, stopped: bool) -> bool:
    """Return whether the episode succeeds: ``STOP`` within the success radius."""
    return stopped and cur.d <= cfg.success_radius
