"""
Exploratory-motion kinematics

A MotionProfile describes one trial's trajectory of the sensor over the panel.
Three primitive components exist and compound motions run them concurrently:

    slide   x(t) = start_x + min(slide_speed * t, slide_distance)
    rotate  theta(t) = min(angular_speed * t, rotation_deg)
    tap     pure Tap: z(t) = -min(tap_speed * t, depth)            (slow press)
            in compounds: z oscillates between 0 and -depth at compound_tap_speed

Motions without a tap component hold z = -depth for the whole trial.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import ArgumentError
from .textures import PANEL_EXTENT_MM

ArrayLike = Union[float, np.ndarray]

MAX_DEPTH_MM = 3.0
SENSOR_RADIUS_MM = 10.0


class MotionKind(str, Enum):
    SLIDE = "Slide"
    TAP = "Tap"
    ROTATE = "Rotate"
    TAP_SLIDE = "TapSlide"
    TAP_ROTATE = "TapRotate"
    SLIDE_ROTATE = "SlideRotate"

    @property
    def slides(self) -> bool:
        return self in (MotionKind.SLIDE, MotionKind.TAP_SLIDE, MotionKind.SLIDE_ROTATE)

    @property
    def rotates(self) -> bool:
        return self in (MotionKind.ROTATE, MotionKind.TAP_ROTATE, MotionKind.SLIDE_ROTATE)

    @property
    def taps(self) -> bool:
        return self in (MotionKind.TAP, MotionKind.TAP_SLIDE, MotionKind.TAP_ROTATE)

    @property
    def is_compound(self) -> bool:
        return sum((self.slides, self.rotates, self.taps)) > 1


@dataclass(frozen=True)
class Pose:
    """Sensor pose on the panel; fields are scalars or equally shaped arrays"""

    x_mm: ArrayLike
    y_mm: ArrayLike
    theta_deg: ArrayLike
    z_mm: ArrayLike


class MotionProfile(BaseModel):
    """Kinematic description of one exploratory trial"""

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    kind: MotionKind
    depth_mm: float = Field(default=1.5, ge=0.0, le=MAX_DEPTH_MM)
    slide_speed_mm_s: float = Field(default=30.0, ge=0.0)
    slide_distance_mm: Optional[float] = Field(default=None, ge=0.0)
    angular_speed_deg_s: float = Field(default=30.0, ge=0.0)
    rotation_deg: Optional[float] = Field(default=None, ge=0.0)
    tap_speed_mm_s: float = Field(default=1.5, gt=0.0)
    compound_tap_speed_mm_s: float = Field(default=30.0, gt=0.0)
    duration_ms: float = Field(default=1000.0, gt=0.0)
    start_x_mm: float = 50.0
    start_y_mm: float = 50.0

    @property
    def duration_s(self) -> float:
        return self.duration_ms / 1000.0

    @property
    def travel_mm(self) -> float:
        """Distance slid over the whole trial (0 for motions without a slide)"""
        if not self.kind.slides:
            return 0.0
        free_run = self.slide_speed_mm_s * self.duration_s
        return free_run if self.slide_distance_mm is None else min(free_run, self.slide_distance_mm)

    @model_validator(mode="after")
    def _footprint_stays_on_panel(self) -> "MotionProfile":
        r = SENSOR_RADIUS_MM
        x_lo, x_hi = self.start_x_mm - r, self.start_x_mm + self.travel_mm + r
        y_lo, y_hi = self.start_y_mm - r, self.start_y_mm + r
        if x_lo < 0 or y_lo < 0 or x_hi > PANEL_EXTENT_MM or y_hi > PANEL_EXTENT_MM:
            raise ValueError(
                f"sensor footprint [{x_lo:.2f}, {x_hi:.2f}] x [{y_lo:.2f}, {y_hi:.2f}] mm "
                f"leaves the {PANEL_EXTENT_MM:g} mm panel"
            )
        return self

    def component(self, kind: MotionKind) -> "MotionProfile":
        """Same parameters, different motion kind (used to compare compounds with parts)"""
        return self.model_copy(update={"kind": kind})


def start_bounds(profile: MotionProfile):
    """Allowed (x_lo, x_hi, y_lo, y_hi) range of start positions for the profile"""
    r = SENSOR_RADIUS_MM
    return (r, PANEL_EXTENT_MM - r - profile.travel_mm, r, PANEL_EXTENT_MM - r)


def _triangle(t_s: np.ndarray, depth: float, speed: float) -> np.ndarray:
    """Indentation of a repeated tap: 0 -> depth -> 0 at constant speed"""
    if depth == 0:
        return np.zeros_like(t_s)
    period = 2 * depth / speed
    phase = np.mod(t_s, period) / period
    return depth * (1 - np.abs(1 - 2 * phase))


def motion_pose(profile: MotionProfile, t_ms: ArrayLike) -> Pose:
    """Pose of the sensor at time t (ms since trial start)"""
    t = np.asarray(t_ms, dtype=np.float64)
    if t.size and (np.any(~np.isfinite(t)) or t.min() < 0 or t.max() > profile.duration_ms):
        raise ArgumentError(f"time outside [0, {profile.duration_ms}] ms")
    t_s = t / 1000.0
    kind = profile.kind

    x = np.full(t.shape, profile.start_x_mm)
    if kind.slides:
        x = x + np.minimum(profile.slide_speed_mm_s * t_s, profile.travel_mm)
    y = np.full(t.shape, profile.start_y_mm)

    theta = np.zeros(t.shape)
    if kind.rotates:
        run = profile.angular_speed_deg_s * t_s
        theta = run if profile.rotation_deg is None else np.minimum(run, profile.rotation_deg)

    if kind == MotionKind.TAP:
        z = -np.minimum(profile.tap_speed_mm_s * t_s, profile.depth_mm)
    elif kind.taps:
        z = -_triangle(t_s, profile.depth_mm, profile.compound_tap_speed_mm_s)
    else:
        z = np.full(t.shape, -profile.depth_mm)

    if t.ndim == 0:
        return Pose(float(x), float(y), float(theta), float(z))
    return Pose(x, y, theta, z)


def pose_velocity(profile: MotionProfile, t0_ms: ArrayLike, t1_ms: ArrayLike) -> Pose:
    """Mean velocity over [t0, t1] in mm/s and deg/s (finite difference of poses)"""
    p0 = motion_pose(profile, t0_ms)
    p1 = motion_pose(profile, t1_ms)
    dt_s = (np.asarray(t1_ms, dtype=np.float64) - np.asarray(t0_ms, dtype=np.float64)) / 1000.0
    if np.any(dt_s <= 0):
        raise ArgumentError("velocity interval must have t1 > t0")
    return Pose(
        (np.asarray(p1.x_mm) - p0.x_mm) / dt_s,
        (np.asarray(p1.y_mm) - p0.y_mm) / dt_s,
        (np.asarray(p1.theta_deg) - p0.theta_deg) / dt_s,
        (np.asarray(p1.z_mm) - p0.z_mm) / dt_s,
    )
