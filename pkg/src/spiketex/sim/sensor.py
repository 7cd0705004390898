"""
Fast-adapting marker sensor model

The emulated sensor has 91 markers on a hexagonal grid inside a 20 mm aperture.
A marker produces events only while the texture under it changes: its rate is

    rate = A(depth) * boost * ( gain * |grad h(p) . v_tangential| + onset_gain * |v_normal| )

where p is the marker's position on the panel, v_tangential its velocity
relative to the panel (translation, rotation and the radial spread of the
membrane while indentation changes), A the contact-area factor
1 - exp(-depth / depth_scale) and boost an optional contact-onset transient
1 + onset_burst * exp(-t_since_contact / adaptation_tau). Without motion every
term vanishes, so a static contact is silent.
"""

from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .motion import Pose
from .textures import TextureField

HEX_RINGS = 5  # 1 + 6 + 12 + 18 + 24 + 30 = 91 markers


class SensorModel(BaseModel):
    """Geometry and transduction constants of the emulated sensor"""

    model_config = ConfigDict(frozen=True)

    marker_count: int = Field(default=91, ge=1)
    marker_pitch_mm: float = Field(default=1.8, gt=0)
    aperture_mm: float = Field(default=20.0, gt=0)
    frame_width: int = Field(default=640, gt=0)
    frame_height: int = Field(default=480, gt=0)
    center_px: Tuple[float, float] = (320.0, 240.0)
    px_per_mm: float = Field(default=13.0, gt=0)
    marker_pixel_radius: float = Field(default=6.0, gt=0)
    gain: float = Field(default=20.0, gt=0, description="events per mm of height swept")
    onset_gain: float = Field(default=40.0, gt=0, description="events per mm of indentation")
    adaptation_tau_ms: float = Field(default=20.0, gt=0)
    onset_burst: float = Field(default=1.0, ge=0)
    depth_scale_mm: float = Field(default=1.5, gt=0)
    spread_coeff: float = Field(default=0.3, ge=0, description="rim displacement per mm of indentation")

    @model_validator(mode="after")
    def _markers_inside_aperture(self) -> "SensorModel":
        offsets = _hex_offsets(self.marker_count, self.marker_pitch_mm)
        if np.hypot(offsets[:, 0], offsets[:, 1]).max() > self.aperture_mm / 2:
            raise ValueError("markers extend beyond the sensor aperture")
        return self

    @property
    def radius_mm(self) -> float:
        return self.aperture_mm / 2


@lru_cache(maxsize=16)
def _hex_offsets(count: int, pitch: float) -> np.ndarray:
    """Centered hexagonal lattice points, innermost first, truncated to `count`"""
    points = [(0.0, 0.0)]
    directions = [(np.cos(np.pi / 3 * k), np.sin(np.pi / 3 * k)) for k in range(6)]
    ring = 1
    while len(points) < count:
        # walk the hexagonal ring of radius `ring`
        x, y = ring * directions[4][0], ring * directions[4][1]
        for side in range(6):
            dx, dy = directions[side]
            for _ in range(ring):
                points.append((x, y))
                x, y = x + dx, y + dy
        ring += 1
    offsets = np.asarray(points[:count], dtype=np.float64) * pitch
    offsets.flags.writeable = False
    return offsets


def marker_layout(sensor: SensorModel) -> np.ndarray:
    """(marker_count, 2) marker offsets in mm in the sensor frame"""
    return _hex_offsets(sensor.marker_count, sensor.marker_pitch_mm)


def marker_pixels(sensor: SensorModel) -> np.ndarray:
    """(marker_count, 2) marker centres in frame pixels (x right, y down)"""
    offsets = marker_layout(sensor)
    cx, cy = sensor.center_px
    return np.column_stack((cx + sensor.px_per_mm * offsets[:, 0], cy - sensor.px_per_mm * offsets[:, 1]))


def contact_area_factor(depth_mm, sensor: SensorModel):
    """Monotone contact-area factor: 0 at depth 0, strictly increasing"""
    depth = np.maximum(np.asarray(depth_mm, dtype=np.float64), 0.0)
    return -np.expm1(-depth / sensor.depth_scale_mm)


def _rotation(theta_deg):
    theta = np.radians(theta_deg)
    return np.cos(theta), np.sin(theta)


def marker_positions(sensor: SensorModel, pose: Pose) -> Tuple[np.ndarray, np.ndarray]:
    """
    Panel coordinates of every marker, shaped pose_shape + (marker_count,).

    The sub-millimetre membrane spread is kept out of the sampling position so
    that a marker reads the same texture point at every depth.
    """
    offsets = marker_layout(sensor)
    c, s = _rotation(np.asarray(pose.theta_deg, dtype=np.float64)[..., None])
    u = np.asarray(pose.x_mm, dtype=np.float64)[..., None] + c * offsets[:, 0] - s * offsets[:, 1]
    v = np.asarray(pose.y_mm, dtype=np.float64)[..., None] + s * offsets[:, 0] + c * offsets[:, 1]
    return u, v


def marker_velocities(sensor: SensorModel, pose: Pose, velocity: Pose) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tangential velocity (mm/s) of every marker relative to the panel.

    Translation + rotation about the sensor axis + radial spread of the membrane
    at spread_coeff * d(depth)/dt * r / R while the indentation changes.
    """
    offsets = marker_layout(sensor)
    c, s = _rotation(np.asarray(pose.theta_deg, dtype=np.float64)[..., None])
    rx = c * offsets[:, 0] - s * offsets[:, 1]
    ry = s * offsets[:, 0] + c * offsets[:, 1]

    omega = np.radians(np.asarray(velocity.theta_deg, dtype=np.float64))[..., None]
    # d(depth)/dt = -dz/dt
    spread_rate = (
        sensor.spread_coeff * (-np.asarray(velocity.z_mm, dtype=np.float64))[..., None] / sensor.radius_mm
    )

    vu = np.asarray(velocity.x_mm, dtype=np.float64)[..., None] - omega * ry + spread_rate * rx
    vv = np.asarray(velocity.y_mm, dtype=np.float64)[..., None] + omega * rx + spread_rate * ry
    return vu, vv


def event_rate_field(
    field: TextureField,
    sensor: SensorModel,
    pose: Pose,
    velocity: Pose,
    since_contact_ms: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Per-marker event rate (events/s) for a pose and its velocity.

    Shapes follow the pose: scalar poses give (marker_count,), poses with
    shape S give S + (marker_count,).
    """
    depth = np.maximum(-np.asarray(pose.z_mm, dtype=np.float64), 0.0)
    in_contact = depth > 0
    area = contact_area_factor(depth, sensor)[..., None]

    u, v = marker_positions(sensor, pose)
    gu, gv = field.gradient(u, v)
    vu, vv = marker_velocities(sensor, pose, velocity)
    sweep = np.abs(gu * vu + gv * vv)
    normal = np.abs(np.asarray(velocity.z_mm, dtype=np.float64))[..., None]

    rate = area * (sensor.gain * sweep + sensor.onset_gain * normal)
    if since_contact_ms is not None and sensor.onset_burst > 0:
        elapsed = np.maximum(np.asarray(since_contact_ms, dtype=np.float64), 0.0)[..., None]
        rate = rate * (1.0 + sensor.onset_burst * np.exp(-elapsed / sensor.adaptation_tau_ms))
    return np.where(in_contact[..., None], rate, 0.0)


def marker_intensity(field: TextureField, sensor: SensorModel, pose: Pose) -> np.ndarray:
    """Brightness proxy used for polarity: texture height under the marker plus indentation"""
    u, v = marker_positions(sensor, pose)
    depth = np.maximum(-np.asarray(pose.z_mm, dtype=np.float64), 0.0)[..., None]
    return field.height(u, v) + depth
