"""
Trial simulation: motion + texture + sensor -> EventStream

Rates are integrated on 1 ms steps. In step k every marker draws
Poisson(rate_k * 1 ms) events; each event gets a uniform timestamp inside the
step and a uniform pixel inside the marker's disk. Random numbers come from a
counter-based Philox generator keyed on (trial seed, marker index), so the
stream is a pure function of the TrialSpec.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..aer.events import EventStream
from .motion import MotionProfile, motion_pose, pose_velocity
from .sensor import (
    SensorModel,
    event_rate_field,
    marker_intensity,
    marker_pixels,
)
from .textures import TextureField, get_texture

STEP_MS = 1.0
US_PER_STEP = 1000

_SEED_MASK = (1 << 64) - 1


class TrialSpec(BaseModel):
    """One simulated trial"""

    model_config = ConfigDict(frozen=True)

    texture_id: int = Field(ge=1, le=10)
    motion: MotionProfile
    seed: int = Field(ge=0)
    sensor: SensorModel = Field(default_factory=SensorModel)


@dataclass(frozen=True)
class RateProfile:
    """Per-step, per-marker expected rates of a trial"""

    rates: np.ndarray  # (steps, markers) events/s
    polarity: np.ndarray  # (steps, markers) 1 = ON, 0 = OFF

    @property
    def expected_counts(self) -> np.ndarray:
        return self.rates * (STEP_MS / 1000.0)

    def expected_total(self) -> float:
        return float(self.expected_counts.sum())


def _steps(motion: MotionProfile) -> int:
    return int(np.ceil(motion.duration_ms / STEP_MS))


def rate_profile(spec: TrialSpec, field: Optional[TextureField] = None) -> RateProfile:
    """Evaluate the sensor rate model at the midpoint of every 1 ms step"""
    field = field or get_texture(spec.texture_id)
    motion, sensor = spec.motion, spec.sensor
    n = _steps(motion)
    t0 = np.arange(n, dtype=np.float64) * STEP_MS
    t1 = np.minimum(t0 + STEP_MS, motion.duration_ms)
    mid = (t0 + t1) / 2

    pose = motion_pose(motion, mid)
    velocity = pose_velocity(motion, t0, t1)

    # time since first contact, for the onset transient
    contact = -np.asarray(motion_pose(motion, t1).z_mm) > 0
    since = np.full(n, np.inf)
    if contact.any():
        first = int(np.argmax(contact))
        since[first:] = mid[first:] - t0[first]

    rates = event_rate_field(field, sensor, pose, velocity, since_contact_ms=since)

    change = marker_intensity(field, sensor, motion_pose(motion, t1)) - marker_intensity(
        field, sensor, motion_pose(motion, t0)
    )
    # ties -> ON
    polarity = (change >= 0).astype(np.uint8)
    return RateProfile(rates=rates, polarity=polarity)


def expected_event_count(spec: TrialSpec, field: Optional[TextureField] = None) -> float:
    """Analytic Poisson expectation of the number of events of a trial"""
    return rate_profile(spec, field).expected_total()


def _marker_generator(seed: int, marker: int) -> np.random.Generator:
    key = np.array([seed & _SEED_MASK, marker], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate_trial(spec: TrialSpec, field: Optional[TextureField] = None) -> EventStream:
    """Generate the event stream of one trial"""
    field = field or get_texture(spec.texture_id)
    sensor = spec.sensor
    duration_us = int(round(spec.motion.duration_ms * 1000))
    profile = rate_profile(spec, field)
    lam = profile.expected_counts
    centres = marker_pixels(sensor)

    ts, xs, ys, ps = [], [], [], []
    for m in range(lam.shape[1]):
        rng = _marker_generator(spec.seed, m)
        counts = rng.poisson(lam[:, m])
        total = int(counts.sum())
        if total == 0:
            continue
        step = np.repeat(np.arange(lam.shape[0], dtype=np.int64), counts)
        t = step * US_PER_STEP + rng.integers(0, US_PER_STEP, size=total)
        radius = sensor.marker_pixel_radius * np.sqrt(rng.random(total))
        angle = 2 * np.pi * rng.random(total)
        x = np.floor(centres[m, 0] + radius * np.cos(angle) + 0.5).astype(np.int64)
        y = np.floor(centres[m, 1] + radius * np.sin(angle) + 0.5).astype(np.int64)
        ts.append(np.minimum(t, duration_us - 1))
        xs.append(np.clip(x, 0, sensor.frame_width - 1))
        ys.append(np.clip(y, 0, sensor.frame_height - 1))
        ps.append(profile.polarity[step, m])

    if not ts:
        return EventStream.empty(sensor.frame_width, sensor.frame_height, duration_us)

    t = np.concatenate(ts)
    order = np.argsort(t, kind="stable")
    return EventStream(
        width=sensor.frame_width,
        height=sensor.frame_height,
        duration_us=duration_us,
        t=t[order],
        x=np.concatenate(xs)[order],
        y=np.concatenate(ys)[order],
        p=np.concatenate(ps)[order],
    )


def describe_trial(spec: TrialSpec) -> Dict[str, object]:
    """Flat record of the sampled trial parameters (dataset index entry)"""
    motion = spec.motion.model_dump(mode="json")
    return {"texture_id": spec.texture_id, "seed": spec.seed, "motion": motion}


