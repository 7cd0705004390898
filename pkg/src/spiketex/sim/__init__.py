"""Procedural textures, exploratory motions and the event-generating sensor model."""

from .dataset import (
    DatasetIndex,
    DatasetManifest,
    IndexEntry,
    SamplingRanges,
    TrialSet,
    build_dataset,
    load_index,
    load_manifest,
    resolve_manifest,
)
from .motion import MotionKind, MotionProfile, Pose, motion_pose
from .sensor import SensorModel, event_rate_field, marker_layout
from .textures import TextureField, get_texture, load_textures, texture_height
from .trial import TrialSpec, expected_event_count, simulate_trial

__all__ = [
    "DatasetIndex",
    "DatasetManifest",
    "IndexEntry",
    "MotionKind",
    "MotionProfile",
    "Pose",
    "SamplingRanges",
    "SensorModel",
    "TextureField",
    "TrialSet",
    "TrialSpec",
    "build_dataset",
    "event_rate_field",
    "expected_event_count",
    "get_texture",
    "load_index",
    "load_manifest",
    "load_textures",
    "marker_layout",
    "motion_pose",
    "resolve_manifest",
    "simulate_trial",
    "texture_height",
]
