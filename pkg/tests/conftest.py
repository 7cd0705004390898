"""
Shared fixtures: tiny networks, random event streams and a small simulated dataset
"""

from pathlib import Path

import numpy as np
import pytest

from spiketex.aer.events import EventStream
from spiketex.sim.dataset import DatasetManifest, build_dataset
from spiketex.sim.motion import MotionKind, MotionProfile
from spiketex.snn.network import LayerSpec, NetworkSpec, PoolKind, init_params

# =====================
# Constants
# =====================

FRAME_WIDTH = 640
FRAME_HEIGHT = 480
ONE_SECOND_US = 1_000_000

TINY_INPUT = (1, 4, 4)


# =====================
# Event Streams
# =====================

@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_stream():
    """Factory for sorted uniform-random streams over a frame"""

    def _make(rng, n, width=FRAME_WIDTH, height=FRAME_HEIGHT, duration_us=ONE_SECOND_US):
        t = np.sort(rng.integers(0, duration_us, n))
        return EventStream(
            width=width,
            height=height,
            duration_us=duration_us,
            t=t,
            x=rng.integers(0, width, n),
            y=rng.integers(0, height, n),
            p=rng.integers(0, 2, n),
        )

    return _make


# =====================
# Networks
# =====================

@pytest.fixture
def tiny_spec():
    """Conv(2) -> IF -> SumPool 2 -> Linear(10) on a 1x4x4 input"""
    return NetworkSpec(
        layers=(
            LayerSpec.conv(2),
            LayerSpec.spiking(),
            LayerSpec.pooling(2, PoolKind.SUM),
            LayerSpec.linear(10),
        ),
        input_shape=TINY_INPUT,
    )


@pytest.fixture
def tiny_params(tiny_spec):
    return init_params(tiny_spec, seed=7)


@pytest.fixture
def pooled_spec():
    """Small network on the full 20x20 pooled input, used with simulated datasets"""
    return NetworkSpec(
        layers=(
            LayerSpec.conv(2),
            LayerSpec.spiking(),
            LayerSpec.pooling(4),
            LayerSpec.linear(10),
        ),
        input_shape=(1, 20, 20),
    )


# =====================
# Datasets
# =====================

def tiny_manifest(**overrides) -> DatasetManifest:
    fields = dict(
        name="tiny-slide",
        motion=MotionProfile(kind=MotionKind.SLIDE, duration_ms=100.0, slide_distance_mm=30.0),
        textures=(1, 2),
        trials_per_texture=5,
        random_start=True,
        seed=3,
        test_fraction=0.4,
    )
    fields.update(overrides)
    return DatasetManifest(**fields)


@pytest.fixture
def small_manifest():
    return tiny_manifest()


@pytest.fixture(scope="session")
def built_dataset(tmp_path_factory) -> Path:
    """10-trial sliding dataset built once per session"""
    out = tmp_path_factory.mktemp("tiny-slide")
    build_dataset(tiny_manifest(), out, jobs=1)
    return out
