"""
Test Suite: Preprocessing Transforms

This test module checks crop, pool, bin and clip against brute-force loops:
- Crop keeps exactly the events inside the window and rebases them
- Pooling conserves events and maps each pixel to exactly one cell
- Binning conserves events (binned + dropped = total)
- Clipping is an exact prefix of the time axis
"""

import numpy as np
import pytest

from spiketex.aer import transforms
from spiketex.aer.events import Event, EventStream, Polarity
from spiketex.aer.transforms import (
    CropSpec,
    PoolGrid,
    PreprocessConfig,
    SpikeTensor,
    bin_events,
    clip,
    clip_steps,
    crop,
    pool,
    pooled_view,
    preprocess,
    tensor_shape,
)
from spiketex.core.errors import ArgumentError

CENTRE_CROP = CropSpec(origin_x=190, origin_y=110, side=260)
GRID = PoolGrid(cells_x=20, cells_y=20, cell_side=13)


def single(x, y, t=0, width=640, height=480, duration_us=1_000_000):
    return EventStream.from_events(width, height, duration_us, [Event(t, x, y, Polarity.ON)])


# =====================
# Crop
# =====================

def test_crop_drops_event_outside_window():
    assert len(crop(single(0, 0), CENTRE_CROP)) == 0


def test_crop_rebases_to_origin():
    out = crop(single(190, 110), CENTRE_CROP)
    assert (out.width, out.height) == (260, 260)
    assert list(out) == [Event(0, 0, 0, Polarity.ON)]


def test_crop_matches_brute_force(rng, make_stream):
    stream = make_stream(rng, 10_000)
    out = crop(stream, CENTRE_CROP)

    expected = [
        (e.t, e.x - 190, e.y - 110)
        for e in stream
        if 190 <= e.x < 450 and 110 <= e.y < 370
    ]
    assert len(out) == len(expected), "❌ Crop kept a different number of events"
    assert [(e.t, e.x, e.y) for e in out] == expected


def test_crop_out_of_bounds():
    with pytest.raises(ArgumentError):
        crop(single(0, 0), CropSpec(origin_x=500, origin_y=0, side=260))


# =====================
# Pool
# =====================

@pytest.mark.parametrize("x,y,cell", [(12, 12, (0, 0)), (13, 25, (1, 1)), (259, 0, (19, 0))])
def test_pool_cell_boundaries(x, y, cell):
    out = pool(single(x, y, width=260, height=260), GRID)
    assert (out.width, out.height) == (20, 20)
    assert (out[0].x, out[0].y) == cell


def test_pool_matches_brute_force(rng, make_stream):
    stream = make_stream(rng, 10_000, width=260, height=260)
    out = pool(stream, GRID)

    expected = np.zeros((20, 20), dtype=np.int64)
    for e in stream:
        expected[e.y // 13, e.x // 13] += 1
    found = np.zeros((20, 20), dtype=np.int64)
    np.add.at(found, (out.y.astype(np.int64), out.x.astype(np.int64)), 1)

    assert len(out) == len(stream)
    np.testing.assert_array_equal(found, expected)
    np.testing.assert_array_equal(out.t, stream.t)


def test_pool_dimension_mismatch(rng, make_stream):
    with pytest.raises(ArgumentError):
        pool(make_stream(rng, 10, width=100, height=100), GRID)


def test_grid_must_tile_crop():
    with pytest.raises(ValueError):
        PreprocessConfig(crop=CropSpec(side=250), grid=GRID)


# =====================
# Bin
# =====================

def test_bin_empty_stream_is_all_zero():
    tensor = bin_events(EventStream.empty(20, 20, 1_000_000))
    assert tensor.counts.shape == (1000, 1, 20, 20)
    assert tensor.total() == 0


def test_bin_boundary_event_lands_in_first_bin():
    tensor = bin_events(single(3, 4, t=999, width=20, height=20), dt_us=1000, t_steps=1000)
    assert tensor.counts[0, 0, 4, 3] == 1
    assert tensor.total() == 1


def test_bin_conserves_events(rng, make_stream):
    stream = make_stream(rng, 10_000, width=20, height=20)
    tensor = bin_events(stream, dt_us=1000, t_steps=1000)
    assert tensor.total() == 10_000
    assert tensor.dropped == 0


def test_bin_drops_events_past_window(rng, make_stream):
    stream = make_stream(rng, 5_000, width=20, height=20)
    tensor = bin_events(stream, dt_us=1000, t_steps=400)
    late = int(np.count_nonzero(stream.t >= 400_000))
    assert tensor.dropped == late
    assert tensor.total() + tensor.dropped == len(stream)


def test_bin_matches_brute_force(rng, make_stream):
    stream = make_stream(rng, 2_000, width=6, height=5, duration_us=20_000)
    tensor = bin_events(stream, dt_us=1000, t_steps=20, merge_polarity=False)

    expected = np.zeros((20, 2, 5, 6), dtype=np.int64)
    for e in stream:
        expected[e.t // 1000, int(e.polarity), e.y, e.x] += 1
    np.testing.assert_array_equal(tensor.counts, expected)


def test_binarize_caps_counts(rng, make_stream):
    stream = make_stream(rng, 3_000, width=4, height=4, duration_us=10_000)
    tensor = bin_events(stream, dt_us=1000, t_steps=10, binarize=True)
    assert tensor.counts.max() == 1


def test_builtin_bin_is_not_shadowed():
    assert "bin" not in vars(transforms)
    assert bin(5) == "0b101"


# =====================
# Clip
# =====================

@pytest.fixture
def random_tensor(rng):
    return SpikeTensor(counts=rng.integers(0, 3, (1000, 1, 20, 20)).astype(np.int32), dt_us=1000)


def test_clip_full_length_is_identity(random_tensor):
    assert clip(random_tensor, 1000) == random_tensor


def test_clip_50ms_keeps_50_steps(random_tensor):
    out = clip(random_tensor, 50)
    assert out.t_steps == 50
    assert out.counts.shape[1:] == random_tensor.counts.shape[1:]


@pytest.mark.parametrize("length_ms", [50, 125, 400, 950])
def test_clip_partitions_total(random_tensor, length_ms):
    head = clip(random_tensor, length_ms)
    tail = int(random_tensor.counts[head.t_steps :].sum())
    assert head.total() + tail == random_tensor.total()
    np.testing.assert_array_equal(head.counts, random_tensor.counts[: head.t_steps])


def test_clip_rounds_partial_bins_up():
    tensor = SpikeTensor(counts=np.zeros((10, 1, 2, 2), dtype=np.int32), dt_us=3000)
    assert clip_steps(tensor, 4) == 2
    assert clip_steps(tensor, 6) == 2
    assert clip(tensor, 0.5).t_steps == 1


@pytest.mark.parametrize("length_ms", [0, -5, 1000.5])
def test_clip_out_of_range(random_tensor, length_ms):
    with pytest.raises(ArgumentError):
        clip(random_tensor, length_ms)


def test_time_downsample_sums_groups():
    counts = np.arange(5, dtype=np.int32).reshape(5, 1, 1, 1)
    out = SpikeTensor(counts=counts).time_downsample(2)
    assert out.counts.ravel().tolist() == [1, 5, 4]
    assert out.dt_us == 2000


# =====================
# Full Chain
# =====================

def test_preprocess_equals_manual_chain(rng, make_stream):
    stream = make_stream(rng, 4_000)
    cfg = PreprocessConfig()
    manual = bin_events(pool(crop(stream, cfg.crop), cfg.grid), cfg.dt_us, cfg.t_steps)

    tensor = preprocess(stream, cfg)
    assert tensor == manual
    assert tensor.counts.shape == tensor_shape(cfg)
    assert len(pooled_view(stream, cfg)) == tensor.total() + tensor.dropped
