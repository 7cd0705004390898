"""Address-event data model, file formats and preprocessing transforms."""

from .events import Event, EventStream, Polarity
from .io import (
    read_events,
    read_events_csv,
    read_spike_tensor,
    write_events,
    write_events_csv,
    write_spike_tensor,
)
from .transforms import (
    CropSpec,
    PoolGrid,
    PreprocessConfig,
    SpikeTensor,
    bin_events,
    clip,
    crop,
    pool,
    preprocess,
)

__all__ = [
    "Event",
    "EventStream",
    "Polarity",
    "CropSpec",
    "PoolGrid",
    "PreprocessConfig",
    "SpikeTensor",
    "bin_events",
    "clip",
    "crop",
    "pool",
    "preprocess",
    "read_events",
    "read_events_csv",
    "read_spike_tensor",
    "write_events",
    "write_events_csv",
    "write_spike_tensor",
]
