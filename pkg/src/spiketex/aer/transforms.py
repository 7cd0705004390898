"""
Spatial and temporal preprocessing of event streams

The chain turns a raw 640x480 stream into the classifier input:

    crop  -> keep a square window of the frame and rebase addresses to its origin
    pool  -> merge each cell_side x cell_side block of pixels into one address
    bin   -> count events per (time bin, channel, cell) into a SpikeTensor
    clip  -> keep a prefix of the time axis (sample-length analysis)

All operations are pure: inputs are never modified and event order is preserved.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import ArgumentError
from .events import EventStream


# =====================
# Value Types
# =====================

class CropSpec(BaseModel):
    """Square crop window in source-frame pixels"""

    model_config = ConfigDict(frozen=True)

    origin_x: int = Field(default=190, ge=0)
    origin_y: int = Field(default=110, ge=0)
    side: int = Field(default=260, gt=0)


class PoolGrid(BaseModel):
    """Grid of square pooling cells covering the cropped window"""

    model_config = ConfigDict(frozen=True)

    cells_x: int = Field(default=20, gt=0)
    cells_y: int = Field(default=20, gt=0)
    cell_side: int = Field(default=13, gt=0)

    @property
    def width(self) -> int:
        return self.cells_x * self.cell_side

    @property
    def height(self) -> int:
        return self.cells_y * self.cell_side


class PreprocessConfig(BaseModel):
    """Full crop -> pool -> bin chain"""

    model_config = ConfigDict(frozen=True)

    crop: CropSpec = Field(default_factory=CropSpec)
    grid: PoolGrid = Field(default_factory=PoolGrid)
    dt_us: int = Field(default=1000, gt=0)
    t_steps: int = Field(default=1000, gt=0)
    merge_polarity: bool = True
    binarize: bool = False

    @model_validator(mode="after")
    def _grid_covers_crop(self) -> "PreprocessConfig":
        if self.grid.width != self.crop.side or self.grid.height != self.crop.side:
            raise ValueError(
                f"pool grid {self.grid.width}x{self.grid.height} does not tile the "
                f"{self.crop.side}x{self.crop.side} crop"
            )
        return self

    @property
    def channels(self) -> int:
        return 1 if self.merge_polarity else 2


@dataclass(frozen=True, eq=False)
class SpikeTensor:
    """
    Binned spike counts with shape (t_steps, channels, h, w).

    channels is 1 when polarities are merged, otherwise 2 (index 0 = OFF, 1 = ON).
    `dropped` counts events of the source stream that fell at or after
    t_steps * dt_us and therefore do not appear in `counts`.
    """

    counts: np.ndarray
    dt_us: int = 1000
    dropped: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        counts = np.ascontiguousarray(self.counts)
        if counts.ndim != 4:
            raise ArgumentError(f"spike tensor must be 4-D (t, c, h, w), got shape {counts.shape}")
        if counts.shape[1] not in (1, 2):
            raise ArgumentError("spike tensor must have 1 or 2 channels")
        if not np.issubdtype(counts.dtype, np.integer):
            raise ArgumentError("spike counts must be integers")
        if counts.size and int(counts.min()) < 0:
            raise ArgumentError("spike counts must be nonnegative")
        if self.dt_us <= 0:
            raise ArgumentError("dt_us must be positive")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def t_steps(self) -> int:
        return int(self.counts.shape[0])

    @property
    def channels(self) -> int:
        return int(self.counts.shape[1])

    @property
    def h(self) -> int:
        return int(self.counts.shape[2])

    @property
    def w(self) -> int:
        return int(self.counts.shape[3])

    @property
    def duration_ms(self) -> float:
        return self.t_steps * self.dt_us / 1000.0

    def total(self) -> int:
        return int(self.counts.sum(dtype=np.int64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpikeTensor):
            return NotImplemented
        return self.dt_us == other.dt_us and np.array_equal(self.counts, other.counts)

    def time_downsample(self, factor: int) -> "SpikeTensor":
        """Sum groups of `factor` consecutive bins; a ragged tail forms the last group"""
        if factor < 1:
            raise ArgumentError("downsample factor must be >= 1")
        if factor == 1:
            return self
        steps = math.ceil(self.t_steps / factor)
        padded = np.zeros((steps * factor,) + self.counts.shape[1:], dtype=self.counts.dtype)
        padded[: self.t_steps] = self.counts
        grouped = padded.reshape(steps, factor, *self.counts.shape[1:]).sum(axis=1)
        return SpikeTensor(counts=grouped, dt_us=self.dt_us * factor, dropped=self.dropped)


# =====================
# Transforms
# =====================

def crop(stream: EventStream, spec: CropSpec) -> EventStream:
    """Keep events inside the window and rebase them to its origin"""
    if spec.origin_x + spec.side > stream.width or spec.origin_y + spec.side > stream.height:
        raise ArgumentError(
            f"crop {spec.side}px at ({spec.origin_x},{spec.origin_y}) exceeds "
            f"{stream.width}x{stream.height} frame"
        )
    x = stream.x.astype(np.int64)
    y = stream.y.astype(np.int64)
    mask = (
        (x >= spec.origin_x)
        & (x < spec.origin_x + spec.side)
        & (y >= spec.origin_y)
        & (y < spec.origin_y + spec.side)
    )
    return stream.with_events(
        mask=mask,
        x=x[mask] - spec.origin_x,
        y=y[mask] - spec.origin_y,
        width=spec.side,
        height=spec.side,
    )


def pool(stream: EventStream, grid: PoolGrid) -> EventStream:
    """Map every pixel address to its pooling cell; keeps all events"""
    if stream.width != grid.width or stream.height != grid.height:
        raise ArgumentError(
            f"stream is {stream.width}x{stream.height} but grid covers {grid.width}x{grid.height}"
        )
    return stream.with_events(
        x=stream.x // grid.cell_side,
        y=stream.y // grid.cell_side,
        width=grid.cells_x,
        height=grid.cells_y,
    )


def bin_events(
    stream: EventStream,
    dt_us: int = 1000,
    t_steps: int = 1000,
    merge_polarity: bool = True,
    binarize: bool = False,
) -> SpikeTensor:
    """Count events per time bin and cell; events past the window are dropped and counted"""
    if dt_us <= 0 or t_steps <= 0:
        raise ArgumentError("dt_us and t_steps must be positive")
    channels = 1 if merge_polarity else 2
    h, w = stream.height, stream.width

    k = stream.t.astype(np.int64) // dt_us
    keep = k < t_steps
    dropped = int(len(stream) - np.count_nonzero(keep))

    c = np.zeros_like(k) if merge_polarity else stream.p.astype(np.int64)
    flat = ((k[keep] * channels + c[keep]) * h + stream.y[keep].astype(np.int64)) * w + stream.x[
        keep
    ].astype(np.int64)
    counts = np.bincount(flat, minlength=t_steps * channels * h * w).reshape(t_steps, channels, h, w)
    if binarize:
        counts = np.minimum(counts, 1)
    return SpikeTensor(counts=counts.astype(np.int32), dt_us=dt_us, dropped=dropped)


def clip_steps(tensor: SpikeTensor, length_ms: float) -> int:
    """Number of leading bins covering `length_ms` (ceil of length / bin width)"""
    span = Fraction(str(length_ms)) * 1000 / tensor.dt_us
    return math.ceil(span)


def clip(tensor: SpikeTensor, length_ms: float) -> SpikeTensor:
    """Prefix of the time axis covering `length_ms`"""
    if not (0 < length_ms <= tensor.duration_ms):
        raise ArgumentError(
            f"clip length {length_ms} ms outside (0, {tensor.duration_ms}] ms"
        )
    steps = clip_steps(tensor, length_ms)
    return SpikeTensor(counts=tensor.counts[:steps], dt_us=tensor.dt_us)


def preprocess(stream: EventStream, cfg: PreprocessConfig) -> SpikeTensor:
    """crop -> pool -> bin with one configuration"""
    return bin_events(
        pool(crop(stream, cfg.crop), cfg.grid),
        dt_us=cfg.dt_us,
        t_steps=cfg.t_steps,
        merge_polarity=cfg.merge_polarity,
        binarize=cfg.binarize,
    )


def pooled_view(stream: EventStream, cfg: PreprocessConfig) -> EventStream:
    """crop -> pool only; compact form cached by dataset loaders"""
    return pool(crop(stream, cfg.crop), cfg.grid)


def tensor_shape(cfg: PreprocessConfig) -> Tuple[int, int, int, int]:
    return (cfg.t_steps, cfg.channels, cfg.grid.cells_y, cfg.grid.cells_x)
