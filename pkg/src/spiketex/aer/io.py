"""
Event and spike-tensor file formats

Binary event file (little-endian):
    header  = b"AERT" + width u16 + height u16 + duration_us u32 + event_count u32   (16 bytes)
    records = event_count x (t u32 + x u16 + y u16 + polarity u8)                    (9 bytes each)

Spike tensor file (little-endian):
    header  = b"SPKT" (one channel) or b"SPK2" (OFF/ON channels)
              + t_steps u32 + h u16 + w u16 + dt_us u32                             (16 bytes)
    body    = t_steps * channels * h * w counts as u16, ordered (t, channel, y, x)

A CSV debug format with header `t_us,x,y,p` is also supported for events.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from ..core.errors import ArgumentError, EventFormatError, TruncationError
from ..utils.logging import get_logger
from .events import EventStream
from .transforms import SpikeTensor

logger = get_logger(__name__)

PathLike = Union[str, Path]

EVENT_MAGIC = b"AERT"
TENSOR_MAGIC = b"SPKT"
TENSOR2_MAGIC = b"SPK2"

EVENT_HEADER = struct.Struct("<4sHHII")
TENSOR_HEADER = struct.Struct("<4sIHHI")

EVENT_RECORD = np.dtype(
    [("t", "<u4"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")], align=False
)
assert EVENT_RECORD.itemsize == 9

CSV_COLUMNS = ["t_us", "x", "y", "p"]


# =====================
# Event Files
# =====================

def encode_events(stream: EventStream) -> bytes:
    """Serialize a stream to the binary event format"""
    header = EVENT_HEADER.pack(
        EVENT_MAGIC, stream.width, stream.height, stream.duration_us, len(stream)
    )
    records = np.empty(len(stream), dtype=EVENT_RECORD)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    return header + records.tobytes()


def decode_events(payload: bytes, source: str = "<bytes>") -> EventStream:
    """Parse the binary event format; restores time order if needed"""
    if len(payload) < EVENT_HEADER.size:
        raise EventFormatError(f"{source}: file shorter than the {EVENT_HEADER.size}-byte header")
    magic, width, height, duration_us, count = EVENT_HEADER.unpack_from(payload, 0)
    if magic != EVENT_MAGIC:
        raise EventFormatError(f"{source}: bad magic {magic!r}, expected {EVENT_MAGIC!r}")

    body = memoryview(payload)[EVENT_HEADER.size:]
    expected = count * EVENT_RECORD.itemsize
    if len(body) < expected:
        complete = len(body) // EVENT_RECORD.itemsize
        raise TruncationError(
            f"{source}: header announces {count} events but only {complete} complete records present",
            offset=EVENT_HEADER.size + complete * EVENT_RECORD.itemsize,
        )
    if len(body) > expected:
        raise EventFormatError(f"{source}: {len(body) - expected} trailing bytes after last record")

    records = np.frombuffer(body, dtype=EVENT_RECORD, count=count)
    try:
        stream = EventStream.from_arrays(
            width, height, duration_us,
            records["t"], records["x"], records["y"], records["p"],
            sort=True,
        )
    except ArgumentError as e:
        raise EventFormatError(f"{source}: {e}") from e
    if stream.resorted:
        logger.warning(f"{source}: events were not time-ordered; re-sorted (stable)")
    return stream


def write_events(stream: EventStream, path: PathLike) -> None:
    """Write a stream to the binary event format"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_events(stream))
    except OSError as e:
        raise type(e)(f"Failed to write event file {path}: {e}") from e


def read_events(path: PathLike) -> EventStream:
    """Read a binary event file"""
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise type(e)(f"Failed to read event file {path}: {e}") from e
    return decode_events(payload, source=str(path))


# =====================
# CSV Debug Format
# =====================

def write_events_csv(stream: EventStream, path: PathLike) -> None:
    frame = pd.DataFrame(
        {"t_us": stream.t, "x": stream.x, "y": stream.y, "p": stream.p}, columns=CSV_COLUMNS
    )
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as e:
        raise type(e)(f"Failed to write CSV {path}: {e}") from e


def read_events_csv(path: PathLike, width: int, height: int, duration_us: int) -> EventStream:
    """Read the CSV debug format; the frame geometry is not stored in the file"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype="int64")
    except OSError as e:
        raise type(e)(f"Failed to read CSV {path}: {e}") from e
    except ValueError as e:
        raise EventFormatError(f"{path}: non-integer field in CSV: {e}") from e
    if list(frame.columns) != CSV_COLUMNS:
        raise EventFormatError(f"{path}: expected header {','.join(CSV_COLUMNS)}")
    if (frame < 0).any().any():
        raise EventFormatError(f"{path}: negative field in CSV")
    try:
        stream = EventStream.from_arrays(
            width, height, duration_us,
            frame["t_us"].to_numpy(), frame["x"].to_numpy(),
            frame["y"].to_numpy(), frame["p"].to_numpy(),
            sort=True,
        )
    except ArgumentError as e:
        raise EventFormatError(f"{path}: {e}") from e
    if stream.resorted:
        logger.warning(f"{path}: events were not time-ordered; re-sorted (stable)")
    return stream


# =====================
# Spike Tensor Files
# =====================

def encode_spike_tensor(tensor: SpikeTensor) -> bytes:
    counts = tensor.counts
    if counts.size and int(counts.max()) > np.iinfo(np.uint16).max:
        raise EventFormatError("spike count exceeds the u16 range of the tensor format")
    magic = TENSOR_MAGIC if tensor.channels == 1 else TENSOR2_MAGIC
    header = TENSOR_HEADER.pack(magic, tensor.t_steps, tensor.h, tensor.w, tensor.dt_us)
    return header + counts.astype("<u2").tobytes(order="C")


def decode_spike_tensor(payload: bytes, source: str = "<bytes>") -> SpikeTensor:
    if len(payload) < TENSOR_HEADER.size:
        raise EventFormatError(f"{source}: file shorter than the {TENSOR_HEADER.size}-byte header")
    magic, t_steps, h, w, dt_us = TENSOR_HEADER.unpack_from(payload, 0)
    if magic not in (TENSOR_MAGIC, TENSOR2_MAGIC):
        raise EventFormatError(f"{source}: bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    channels = 1 if magic == TENSOR_MAGIC else 2
    n = t_steps * channels * h * w
    body = memoryview(payload)[TENSOR_HEADER.size:]
    if len(body) < 2 * n:
        raise TruncationError(
            f"{source}: tensor body holds {len(body) // 2} of {n} counts",
            offset=TENSOR_HEADER.size + (len(body) // 2) * 2,
        )
    if len(body) > 2 * n:
        raise EventFormatError(f"{source}: {len(body) - 2 * n} trailing bytes after tensor body")
    counts = np.frombuffer(body, dtype="<u2", count=n).reshape(t_steps, channels, h, w)
    return SpikeTensor(counts=counts.astype(np.int32), dt_us=dt_us)


def write_spike_tensor(tensor: SpikeTensor, path: PathLike) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_spike_tensor(tensor))
    except OSError as e:
        raise type(e)(f"Failed to write spike tensor {path}: {e}") from e


def read_spike_tensor(path: PathLike) -> SpikeTensor:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise type(e)(f"Failed to read spike tensor {path}: {e}") from e
    return decode_spike_tensor(payload, source=str(path))


def sniff_magic(path: PathLike) -> bytes:
    """Return the first four bytes of a file (used by `inspect`)"""
    with Path(path).open("rb") as f:
        return f.read(4)
