"""
Parameter file format

    header   "<4sHH32sqI"  magic "SNNP", version, reserved, spec hash (raw
                           SHA-256), init seed (-1 when unknown), tensor count
    tensor   "<H" name length, UTF-8 name, "<B" ndim, ndim x "<I" dims,
             prod(dims) float32 little-endian values
    trailer  "<I"          CRC32 of everything before it

Files are parsed completely before any Parameters object is built.
"""

import struct
import zlib
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import torch

from ..core.errors import FormatError, IncompatibleModelError
from ..utils.logging import get_logger
from .network import NetworkSpec, Parameters, spec_hash

logger = get_logger(__name__)

PathLike = Union[str, Path]

MAGIC = b"SNNP"
VERSION = 1
HEADER = struct.Struct("<4sHH32sqI")
TRAILER = struct.Struct("<I")
_F32 = np.dtype("<f4")


def encode_params(params: Parameters, spec: NetworkSpec) -> bytes:
    params.check_shapes(spec)
    seed = -1 if params.seed is None else int(params.seed)
    chunks = [HEADER.pack(MAGIC, VERSION, 0, bytes.fromhex(spec_hash(spec)), seed, len(params.tensors))]
    for name, tensor in params.tensors.items():
        raw_name = name.encode("utf-8")
        values = tensor.detach().cpu().numpy().astype(_F32)
        chunks.append(struct.pack("<H", len(raw_name)) + raw_name)
        chunks.append(struct.pack(f"<B{values.ndim}I", values.ndim, *values.shape))
        chunks.append(values.tobytes(order="C"))
    body = b"".join(chunks)
    return body + TRAILER.pack(zlib.crc32(body))


class _Reader:
    def __init__(self, payload: bytes, source: str):
        self.payload = payload
        self.source = source
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise FormatError(f"{self.source}: truncated {what} at byte offset {self.offset}")
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_params(payload: bytes, source: str = "<bytes>") -> Tuple[Parameters, str]:
    """Parameters and the hex spec hash they were saved for"""
    if len(payload) < HEADER.size + TRAILER.size:
        raise FormatError(f"{source}: file too short for a parameter header")
    body, trailer = payload[: -TRAILER.size], payload[-TRAILER.size :]
    if payload[:4] != MAGIC:
        raise FormatError(f"{source}: bad magic {payload[:4]!r}, expected {MAGIC!r}")
    (crc,) = TRAILER.unpack(trailer)
    if zlib.crc32(body) != crc:
        raise FormatError(f"{source}: checksum mismatch")

    reader = _Reader(body, source)
    _, version, _, raw_hash, seed, count = reader.unpack(HEADER.format, "header")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported format version {version}")

    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "tensor name length")
        try:
            name = reader.take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{source}: tensor name is not UTF-8") from e
        (ndim,) = reader.unpack("<B", "tensor rank")
        dims = reader.unpack(f"<{ndim}I", "tensor shape")
        size = int(np.prod(dims)) * _F32.itemsize
        values = np.frombuffer(reader.take(size, f"tensor {name}"), dtype=_F32).reshape(dims)
        if name in tensors:
            raise FormatError(f"{source}: duplicate tensor {name}")
        tensors[name] = torch.from_numpy(values.astype(np.float32))
    if reader.offset != len(body):
        raise FormatError(f"{source}: {len(body) - reader.offset} trailing bytes")

    return Parameters(tensors, None if seed < 0 else seed), raw_hash.hex()


def save_params(params: Parameters, spec: NetworkSpec, path: PathLike) -> None:
    path = Path(path)
    payload = encode_params(params, spec)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        raise type(e)(f"Failed to write parameters {path}: {e}") from e
    logger.info(f"Saved {len(params.tensors)} tensors to {path}")


def load_params(path: PathLike, spec: Optional[NetworkSpec] = None) -> Parameters:
    """Read a parameter file; with `spec`, reject files saved for another network"""
    params, saved_hash = read_params(path)
    if spec is not None:
        expected = spec_hash(spec)
        if saved_hash != expected:
            raise IncompatibleModelError(
                f"{path}: saved for network {saved_hash[:12]}, expected {expected[:12]}"
            )
        params.check_shapes(spec)
    return params


def read_params(path: PathLike) -> Tuple[Parameters, str]:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise type(e)(f"Failed to read parameters {path}: {e}") from e
    return decode_params(payload, str(path))


def describe_params(path: PathLike) -> Dict[str, object]:
    """Summary used by `inspect`"""
    params, saved_hash = read_params(path)
    return {
        "format": "parameters",
        "spec_hash": saved_hash,
        "seed": params.seed,
        "tensors": {name: list(t.shape) for name, t in params.tensors.items()},
        "parameter_count": int(sum(t.numel() for t in params.tensors.values())),
    }
