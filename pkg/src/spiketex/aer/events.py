"""
AER event data model

An EventStream holds one trial of address-event output as four parallel,
read-only numpy columns (t, x, y, polarity) plus the frame geometry and the
trial duration. Streams are immutable values; every transform returns a new one.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Iterator, List, NamedTuple, Optional

import numpy as np

from ..core.errors import ArgumentError

T_DTYPE = np.uint32
XY_DTYPE = np.uint16
P_DTYPE = np.uint8

MAX_T_US = np.iinfo(np.uint32).max
MAX_SIDE = np.iinfo(np.uint16).max


class Polarity(IntEnum):
    OFF = 0
    ON = 1


class Event(NamedTuple):
    t: int
    x: int
    y: int
    polarity: Polarity


def _frozen(values: np.ndarray, dtype: type) -> np.ndarray:
    array = np.ascontiguousarray(values, dtype=dtype)
    if array.ndim != 1:
        raise ArgumentError("event columns must be one-dimensional")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class EventStream:
    """Ordered, bounded sequence of events for one trial"""

    width: int
    height: int
    duration_us: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    # set by readers that had to restore time order
    resorted: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        for name, dtype in (("t", T_DTYPE), ("x", XY_DTYPE), ("y", XY_DTYPE), ("p", P_DTYPE)):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        n = self.t.shape[0]
        if not (self.x.shape[0] == self.y.shape[0] == self.p.shape[0] == n):
            raise ArgumentError("event columns have different lengths")
        if not (0 < self.width <= MAX_SIDE and 0 < self.height <= MAX_SIDE):
            raise ArgumentError(f"invalid frame size {self.width}x{self.height}")
        if not (0 < self.duration_us <= MAX_T_US):
            raise ArgumentError(f"invalid duration {self.duration_us} us")
        if n:
            if int(self.t.max()) >= self.duration_us:
                raise ArgumentError("event timestamp at or beyond trial duration")
            if int(self.x.max()) >= self.width or int(self.y.max()) >= self.height:
                raise ArgumentError("event address outside the frame")
            if int(self.p.max()) > 1:
                raise ArgumentError("polarity must be 0 (OFF) or 1 (ON)")
            if np.any(np.diff(self.t.astype(np.int64)) < 0):
                raise ArgumentError("events are not sorted by timestamp")

    @classmethod
    def empty(cls, width: int, height: int, duration_us: int) -> "EventStream":
        zeros = np.zeros(0)
        return cls(width, height, duration_us, zeros, zeros, zeros, zeros)

    @classmethod
    def from_arrays(
        cls,
        width: int,
        height: int,
        duration_us: int,
        t: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        p: np.ndarray,
        sort: bool = False,
    ) -> "EventStream":
        """Build a stream, optionally applying a stable sort on t first"""
        resorted = False
        t = np.asarray(t)
        if sort and t.size and np.any(np.diff(t.astype(np.int64)) < 0):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], np.asarray(x)[order], np.asarray(y)[order], np.asarray(p)[order]
            resorted = True
        return cls(width, height, duration_us, t, x, y, p, resorted=resorted)

    @classmethod
    def from_events(
        cls, width: int, height: int, duration_us: int, events: List[Event]
    ) -> "EventStream":
        if not events:
            return cls.empty(width, height, duration_us)
        columns = np.array([(e.t, e.x, e.y, int(e.polarity)) for e in events], dtype=np.int64)
        return cls(width, height, duration_us, *columns.T)

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, Polarity(p))

    def __getitem__(self, index: int) -> Event:
        return Event(int(self.t[index]), int(self.x[index]), int(self.y[index]), Polarity(int(self.p[index])))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.duration_us == other.duration_us
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def with_events(
        self,
        mask: Optional[np.ndarray] = None,
        x: Optional[np.ndarray] = None,
        y: Optional[np.ndarray] = None,
        width: Optional[int] = None,
        height: Optional[int] = None,
    ) -> "EventStream":
        """Derive a stream keeping the masked events and replacing addresses/geometry"""
        keep = slice(None) if mask is None else mask
        return EventStream(
            width=self.width if width is None else width,
            height=self.height if height is None else height,
            duration_us=self.duration_us,
            t=self.t[keep],
            x=self.x[keep] if x is None else x,
            y=self.y[keep] if y is None else y,
            p=self.p[keep],
        )

    def count_by_polarity(self) -> Dict[str, int]:
        on = int(np.count_nonzero(self.p))
        return {"ON": on, "OFF": len(self) - on}
