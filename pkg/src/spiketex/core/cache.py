"""
Cache and hashing helpers for spiketex

Implements a small in-memory LRU cache for preprocessed trials, so that
training epochs and evaluation passes do not re-read and re-pool the same
event files, plus the canonical hashing used for spec and config hashes.
"""

import hashlib
import json
import threading
from collections import OrderedDict
from typing import Any, Callable, Dict, Generic, Hashable, Optional, TypeVar

V = TypeVar("V")


def canonical_json(payload: Any) -> str:
    """Serialize a JSON-compatible payload with sorted keys and no whitespace"""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def stable_hash(payload: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form; insensitive to key order"""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


class LRUCache(Generic[V]):
    """Thread-safe least-recently-used cache with hit/miss statistics"""

    def __init__(self, max_size: int = 1024):
        if max_size < 1:
            raise ValueError("max_size must be at least 1")
        self._entries: "OrderedDict[str, V]" = OrderedDict()
        self._lock = threading.Lock()
        self.max_size = max_size
        self.hit_count = 0
        self.miss_count = 0

    @staticmethod
    def _generate_key(*parts: Hashable) -> str:
        """Generate cache key from the identifying parts"""
        content = "|".join(str(part) for part in parts)
        return hashlib.md5(content.encode()).hexdigest()

    def get(self, *parts: Hashable) -> Optional[V]:
        key = self._generate_key(*parts)
        with self._lock:
            if key not in self._entries:
                self.miss_count += 1
                return None
            self._entries.move_to_end(key)
            self.hit_count += 1
            return self._entries[key]

    def set(self, value: V, *parts: Hashable) -> None:
        key = self._generate_key(*parts)
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_size:
                self._entries.popitem(last=False)

    def get_or_compute(self, compute: Callable[[], V], *parts: Hashable) -> V:
        """Return the cached value or compute, store and return it"""
        cached = self.get(*parts)
        if cached is not None:
            return cached
        value = compute()
        self.set(value, *parts)
        return value

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self.hit_count = 0
            self.miss_count = 0

    def __len__(self) -> int:
        return len(self._entries)

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics"""
        total = self.hit_count + self.miss_count
        return {
            "size": len(self._entries),
            "max_size": self.max_size,
            "hit_count": self.hit_count,
            "miss_count": self.miss_count,
            "hit_rate": (self.hit_count / total) if total else None,
        }
