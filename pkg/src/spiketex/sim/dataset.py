"""
Dataset manifests, builder and loader

A DatasetManifest expands into an ordered list of TrialSpecs. Every random
choice of a trial (sampled depth/speeds, start position, simulation seed) is
drawn from a SeedSequence keyed on (manifest seed, texture id, trial index),
so the expansion does not depend on worker count or execution order.

Layout of a built dataset:

    out_dir/
      index.json          name, created, manifest_hash, manifest, trials[...]
      trials/00000.aer    one event file per trial
"""

import json
import tomllib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from ..aer.events import EventStream
from ..aer.io import read_events, write_events
from ..aer.transforms import PreprocessConfig, SpikeTensor, bin_events, pooled_view
from ..core.cache import LRUCache, canonical_json, stable_hash
from ..core.config import settings
from ..core.errors import ArgumentError, EventFormatError
from ..core.validator import DatasetIndexValidator
from ..utils.logging import get_logger, success
from .motion import MotionKind, MotionProfile, start_bounds
from .sensor import SensorModel
from .textures import texture_ids, texture_label
from .trial import TrialSpec, simulate_trial

logger = get_logger(__name__)

PathLike = Union[str, Path]

INDEX_FILE = "index.json"
TRIALS_DIR = "trials"
SPLIT_STREAM = 0  # spawn-key prefix of the split permutation; texture ids start at 1


class SamplingRanges(BaseModel):
    """Uniform sampling ranges of a varied-condition manifest"""

    model_config = ConfigDict(frozen=True)

    depth_mm: Tuple[float, float] = (0.5, 2.5)
    linear_speed_mm_s: Tuple[float, float] = (10.0, 50.0)
    angular_speed_deg_s: Tuple[float, float] = (10.0, 50.0)

    @model_validator(mode="after")
    def _ordered(self) -> "SamplingRanges":
        for name in ("depth_mm", "linear_speed_mm_s", "angular_speed_deg_s"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} range must satisfy 0 <= low <= high")
        if self.depth_mm[1] > 3.0:
            raise ValueError("depth range exceeds the 3 mm cap")
        return self

    def as_bounds(self, kind: MotionKind) -> Dict[str, Tuple[float, float]]:
        """Bounds keyed by the MotionProfile fields sampled for `kind`"""
        bounds = {"depth_mm": self.depth_mm}
        if kind.slides:
            bounds["slide_speed_mm_s"] = self.linear_speed_mm_s
        if kind.taps and kind.is_compound:
            bounds["compound_tap_speed_mm_s"] = self.linear_speed_mm_s
        if kind.rotates:
            bounds["angular_speed_deg_s"] = self.angular_speed_deg_s
        return bounds


class DatasetManifest(BaseModel):
    """
    Recipe for a dataset.

    Either `trials` lists the TrialSpecs explicitly, or they are generated from
    the `motion` template: `trials_per_texture` per entry of `textures`,
    optionally with parameters drawn from `ranges` (`randomize`) and a random
    start position that keeps the footprint on the panel (`random_start`).
    """

    model_config = ConfigDict(frozen=True)

    name: str
    motion: Optional[MotionProfile] = None
    textures: Tuple[int, ...] = Field(default_factory=lambda: tuple(texture_ids()))
    trials_per_texture: int = Field(default=100, ge=0)
    randomize: bool = False
    ranges: SamplingRanges = Field(default_factory=SamplingRanges)
    random_start: bool = False
    seed: int = Field(default=0, ge=0)
    test_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    sensor: SensorModel = Field(default_factory=SensorModel)
    trials: Optional[Tuple[TrialSpec, ...]] = None

    @model_validator(mode="after")
    def _has_source(self) -> "DatasetManifest":
        if self.trials is None and self.motion is None:
            raise ValueError("manifest needs a motion template or an explicit trial list")
        for texture_id in self.textures:
            texture_label(texture_id)
        return self

    def per_class_counts(self) -> Dict[int, int]:
        if self.trials is not None:
            counts: Dict[int, int] = {}
            for spec in self.trials:
                counts[spec.texture_id] = counts.get(spec.texture_id, 0) + 1
            return counts
        return {t: self.trials_per_texture for t in self.textures}

    def sampled_bounds(self) -> Optional[Dict[str, Tuple[float, float]]]:
        """Ranges every generated trial must respect; None when nothing is sampled"""
        if self.trials is not None or not self.randomize or self.motion is None:
            return None
        return self.ranges.as_bounds(self.motion.kind)

    def manifest_hash(self) -> str:
        return stable_hash(self.model_dump(mode="json"))

    def expand(self) -> List[TrialSpec]:
        """All trials in texture-major order"""
        if self.trials is not None:
            return list(self.trials)
        return [
            self._sample_trial(texture_id, i)
            for texture_id in self.textures
            for i in range(self.trials_per_texture)
        ]

    def _sample_trial(self, texture_id: int, index: int) -> TrialSpec:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(texture_id, index))
        rng = np.random.default_rng(seq)
        template = self.motion
        kind: MotionKind = template.kind
        fields = template.model_dump()

        if self.randomize:
            fields["depth_mm"] = float(rng.uniform(*self.ranges.depth_mm))
            # independent draws for every component the motion has
            if kind.slides:
                fields["slide_speed_mm_s"] = float(rng.uniform(*self.ranges.linear_speed_mm_s))
            if kind.taps and kind.is_compound:
                fields["compound_tap_speed_mm_s"] = float(rng.uniform(*self.ranges.linear_speed_mm_s))
            if kind.rotates:
                fields["angular_speed_deg_s"] = float(rng.uniform(*self.ranges.angular_speed_deg_s))

        if self.random_start:
            x_lo, x_hi, y_lo, y_hi = start_bounds(MotionProfile.model_construct(**fields))
            if x_hi < x_lo:
                raise ArgumentError(f"slide of trial ({texture_id}, {index}) does not fit on the panel")
            fields["start_x_mm"] = float(rng.uniform(x_lo, x_hi))
            fields["start_y_mm"] = float(rng.uniform(y_lo, y_hi))

        trial_seed = int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
        return TrialSpec(
            texture_id=texture_id,
            motion=MotionProfile(**fields),
            seed=trial_seed,
            sensor=self.sensor,
        )

    def assign_splits(self, specs: Sequence[TrialSpec]) -> List[str]:
        """Class-stratified deterministic train/test assignment"""
        splits = ["train"] * len(specs)
        by_class: Dict[int, List[int]] = {}
        for position, spec in enumerate(specs):
            by_class.setdefault(spec.texture_id, []).append(position)
        for texture_id, positions in by_class.items():
            n_test = int(round(len(positions) * self.test_fraction))
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(SPLIT_STREAM, texture_id))
            order = np.random.default_rng(seq).permutation(len(positions))
            for k in order[:n_test]:
                splits[positions[int(k)]] = "test"
        return splits


def load_manifest(path: PathLike) -> DatasetManifest:
    """Read a manifest from JSON or TOML"""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise type(e)(f"Failed to read manifest {path}: {e}") from e
    try:
        payload = tomllib.loads(raw.decode("utf-8")) if path.suffix == ".toml" else json.loads(raw)
        return DatasetManifest.model_validate(payload)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ArgumentError(f"Invalid manifest {path}: {e}") from e


def resolve_manifest(reference: PathLike) -> DatasetManifest:
    """Manifest by path, or by preset name under the configured manifest directory"""
    path = Path(reference)
    if not path.exists():
        preset = settings.manifest_dir / (path.name if path.suffix else f"{path.name}.json")
        if preset.exists():
            path = preset
    return load_manifest(path)


class IndexEntry(BaseModel):
    """One trial record of a dataset index"""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    file: str
    texture_id: int = Field(ge=1, le=10)
    label: str
    split: str
    motion: MotionProfile
    seed: int = Field(ge=0)
    event_count: int = Field(default=0, ge=0)


class DatasetIndex(BaseModel):
    """Parsed index.json plus the directory it was read from"""

    name: str
    created: str
    manifest_hash: str = ""
    manifest: Optional[Dict[str, Any]] = None
    trials: List[IndexEntry] = Field(default_factory=list)

    _root: Path = PrivateAttr(default=Path("."))

    @property
    def root(self) -> Path:
        return self._root

    def entries(self, split: Optional[str] = None) -> List[IndexEntry]:
        if split is None:
            return list(self.trials)
        return [entry for entry in self.trials if entry.split == split]

    def path_of(self, entry: IndexEntry) -> Path:
        return self._root / entry.file


def _simulate_and_write(job: Tuple[TrialSpec, str]) -> int:
    spec, path = job
    stream = simulate_trial(spec)
    write_events(stream, path)
    return len(stream)


def build_dataset(manifest: DatasetManifest, out_dir: PathLike, jobs: Optional[int] = None) -> DatasetIndex:
    """
    Simulate every trial of the manifest into out_dir and write the index.

    Workers only simulate and write their own event file; the index is written
    once by the caller, in trial order.
    """
    out_dir = Path(out_dir)
    jobs = jobs or settings.jobs
    specs = manifest.expand()
    splits = manifest.assign_splits(specs)

    trials_dir = out_dir / TRIALS_DIR
    try:
        trials_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise type(e)(f"Failed to create dataset directory {out_dir}: {e}") from e

    files = [f"{TRIALS_DIR}/{i:05d}.aer" for i in range(len(specs))]
    work = [(spec, str(out_dir / name)) for spec, name in zip(specs, files)]
    logger.info(f"Building dataset '{manifest.name}': {len(specs)} trials, {jobs} worker(s)")

    counts: List[int] = []
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(work) // (jobs * 4))
            for count in pool.map(_simulate_and_write, work, chunksize=chunk):
                counts.append(count)
    else:
        for i, item in enumerate(work, start=1):
            counts.append(_simulate_and_write(item))
            if i % 100 == 0:
                logger.info(f"Simulated {i}/{len(work)} trials")

    index = DatasetIndex(
        name=manifest.name,
        created=settings.artifact_timestamp(),
        manifest_hash=manifest.manifest_hash(),
        manifest=manifest.model_dump(mode="json"),
        trials=[
            IndexEntry(
                id=i,
                file=files[i],
                texture_id=spec.texture_id,
                label=texture_label(spec.texture_id),
                split=splits[i],
                motion=spec.motion,
                seed=spec.seed,
                event_count=counts[i],
            )
            for i, spec in enumerate(specs)
        ],
    )
    index._root = out_dir
    write_index(index, out_dir)
    success(f"Dataset '{manifest.name}' written to {out_dir} ({sum(counts)} events)")
    return index


def write_index(index: DatasetIndex, out_dir: PathLike) -> Path:
    path = Path(out_dir) / INDEX_FILE
    payload = index.model_dump(mode="json")
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise type(e)(f"Failed to write dataset index {path}: {e}") from e
    return path


def load_index(out_dir: PathLike, check_files: bool = False) -> DatasetIndex:
    """
    Read and validate the index of a built dataset.

    The embedded manifest fixes the per-class trial counts and, for varied
    conditions, the ranges every sampled motion value must lie in.
    """
    root = Path(out_dir)
    path = root / INDEX_FILE if root.is_dir() else root
    if path.name == INDEX_FILE:
        root = path.parent
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise type(e)(f"Failed to read dataset index {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise EventFormatError(f"{path}: index is not valid JSON ({e})") from e

    ranges, expected = None, None
    if isinstance(payload, dict) and payload.get("manifest") is not None:
        try:
            manifest = DatasetManifest.model_validate(payload["manifest"])
        except ValidationError as e:
            raise EventFormatError(
                f"{path}: index carries an invalid manifest ({e.error_count()} errors)"
            ) from e
        ranges, expected = manifest.sampled_bounds(), manifest.per_class_counts()

    report = DatasetIndexValidator().validate_index(
        payload, root=root if check_files else None, ranges=ranges, expected_per_class=expected
    )
    if not report["is_valid"]:
        raise EventFormatError(f"{path}: " + "; ".join(report["errors"]))
    try:
        index = DatasetIndex.model_validate(payload)
    except ValidationError as e:
        raise EventFormatError(f"{path}: malformed index ({e.error_count()} errors)") from e
    index._root = root
    return index


_pooled_cache: LRUCache[EventStream] = LRUCache(max_size=settings.cache_max_entries)


class TrialSet:
    """
    Lazy (SpikeTensor, label) access to one split of a built dataset.

    Pooled 20x20 streams are cached, not dense tensors; binning is redone per
    access and is cheap. Cache entries are keyed on the event file path, size
    and modification time, so a rebuilt dataset is read again.
    """

    def __init__(
        self,
        index: DatasetIndex,
        split: Optional[str] = None,
        cfg: Optional[PreprocessConfig] = None,
        cache: Optional[LRUCache[EventStream]] = None,
    ):
        self.index = index
        self.split = split
        self.cfg = cfg or settings.preprocess_config()
        self.cache = _pooled_cache if cache is None else cache
        self.entries = index.entries(split)
        self._cfg_key = canonical_json(self.cfg.model_dump(mode="json"))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        return np.array([entry.texture_id for entry in self.entries], dtype=np.int64)

    def pooled(self, i: int) -> EventStream:
        entry = self.entries[i]
        path = self.index.path_of(entry)
        try:
            stat = path.stat()
        except OSError as e:
            raise type(e)(f"Failed to read event file {path}: {e}") from e
        return self.cache.get_or_compute(
            lambda: pooled_view(read_events(path), self.cfg),
            str(path.resolve()),
            stat.st_size,
            stat.st_mtime_ns,
            self._cfg_key,
        )

    def tensor(self, i: int) -> SpikeTensor:
        return bin_events(
            self.pooled(i),
            dt_us=self.cfg.dt_us,
            t_steps=self.cfg.t_steps,
            merge_polarity=self.cfg.merge_polarity,
            binarize=self.cfg.binarize,
        )

    def __getitem__(self, i: int) -> Tuple[SpikeTensor, int]:
        return self.tensor(i), self.entries[i].texture_id

    def __iter__(self) -> Iterator[Tuple[SpikeTensor, int]]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, positions: Sequence[int]) -> "TrialSet":
        view = TrialSet(self.index, self.split, self.cfg, self.cache)
        view.entries = [self.entries[int(p)] for p in positions]
        return view
