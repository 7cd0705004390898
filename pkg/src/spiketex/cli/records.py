"""
Experiment configuration and run records

ExperimentConfig values come from three layers, later ones winning:
model defaults, a JSON/TOML file given with --config, explicit flags.
"""

import json
import time
import tomllib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..core.cache import stable_hash
from ..core.config import settings
from ..core.errors import UsageError
from ..metrics.sweep import GridSpec
from ..snn.training import Hyperparams

PathLike = Union[str, Path]

RECORD_PREFIX = "run-"


class ExperimentConfig(BaseModel):
    """Everything a command needs besides its positional inputs"""

    model_config = ConfigDict(extra="forbid")

    data_dir: Optional[Path] = None
    params_path: Optional[Path] = None
    report_dir: Optional[Path] = None
    manifest: Optional[str] = None
    network: Optional[Path] = Field(default=None, description="NetworkSpec JSON; default architecture when unset")
    hyperparams: Hyperparams = Field(default_factory=Hyperparams)
    seed: Optional[int] = Field(default=None, ge=0)
    jobs: int = Field(default_factory=lambda: settings.jobs, ge=1)
    step_ms: float = Field(default=50.0, gt=0)
    band: float = Field(default=0.05, ge=0)
    grid: GridSpec = Field(default_factory=GridSpec)

    def config_hash(self) -> str:
        """Stable under key order; paths are hashed as given"""
        return stable_hash(self.model_dump(mode="json"))

    def merged(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """Apply flag values that were actually given (None means absent)"""
        top: Dict[str, Any] = {}
        hyper: Dict[str, Any] = {}
        hyper_fields = set(Hyperparams.model_fields)
        for key, value in overrides.items():
            if value is None:
                continue
            if key in hyper_fields:
                hyper[key] = value
            else:
                top[key] = value
        if "seed" in top:
            hyper.setdefault("seed", top["seed"])
        payload = self.model_dump()
        payload.update(top)
        payload["hyperparams"] = {**self.hyperparams.model_dump(), **hyper}
        try:
            return ExperimentConfig.model_validate(payload)
        except ValidationError as e:
            raise UsageError(f"invalid option values: {e}") from e


def load_config(path: Optional[PathLike]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise type(e)(f"Failed to read config {path}: {e}") from e
    try:
        payload = tomllib.loads(raw) if path.suffix == ".toml" else json.loads(raw)
        return ExperimentConfig.model_validate(payload)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise UsageError(f"invalid config file {path}: {e}") from e


class RunRecord(BaseModel):
    """Provenance of one command invocation"""

    command: str
    argv: List[str]
    config_hash: str
    tool_version: str = Field(default_factory=lambda: settings.tool_version)
    seed: Optional[int] = None
    started_at: str = Field(
        default_factory=lambda: datetime.now(tz=timezone.utc).replace(microsecond=0).isoformat()
    )
    wall_time_s: float = 0.0
    exit_code: int = 0
    artifacts: List[str] = Field(default_factory=list)

    def file_name(self) -> str:
        return f"{RECORD_PREFIX}{self.command}.json"

    def write(self, out_dir: PathLike) -> Path:
        path = Path(out_dir) / self.file_name()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
        except OSError as e:
            raise type(e)(f"Failed to write run record {path}: {e}") from e
        return path


class Stopwatch:
    def __init__(self) -> None:
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start
