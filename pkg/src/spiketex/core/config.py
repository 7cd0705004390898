"""
Configuration management for spiketex

Centralized configuration using Pydantic settings with environment variable support.
Every default of the preprocessing chain, the simulator frame and the execution
layer lives here so that one `.env` file (or `SPIKETEX_*` variables) can move them.
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with environment variable support"""

    model_config = SettingsConfigDict(
        env_prefix="SPIKETEX_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Tool Configuration
    tool_name: str = "spiketex"
    tool_version: str = "1.0.0"

    # Sensor Frame Configuration
    sensor_width: int = Field(default=640, gt=0)
    sensor_height: int = Field(default=480, gt=0)

    # Preprocessing Configuration
    crop_origin_x: int = Field(default=190, ge=0)
    crop_origin_y: int = Field(default=110, ge=0)
    crop_side: int = Field(default=260, gt=0)
    pool_cells: int = Field(default=20, gt=0)
    pool_cell_side: int = Field(default=13, gt=0)
    bin_dt_us: int = Field(default=1000, gt=0)
    bin_t_steps: int = Field(default=1000, gt=0)
    merge_polarity: bool = True
    binarize: bool = False

    # Execution Configuration
    jobs: int = Field(default=1, ge=1)
    torch_threads: int = Field(default=1, ge=1)
    cache_max_entries: int = Field(default=2048, ge=1)

    # Reproducibility: timestamps embedded in dataset artifacts
    source_date_epoch: Optional[int] = Field(
        default=None, validation_alias="SOURCE_DATE_EPOCH"
    )

    # Paths Configuration
    base_dir: Path = Field(default_factory=lambda: Path(__file__).resolve().parents[3])
    texture_config_path: Path = Field(
        default_factory=lambda: Path(__file__).resolve().parents[1] / "config" / "textures.json"
    )
    manifest_dir: Path = Field(
        default_factory=lambda: Path(__file__).resolve().parents[3] / "config" / "manifests"
    )

    # Logging Configuration
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    use_emoji: bool = True

    def crop_spec(self):
        """Get the default crop window as a CropSpec"""
        from ..aer.transforms import CropSpec

        return CropSpec(
            origin_x=self.crop_origin_x, origin_y=self.crop_origin_y, side=self.crop_side
        )

    def pool_grid(self):
        """Get the default pooling grid as a PoolGrid"""
        from ..aer.transforms import PoolGrid

        return PoolGrid(
            cells_x=self.pool_cells, cells_y=self.pool_cells, cell_side=self.pool_cell_side
        )

    def preprocess_config(self):
        """Get the full default preprocessing chain"""
        from ..aer.transforms import PreprocessConfig

        return PreprocessConfig(
            crop=self.crop_spec(),
            grid=self.pool_grid(),
            dt_us=self.bin_dt_us,
            t_steps=self.bin_t_steps,
            merge_polarity=self.merge_polarity,
            binarize=self.binarize,
        )

    def artifact_timestamp(self) -> str:
        """ISO timestamp for artifacts, pinned when SOURCE_DATE_EPOCH is set"""
        if self.source_date_epoch is not None:
            moment = datetime.fromtimestamp(self.source_date_epoch, tz=timezone.utc)
        else:
            moment = datetime.now(tz=timezone.utc)
        return moment.replace(microsecond=0).isoformat()


# Global settings instance
settings = Settings()
