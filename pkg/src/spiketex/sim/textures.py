"""
Procedural texture height fields

Each of the ten panel textures is a smooth surface height over a 100 mm x 100 mm
extent: a sum of oriented sinusoidal gratings (the texture's spectrum) plus
band-limited noise, itself a fixed set of random-phase gratings drawn from a
counter-based generator keyed on (noise_seed, texture_id). Both the height and
its analytic gradient are available, vectorised over query points.

The spectra are versioned in `spiketex/config/textures.json`; only class
separability matters, not physical fidelity.
"""

import json
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.config import settings
from ..core.errors import ArgumentError

ArrayLike = Union[float, np.ndarray]

PANEL_EXTENT_MM = 100.0
DEFAULT_NOISE_COMPONENTS = 32

TEXTURE_LABELS = (
    "Acrylic",
    "Fashion Fabric",
    "Cotton",
    "Nylon",
    "Fur",
    "Wood",
    "Mesh",
    "Felt",
    "Wool",
    "Canvas",
)


class TextureField(BaseModel):
    """
    Height field of one texture panel.

    spectrum entries are (spatial frequency in cycles/mm, amplitude in mm,
    orientation in rad); a grating with orientation 0 varies along u only.
    """

    model_config = ConfigDict(frozen=True)

    texture_id: int = Field(ge=1, le=10)
    label: str
    spectrum: Tuple[Tuple[float, float, float], ...] = ()
    noise_seed: int = Field(default=0, ge=0)
    noise_amplitude_mm: float = Field(default=0.0, ge=0.0)
    noise_band: Tuple[float, float] = (0.5, 2.0)
    noise_components: int = Field(default=DEFAULT_NOISE_COMPONENTS, ge=0)
    extent_mm: float = Field(default=PANEL_EXTENT_MM, gt=0.0)

    @field_validator("spectrum")
    @classmethod
    def _nonnegative_amplitudes(cls, value):
        for freq, amp, _ in value:
            if amp < 0 or freq < 0:
                raise ValueError("spectrum frequencies and amplitudes must be >= 0")
        return value

    @field_validator("noise_band")
    @classmethod
    def _ordered_band(cls, value):
        lo, hi = value
        if not (0 <= lo <= hi):
            raise ValueError("noise band must satisfy 0 <= low <= high")
        return value

    @cached_property
    def _gratings(self) -> Dict[str, np.ndarray]:
        """All gratings as parallel arrays (freq, amp, cos, sin, phase)"""
        freq = [f for f, _, _ in self.spectrum]
        amp = [a for _, a, _ in self.spectrum]
        theta = [o for _, _, o in self.spectrum]
        phase = [0.0] * len(self.spectrum)

        if self.noise_amplitude_mm > 0 and self.noise_components > 0:
            rng = np.random.Generator(
                np.random.Philox(key=np.array([self.noise_seed, self.texture_id], dtype=np.uint64))
            )
            n = self.noise_components
            lo, hi = self.noise_band
            freq += rng.uniform(lo, hi, n).tolist()
            theta += rng.uniform(0.0, np.pi, n).tolist()
            phase += rng.uniform(0.0, 2 * np.pi, n).tolist()
            # equal share of the noise variance per component
            amp += [self.noise_amplitude_mm * np.sqrt(2.0 / n)] * n

        theta_arr = np.asarray(theta, dtype=np.float64)
        return {
            "freq": np.asarray(freq, dtype=np.float64),
            "amp": np.asarray(amp, dtype=np.float64),
            "cos": np.cos(theta_arr),
            "sin": np.sin(theta_arr),
            "phase": np.asarray(phase, dtype=np.float64),
        }

    def _check_extent(self, u: np.ndarray, v: np.ndarray) -> None:
        if u.size == 0:
            return
        if (
            np.any(~np.isfinite(u))
            or np.any(~np.isfinite(v))
            or u.min() < 0
            or v.min() < 0
            or u.max() > self.extent_mm
            or v.max() > self.extent_mm
        ):
            raise ArgumentError(
                f"texture query outside the {self.extent_mm:g} mm panel "
                f"(u in [{u.min():.3f}, {u.max():.3f}], v in [{v.min():.3f}, {v.max():.3f}])"
            )

    def _argument(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        g = self._gratings
        along = u[..., None] * g["cos"] + v[..., None] * g["sin"]
        return 2 * np.pi * g["freq"] * along + g["phase"]

    def height(self, u_mm: ArrayLike, v_mm: ArrayLike) -> ArrayLike:
        u, v = np.broadcast_arrays(np.asarray(u_mm, dtype=np.float64), np.asarray(v_mm, dtype=np.float64))
        self._check_extent(u, v)
        g = self._gratings
        if g["amp"].size == 0:
            out = np.zeros(u.shape)
        else:
            out = np.sin(self._argument(u, v)) @ g["amp"]
        return float(out) if out.ndim == 0 else out

    def gradient(self, u_mm: ArrayLike, v_mm: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Analytic (dh/du, dh/dv) in mm/mm"""
        u, v = np.broadcast_arrays(np.asarray(u_mm, dtype=np.float64), np.asarray(v_mm, dtype=np.float64))
        self._check_extent(u, v)
        g = self._gratings
        if g["amp"].size == 0:
            return np.zeros(u.shape), np.zeros(u.shape)
        slope = np.cos(self._argument(u, v)) * (2 * np.pi * g["freq"] * g["amp"])
        return slope @ g["cos"], slope @ g["sin"]


def texture_height(field: TextureField, u_mm: ArrayLike, v_mm: ArrayLike) -> ArrayLike:
    """Height of the texture surface in mm at panel coordinates (u, v)"""
    return field.height(u_mm, v_mm)


def load_textures(path: Optional[Path] = None) -> Dict[int, TextureField]:
    """Read the versioned texture spectra config"""
    path = Path(path or settings.texture_config_path)
    try:
        with path.open(encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as e:
        raise type(e)(f"Failed to read texture config {path}: {e}") from e

    extent = float(payload.get("extent_mm", PANEL_EXTENT_MM))
    components = int(payload.get("noise_components", DEFAULT_NOISE_COMPONENTS))
    fields: Dict[int, TextureField] = {}
    for entry in payload["textures"]:
        field = TextureField(
            extent_mm=extent,
            noise_components=components,
            **{**entry, "spectrum": tuple(tuple(s) for s in entry.get("spectrum", []))},
        )
        fields[field.texture_id] = field
    return fields


@lru_cache(maxsize=4)
def _default_textures(path: str) -> Dict[int, TextureField]:
    return load_textures(Path(path))


def get_texture(texture_id: int) -> TextureField:
    """Texture from the configured spectra file"""
    textures = _default_textures(str(settings.texture_config_path))
    if texture_id not in textures:
        raise ArgumentError(f"unknown texture id {texture_id}")
    return textures[texture_id]


def texture_label(texture_id: int) -> str:
    if not 1 <= texture_id <= len(TEXTURE_LABELS):
        raise ArgumentError(f"unknown texture id {texture_id}")
    return TEXTURE_LABELS[texture_id - 1]


def texture_ids() -> List[int]:
    return list(range(1, len(TEXTURE_LABELS) + 1))
