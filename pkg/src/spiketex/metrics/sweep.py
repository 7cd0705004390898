"""
Generalisation over sampled contact conditions

Trials of a varied-condition dataset are bucketed by the parameters that were
actually sampled for them (read from the dataset index) onto a grid of cell
centres; each trial goes to the nearest centre along every axis.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.errors import ArgumentError
from ..sim.dataset import IndexEntry, TrialSet
from ..utils.logging import get_logger
from .evaluation import Evaluation, Model, evaluate

logger = get_logger(__name__)

AXES = ("depth_mm", "speed", "angular_speed")


class GridSpec(BaseModel):
    """Cell centres per axis; an axis set to None is not bucketed"""

    model_config = ConfigDict(frozen=True)

    depth_mm: Tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5)
    speed: Optional[Tuple[float, ...]] = (10.0, 20.0, 30.0, 40.0, 50.0)
    angular_speed: Optional[Tuple[float, ...]] = None
    min_count: int = Field(default=5, ge=0)

    @field_validator("depth_mm", "speed", "angular_speed")
    @classmethod
    def _increasing(cls, value):
        if value is not None and (len(value) == 0 or any(b <= a for a, b in zip(value, value[1:]))):
            raise ValueError("cell centres must be nonempty and strictly increasing")
        return value

    def axes(self) -> List[str]:
        return [axis for axis in AXES if getattr(self, axis) is not None]


@dataclass
class SweepResult:
    """One row per grid cell: centres, trial count n, correct, accuracy, flagged"""

    cells: pd.DataFrame
    axes: List[str]
    runs: int

    @property
    def total(self) -> int:
        return int(self.cells["n"].sum())

    @property
    def overall_accuracy(self) -> float:
        return float(self.cells["correct"].sum() / (self.total * self.runs))


def trial_conditions(entry: IndexEntry) -> Dict[str, Optional[float]]:
    """Sampled depth, linear speed and angular speed of a trial"""
    motion = entry.motion
    kind = motion.kind
    if kind.slides:
        speed: Optional[float] = motion.slide_speed_mm_s
    elif kind.taps:
        speed = motion.compound_tap_speed_mm_s if kind.is_compound else motion.tap_speed_mm_s
    else:
        speed = None
    return {
        "depth_mm": motion.depth_mm,
        "speed": speed,
        "angular_speed": motion.angular_speed_deg_s if kind.rotates else None,
    }


def _edges(centres: Sequence[float]) -> List[float]:
    mids = [(a + b) / 2 for a, b in zip(centres, centres[1:])]
    return [-np.inf, *mids, np.inf]


def bucket_trials(entries: Sequence[IndexEntry], grid: GridSpec) -> pd.DataFrame:
    """Per-trial cell assignment (one categorical column per axis)"""
    frame = pd.DataFrame([trial_conditions(entry) for entry in entries])
    for axis in grid.axes():
        if frame[axis].isna().any():
            raise ArgumentError(f"trials without a sampled {axis} cannot be bucketed on it")
        centres = list(getattr(grid, axis))
        frame[axis] = pd.cut(frame[axis].astype(float), bins=_edges(centres), labels=centres, right=False)
    return frame[grid.axes()]


def sweep_from_evaluation(evaluation: Evaluation, grid: Optional[GridSpec] = None) -> SweepResult:
    grid = grid or GridSpec()
    if evaluation.entries is None:
        raise ArgumentError("sweep needs trials with index metadata")
    axes = grid.axes()
    frame = bucket_trials(evaluation.entries, grid)
    frame["n"] = 1
    frame["correct"] = evaluation.correct().sum(axis=0)

    cells = frame.groupby(axes, observed=False)[["n", "correct"]].sum().reset_index()
    for axis in axes:
        cells[axis] = cells[axis].astype(float)
    runs = evaluation.n_models
    cells["accuracy"] = np.where(cells["n"] > 0, cells["correct"] / (cells["n"] * runs).clip(lower=1), np.nan)
    cells["flagged"] = cells["n"] < grid.min_count

    flagged = int(cells["flagged"].sum())
    if flagged:
        logger.warning(f"{flagged} of {len(cells)} sweep cells hold fewer than {grid.min_count} trials")
    return SweepResult(cells=cells, axes=axes, runs=runs)


def generalization_sweep(
    models: Union[Model, Sequence[Model]],
    dataset: TrialSet,
    grid: Optional[GridSpec] = None,
    jobs: Optional[int] = None,
) -> SweepResult:
    """Per-cell accuracy of full-length predictions on a varied-condition dataset"""
    return sweep_from_evaluation(evaluate(models, dataset, jobs=jobs), grid)


def marginals(result: SweepResult) -> Dict[str, pd.DataFrame]:
    """Accuracy per value of each axis, pooled over the other axes"""
    out: Dict[str, pd.DataFrame] = {}
    for axis in result.axes:
        grouped = result.cells.groupby(axis)[["n", "correct"]].sum().reset_index()
        grouped["accuracy"] = np.where(
            grouped["n"] > 0, grouped["correct"] / (grouped["n"] * result.runs).clip(lower=1), np.nan
        )
        out[axis] = grouped
    return out
