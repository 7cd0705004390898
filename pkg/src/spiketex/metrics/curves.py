"""
Accuracy against sample length and convergence to the final accuracy
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

from ..core.errors import ArgumentError
from .evaluation import DEFAULT_STEP_MS, Evaluation, Model, Samples, evaluate

DEFAULT_BAND = 0.05
_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CurvePoint:
    length_ms: float
    accuracy: float
    runs: int
    std: float = 0.0


@dataclass(frozen=True)
class AccuracyCurve:
    """Mean accuracy over runs at each sample length"""

    points: List[CurvePoint]
    motion: Optional[str] = None

    def __post_init__(self) -> None:
        lengths = [p.length_ms for p in self.points]
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ArgumentError("curve lengths must be strictly increasing")
        if any(not 0.0 <= p.accuracy <= 1.0 for p in self.points):
            raise ArgumentError("curve accuracies must lie in [0, 1]")

    @property
    def lengths(self) -> np.ndarray:
        return np.array([p.length_ms for p in self.points])

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([p.accuracy for p in self.points])

    @property
    def final_accuracy(self) -> float:
        return self.points[-1].accuracy


@dataclass(frozen=True)
class ConvergenceReport:
    final_accuracy: float
    band: float
    time_to_band_ms: float


def curve_from_evaluation(evaluation: Evaluation, motion: Optional[str] = None) -> AccuracyCurve:
    """Per-model accuracy at every length, averaged over models (runs)"""
    hits = evaluation.prefix_predictions == evaluation.labels[None, :, None]
    per_run = hits.sum(axis=1) / evaluation.n_trials  # (models, lengths)
    points = [
        CurvePoint(
            length_ms=float(length),
            accuracy=float(per_run[:, j].mean()),
            runs=evaluation.n_models,
            std=float(per_run[:, j].std()),
        )
        for j, length in enumerate(evaluation.lengths_ms)
    ]
    return AccuracyCurve(points, motion)


def accuracy_vs_length(
    models: Union[Model, Sequence[Model]],
    test_set: Samples,
    step_ms: float = DEFAULT_STEP_MS,
    jobs: Optional[int] = None,
    motion: Optional[str] = None,
) -> AccuracyCurve:
    """Accuracy of predictions on the first L ms of every trial, L = step, 2 step, ..."""
    return curve_from_evaluation(evaluate(models, test_set, step_ms, jobs), motion)


def time_to_band(curve: AccuracyCurve, band: float = DEFAULT_BAND) -> ConvergenceReport:
    """
    Smallest length from which the accuracy stays at or above final - band.

    Scans backwards from the final point; the final point is always inside
    the band, so a curve that only reaches it at the end reports its length.
    """
    if not curve.points:
        raise ArgumentError("empty curve")
    if band < 0:
        raise ArgumentError("band must be nonnegative")
    accuracies = curve.accuracies
    floor = curve.final_accuracy - band - _TOLERANCE
    first = len(accuracies) - 1
    while first > 0 and accuracies[first - 1] >= floor:
        first -= 1
    return ConvergenceReport(curve.final_accuracy, band, float(curve.lengths[first]))


def curve_trend(curve: AccuracyCurve) -> Dict[str, Optional[float]]:
    """Spearman rank correlation between sample length and accuracy"""
    accuracies = curve.accuracies
    if len(curve.points) < 2 or accuracies.max() == accuracies.min():
        return {"spearman_rho": None, "p_value": None}
    rho, p_value = stats.spearmanr(curve.lengths, accuracies)
    return {"spearman_rho": float(rho), "p_value": float(p_value)}


def rank_motions(
    curves: Mapping[str, AccuracyCurve],
    threshold: float = 0.95,
    k: int = 2,
    band: float = DEFAULT_BAND,
) -> List[str]:
    """
    Motions whose final accuracy exceeds `threshold`, fastest to converge
    first (ties by higher final accuracy, then name); at most `k`.
    """
    eligible = []
    for name, curve in curves.items():
        if curve.final_accuracy > threshold:
            report = time_to_band(curve, band)
            eligible.append((report.time_to_band_ms, -report.final_accuracy, name))
    return [name for _, _, name in sorted(eligible)[:k]]
