"""Accuracy curves, convergence, generalisation sweeps, confusion and the power model."""

from .confusion import ConfusionMatrix, confusion, confusion_from_predictions
from .curves import (
    AccuracyCurve,
    ConvergenceReport,
    CurvePoint,
    accuracy_vs_length,
    curve_trend,
    rank_motions,
    time_to_band,
)
from .evaluation import Evaluation, Model, evaluate
from .power import (
    MOTION_POWER_MW,
    PowerModel,
    PowerObservation,
    calibrate_power,
    device_comparison,
    estimate_power,
    fit_leave_one_out,
)
from .sweep import GridSpec, SweepResult, generalization_sweep, marginals

__all__ = [
    "AccuracyCurve",
    "ConfusionMatrix",
    "ConvergenceReport",
    "CurvePoint",
    "Evaluation",
    "GridSpec",
    "MOTION_POWER_MW",
    "Model",
    "PowerModel",
    "PowerObservation",
    "SweepResult",
    "accuracy_vs_length",
    "calibrate_power",
    "confusion",
    "confusion_from_predictions",
    "curve_trend",
    "device_comparison",
    "estimate_power",
    "evaluate",
    "fit_leave_one_out",
    "generalization_sweep",
    "marginals",
    "rank_motions",
    "time_to_band",
]
