"""
Event-rate power model

    P [mW] = idle_mw + e_synop [nJ] * synop_rate [1/s] * 1e-6
                     + e_event [nJ] * event_rate [1/s] * 1e-6

The idle term is fixed; the two energies are fitted by nonnegative least
squares on (rate, measured power) observations. With a rank-deficient design
only the coefficient of the column with the larger norm is fitted (synop on
ties) and the other is held at 0.
"""

from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import nnls

from ..core.errors import ArgumentError, CalibrationError
from ..utils.logging import get_logger
from .evaluation import Evaluation

logger = get_logger(__name__)

IDLE_MW = 2.42
CHIP_OPERATION_MW = 6.53
NJ_PER_S_TO_MW = 1e-6

# average chip power while classifying each exploratory motion
MOTION_POWER_MW: Dict[str, float] = {
    "TapRotate": 8.47,
    "TapSlide": 8.13,
    "SlideRotate": 8.04,
    "Slide": 7.01,
    "Tap": 4.47,
    "Rotate": 3.06,
}

# (idle, operation) power per device, in watts
DEVICE_POWER_W: Dict[str, Tuple[float, float]] = {
    "CPU": (53.75, 67.00),
    "GPU": (15.95, 16.31),
    "Speck2f": (IDLE_MW * 1e-3, CHIP_OPERATION_MW * 1e-3),
}

Rate = Union[float, np.ndarray]


class PowerObservation(NamedTuple):
    synop_rate: float
    event_rate: float
    power_mw: float


class PowerModel(BaseModel):
    """Affine power model; energies in nJ per operation"""

    model_config = ConfigDict(frozen=True)

    idle_mw: float = Field(default=IDLE_MW, ge=0.0)
    energy_per_synop_nj: float = Field(default=0.0, ge=0.0)
    energy_per_input_event_nj: float = Field(default=0.0, ge=0.0)
    residuals_mw: Tuple[float, ...] = ()

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residuals_mw)) if self.residuals_mw else 0.0


def estimate_power(model: PowerModel, synop_rate: Rate, event_rate: Rate) -> Rate:
    """Power in mW for synop and input event rates per second"""
    synop = np.asarray(synop_rate, dtype=np.float64)
    events = np.asarray(event_rate, dtype=np.float64)
    if np.any(synop < 0) or np.any(events < 0) or not (np.all(np.isfinite(synop)) and np.all(np.isfinite(events))):
        raise ArgumentError("rates must be finite and nonnegative")
    dynamic = model.energy_per_synop_nj * synop + model.energy_per_input_event_nj * events
    power = model.idle_mw + dynamic * NJ_PER_S_TO_MW
    return float(power) if power.ndim == 0 else power


def calibrate_power(
    observations: Sequence[Union[PowerObservation, Tuple[float, float, float]]],
    idle_mw: float = IDLE_MW,
) -> PowerModel:
    """Fit both energies by NNLS with the idle power held fixed"""
    if len(observations) == 0:
        raise CalibrationError("no observations to calibrate on")
    data = np.asarray([tuple(o) for o in observations], dtype=np.float64)
    if not np.all(np.isfinite(data)) or np.any(data[:, :2] < 0):
        raise CalibrationError("observations must be finite with nonnegative rates")

    design = data[:, :2] * NJ_PER_S_TO_MW
    target = data[:, 2] - idle_mw
    rank = np.linalg.matrix_rank(design)
    coefficients = np.zeros(2)

    if rank == 0:
        raise CalibrationError("degenerate design: every observation has zero rates")
    if rank == 1:
        norms = np.linalg.norm(design, axis=0)
        column = 0 if norms[0] >= norms[1] else 1
        coefficients[column] = nnls(design[:, [column]], target)[0][0]
        logger.warning(
            f"Rank-deficient power calibration: fitting only the "
            f"{'synop' if column == 0 else 'input event'} energy"
        )
    else:
        coefficients = nnls(design, target)[0]

    residuals = design @ coefficients - target
    return PowerModel(
        idle_mw=idle_mw,
        energy_per_synop_nj=float(coefficients[0]),
        energy_per_input_event_nj=float(coefficients[1]),
        residuals_mw=tuple(float(r) for r in residuals),
    )


def fit_leave_one_out(
    observations: Mapping[str, Union[PowerObservation, Tuple[float, float, float]]],
    idle_mw: float = IDLE_MW,
) -> pd.DataFrame:
    """Calibrate on all motions but one and predict the held-out motion, for each motion"""
    if len(observations) < 2:
        raise CalibrationError("leave-one-out needs at least two observations")
    rows = []
    for held_out, obs in observations.items():
        obs = PowerObservation(*obs)
        rest = [PowerObservation(*o) for name, o in observations.items() if name != held_out]
        model = calibrate_power(rest, idle_mw)
        predicted = estimate_power(model, obs.synop_rate, obs.event_rate)
        rows.append(
            {
                "motion": held_out,
                "measured_mw": obs.power_mw,
                "predicted_mw": predicted,
                "relative_error": abs(predicted - obs.power_mw) / obs.power_mw,
            }
        )
    return pd.DataFrame(rows)


def device_comparison(chip_mw: Optional[float] = None) -> pd.DataFrame:
    """Idle and operation power per device, with operation power relative to the chip"""
    table = dict(DEVICE_POWER_W)
    if chip_mw is not None:
        table["Speck2f"] = (table["Speck2f"][0], chip_mw * 1e-3)
    chip_operation = table["Speck2f"][1]
    return pd.DataFrame(
        [
            {
                "device": device,
                "idle_w": idle,
                "operation_w": operation,
                "dynamic_w": operation - idle,
                "operation_vs_chip": operation / chip_operation,
            }
            for device, (idle, operation) in table.items()
        ]
    )


def activity_rates(evaluation: Evaluation, model: int = 0) -> PowerObservation:
    """Mean synop and input event rates (per second) over the evaluated trials; power left at 0"""
    seconds = evaluation.durations_ms / 1000.0
    synop_rate = float(np.mean(evaluation.synops[model] / seconds))
    event_rate = float(np.mean(evaluation.input_events / seconds))
    return PowerObservation(synop_rate, event_rate, 0.0)


def motion_power_table(
    model: PowerModel, rates: Mapping[str, PowerObservation]
) -> pd.DataFrame:
    """Estimated power per motion from its activity rates, next to the reference value when known"""
    rows: List[Dict[str, object]] = []
    for motion, obs in rates.items():
        rows.append(
            {
                "motion": motion,
                "synop_rate": obs.synop_rate,
                "event_rate": obs.event_rate,
                "estimated_mw": estimate_power(model, obs.synop_rate, obs.event_rate),
                "reference_mw": MOTION_POWER_MW.get(motion, np.nan),
            }
        )
    return pd.DataFrame(rows).sort_values("estimated_mw", ascending=False, kind="stable").reset_index(drop=True)
