"""
Report writers

CSV tables through pandas, a JSON summary, and whitespace-separated `.dat`
plot data (commented header) that gnuplot reads directly.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd

from ..utils.logging import success
from .confusion import ConfusionMatrix
from .curves import AccuracyCurve, ConvergenceReport, curve_trend
from .power import PowerModel
from .sweep import SweepResult

PathLike = Union[str, Path]


def curve_frame(curve: AccuracyCurve) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "length_ms": curve.lengths,
            "accuracy": curve.accuracies,
            "n": [p.runs for p in curve.points],
        }
    )


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    frame = result.cells.rename(columns={"angular_speed": "angular_speed_deg_s"})
    leading = [c for c in ("depth_mm", "speed", "angular_speed_deg_s") if c in frame.columns]
    return frame[[*leading, "accuracy", "n", "correct", "flagged"]]


def _prepare(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_frame(frame: pd.DataFrame, output_path: PathLike) -> Path:
    """CSV, or whitespace-separated plot data when the suffix is .dat"""
    output_path = Path(output_path)
    try:
        _prepare(output_path)
        if output_path.suffix == ".dat":
            with output_path.open("w", encoding="utf-8") as f:
                f.write("# " + " ".join(frame.columns) + "\n")
                frame.to_csv(f, sep=" ", index=False, header=False, na_rep="nan", float_format="%.6f")
        else:
            frame.to_csv(output_path, index=False, encoding="utf-8", float_format="%.6f")
    except OSError as e:
        raise type(e)(f"Failed to write report {output_path}: {e}") from e
    success(f"Report saved to {output_path}")
    return output_path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def save_json(payload: Dict[str, Any], output_path: PathLike) -> Path:
    output_path = Path(output_path)
    try:
        with _prepare(output_path).open("w", encoding="utf-8") as f:
            json.dump(_jsonable(payload), f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise type(e)(f"Failed to write report {output_path}: {e}") from e
    return output_path


def summary(
    curve: Optional[AccuracyCurve] = None,
    convergence: Optional[ConvergenceReport] = None,
    matrix: Optional[ConfusionMatrix] = None,
    power: Optional[PowerModel] = None,
    power_table: Optional[pd.DataFrame] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """JSON-ready bundle of whatever results a command produced"""
    out: Dict[str, Any] = {}
    if curve is not None:
        out["curve"] = {
            "motion": curve.motion,
            "final_accuracy": curve.final_accuracy,
            "trend": curve_trend(curve),
        }
    if convergence is not None:
        out["convergence"] = {
            "final_accuracy": convergence.final_accuracy,
            "band": convergence.band,
            "time_to_band_ms": convergence.time_to_band_ms,
        }
    if matrix is not None:
        out["confusion"] = {
            "counts": matrix.counts,
            "accuracy": matrix.accuracy,
            "per_class_recall": matrix.per_class_recall(),
        }
    if power is not None:
        out["power_model"] = power.model_dump(mode="json") | {"residual_norm_mw": power.residual_norm}
    if power_table is not None:
        out["power"] = power_table.to_dict(orient="records")
    if extra:
        out.update(extra)
    return out


def write_reports(out_dir: PathLike, frames: Dict[str, pd.DataFrame], payload: Dict[str, Any], plot_data: bool = True) -> Iterable[Path]:
    """Write each frame as `<name>.csv` (plus `<name>.dat`) and the summary as `summary.json`"""
    out_dir = Path(out_dir)
    written = []
    for name, frame in frames.items():
        written.append(save_frame(frame, out_dir / f"{name}.csv"))
        if plot_data:
            written.append(save_frame(frame, out_dir / f"{name}.dat"))
    written.append(save_json(payload, out_dir / "summary.json"))
    return written
