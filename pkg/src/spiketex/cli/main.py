"""
Command-line entry point for spiketex

Usage:
    spiketex gen-dataset --manifest fixed_sliding --out data/sliding
    spiketex train --data data/sliding --out models/sliding --epochs 20
    spiketex eval --model models/sliding --data data/sliding --out reports/sliding
    spiketex curve --model models/sliding --data data/sliding --step 50 --out reports/sliding
    spiketex sweep --model models/varied --data data/varied --out reports/varied
    spiketex power-report --data data/sliding --model models/sliding --out reports/power
    spiketex inspect data/sliding/trials/00000.aer

Exit codes: 0 success, 1 operational failure, 2 usage error. Every command
that has an output directory leaves a `run-<command>.json` record there;
inspect only prints unless it is given --out.
"""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Type, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from ..aer.io import EVENT_MAGIC, TENSOR2_MAGIC, TENSOR_MAGIC, read_events, read_spike_tensor, sniff_magic
from ..core.config import settings
from ..core.errors import CalibrationError, FormatError, SpiketexError, UsageError
from ..metrics.confusion import confusion_from_evaluation
from ..metrics.curves import curve_from_evaluation, time_to_band
from ..metrics.evaluation import Evaluation, Model, evaluate
from ..metrics.power import (
    MOTION_POWER_MW,
    PowerModel,
    PowerObservation,
    activity_rates,
    calibrate_power,
    device_comparison,
    fit_leave_one_out,
    motion_power_table,
)
from ..metrics.reports import curve_frame, save_frame, save_json, summary, sweep_frame, write_reports
from ..metrics.sweep import marginals, sweep_from_evaluation
from ..sim.dataset import DatasetIndex, TrialSet, build_dataset, load_index, resolve_manifest
from ..snn.network import NetworkSpec, spec_hash
from ..snn.params_io import MAGIC as PARAMS_MAGIC
from ..snn.params_io import describe_params, load_params, save_params
from ..snn.training import train
from ..utils.logging import error, info, setup_logging, success
from .records import ExperimentConfig, RunRecord, Stopwatch, load_config

M = TypeVar("M", bound=BaseModel)

MODEL_FILE = "model.snnp"
NETWORK_FILE = "network.json"


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad input"""

    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


@dataclass
class RunContext:
    """Filled in by a command as it learns where its outputs go"""

    out_dir: Optional[Path] = None
    seed: Optional[int] = None
    artifacts: List[Path] = field(default_factory=list)

    def add(self, *paths: Path) -> None:
        self.artifacts.extend(Path(p) for p in paths)


# =====================
# Argument Parsing
# =====================

def build_parser() -> CommandParser:
    common = CommandParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Global seed (overrides config and manifest)")
    common.add_argument("--jobs", type=int, default=None, help=f"Worker processes (default: {settings.jobs})")
    common.add_argument("--config", type=Path, default=None, help="Experiment config file (JSON or TOML)")
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
        help=f"Set log level (default: {settings.log_level})",
    )

    parser = CommandParser(
        prog="spiketex",
        description="Simulated neuromorphic tactile texture classification experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage:")[1] if __doc__ else None,
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = commands.add_parser("gen-dataset", parents=[common], help="Simulate a dataset from a manifest")
    gen.add_argument("--manifest", default=None, help="Manifest file or preset name")
    gen.add_argument("--out", type=Path, default=None, help="Dataset directory")

    tr = commands.add_parser("train", parents=[common], help="Train a network on a dataset's train split")
    tr.add_argument("--data", type=Path, default=None, help="Dataset directory")
    tr.add_argument("--out", type=Path, default=None, help="Model directory")
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--time-stride", type=int, default=None, help="Bins summed per simulation step")

    ev = commands.add_parser("eval", parents=[common], help="Full-length accuracy and confusion on the test split")
    ev.add_argument("--model", type=Path, action="append", default=None, help="Model directory or .snnp file")
    ev.add_argument("--data", type=Path, default=None)
    ev.add_argument("--out", type=Path, default=None)

    cu = commands.add_parser("curve", parents=[common], help="Accuracy against sample length")
    cu.add_argument("--model", type=Path, action="append", default=None, help="Repeat for independent runs")
    cu.add_argument("--data", type=Path, default=None)
    cu.add_argument("--step", dest="step_ms", type=float, default=None, help="Length step in ms (default: 50)")
    cu.add_argument("--band", type=float, default=None, help="Error band (default: 0.05)")
    cu.add_argument("--out", type=Path, default=None)

    sw = commands.add_parser("sweep", parents=[common], help="Accuracy per depth/speed cell")
    sw.add_argument("--model", type=Path, action="append", default=None)
    sw.add_argument("--data", type=Path, default=None)
    sw.add_argument("--min-count", type=int, default=None, help="Flag cells with fewer trials")
    sw.add_argument("--out", type=Path, default=None)

    pw = commands.add_parser("power-report", parents=[common], help="Calibrated power estimates per motion")
    pw.add_argument("--data", type=Path, action="append", default=None, help="Repeat once per motion dataset")
    pw.add_argument("--model", type=Path, action="append", default=None, help="One model, or one per --data")
    pw.add_argument("--power-model", type=Path, default=None, help="Use this PowerModel JSON instead of calibrating")
    pw.add_argument("--out", type=Path, default=None)

    ins = commands.add_parser("inspect", parents=[common], help="Describe an event, spike tensor or parameter file")
    ins.add_argument("file", type=Path)
    ins.add_argument(
        "--out", type=Path, default=None, help="Also write inspect.json and a run record here (no record without it)"
    )

    return parser


# =====================
# Helpers
# =====================

def _require(value: Any, flag: str) -> Any:
    if value is None:
        raise UsageError(f"{flag} is required (flag or config file)")
    return value


def _read_json_model(model: Type[M], path: Path, what: str) -> M:
    """Parse a pydantic model from a JSON file; bad content is a FormatError naming the file"""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise type(e)(f"Failed to read {what} {path}: {e}") from e
    try:
        return model.model_validate_json(raw)
    except ValidationError as e:
        raise FormatError(f"invalid {what} {path}: {e}") from e


def _network(config: ExperimentConfig, channels: int) -> NetworkSpec:
    if config.network is None:
        return NetworkSpec.default(input_channels=channels)
    return _read_json_model(NetworkSpec, config.network, "network spec")


def _load_models(paths: Optional[Sequence[Path]], config: ExperimentConfig) -> List[Model]:
    paths = list(paths or ([config.params_path] if config.params_path else []))
    _require(paths or None, "--model")
    channels = settings.preprocess_config().channels
    models = []
    for path in paths:
        params_file = path / MODEL_FILE if path.is_dir() else path
        sibling = params_file.parent / NETWORK_FILE
        if sibling.exists():
            spec = _read_json_model(NetworkSpec, sibling, "network spec")
        else:
            spec = _network(config, channels)
        models.append(Model(spec, load_params(params_file, spec), name=str(path)))
    return models


def _motion_name(index: DatasetIndex) -> str:
    motion = (index.manifest or {}).get("motion") or {}
    if "kind" in motion:
        return str(motion["kind"])
    if index.trials:
        return index.trials[0].motion.kind.value
    return index.name


def _test_split(config: ExperimentConfig, data: Optional[Path]) -> TrialSet:
    index = load_index(_require(data or config.data_dir, "--data"))
    return TrialSet(index, "test", settings.preprocess_config())


def _out_dir(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> Path:
    out = _require(getattr(args, "out", None) or config.report_dir, "--out")
    ctx.out_dir = Path(out)
    return ctx.out_dir


def _predictions_frame(evaluation: Evaluation) -> pd.DataFrame:
    frame = pd.DataFrame({"trial": range(evaluation.n_trials), "label": evaluation.labels})
    if evaluation.entries is not None:
        frame["trial"] = [entry.id for entry in evaluation.entries]
    for m in range(evaluation.n_models):
        frame[f"predicted_{m}"] = evaluation.predictions[m]
        frame[f"synops_{m}"] = evaluation.synops[m]
    frame["input_events"] = evaluation.input_events
    return frame


# =====================
# Commands
# =====================

def cmd_gen_dataset(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    manifest = resolve_manifest(_require(args.manifest or config.manifest, "--manifest"))
    if config.seed is not None:
        manifest = manifest.model_copy(update={"seed": config.seed})
    ctx.seed = manifest.seed
    out = Path(_require(args.out or config.data_dir, "--out"))
    ctx.out_dir = out
    index = build_dataset(manifest, out, jobs=config.jobs)
    ctx.add(out / "index.json", *(out / entry.file for entry in index.trials))


def cmd_train(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    out = _out_dir(args, config, ctx)
    ctx.seed = config.hyperparams.seed
    index = load_index(_require(args.data or config.data_dir, "--data"))
    preprocess_cfg = settings.preprocess_config()
    spec = _network(config, preprocess_cfg.channels)
    train_set = TrialSet(index, "train", preprocess_cfg)

    result = train(spec, train_set, config.hyperparams, log_path=out / "train_log.csv")
    spec = result.spec or spec
    save_params(result.params, spec, out / MODEL_FILE)
    network_path = out / NETWORK_FILE
    network_path.write_text(spec.model_dump_json(indent=2) + "\n", encoding="utf-8")
    ctx.add(out / MODEL_FILE, network_path, out / "train_log.csv", out / "train_log.json")
    info(f"Network {spec_hash(spec)[:12]} trained; best epoch {result.best_epoch}")


def cmd_eval(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    out = _out_dir(args, config, ctx)
    ctx.seed = config.seed
    models = _load_models(args.model, config)
    evaluation = evaluate(models, _test_split(config, args.data), config.step_ms, config.jobs)
    matrix = confusion_from_evaluation(evaluation)
    labels = [str(i) for i in range(1, matrix.counts.shape[0] + 1)]
    ctx.add(
        save_frame(pd.DataFrame(matrix.counts, index=labels, columns=labels).reset_index(names="true"), out / "confusion.csv"),
        save_frame(_predictions_frame(evaluation), out / "predictions.csv"),
        save_json(
            summary(
                matrix=matrix,
                extra={
                    "accuracy": evaluation.accuracy(),
                    "per_model_accuracy": [evaluation.accuracy(m) for m in range(evaluation.n_models)],
                    "trials": evaluation.n_trials,
                    "mean_synops": float(evaluation.synops.mean()),
                },
            ),
            out / "summary.json",
        ),
    )


def cmd_curve(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    out = _out_dir(args, config, ctx)
    ctx.seed = config.seed
    test_set = _test_split(config, args.data)
    evaluation = evaluate(_load_models(args.model, config), test_set, config.step_ms, config.jobs)
    curve = curve_from_evaluation(evaluation, motion=_motion_name(test_set.index))
    report = time_to_band(curve, config.band)
    ctx.add(*write_reports(out, {"curve": curve_frame(curve)}, summary(curve=curve, convergence=report)))
    info(f"{curve.motion}: final accuracy {report.final_accuracy:.4f}, within band from {report.time_to_band_ms:g} ms")


def cmd_sweep(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    out = _out_dir(args, config, ctx)
    ctx.seed = config.seed
    grid = config.grid if args.min_count is None else config.grid.model_copy(update={"min_count": args.min_count})
    evaluation = evaluate(_load_models(args.model, config), _test_split(config, args.data), config.step_ms, config.jobs)
    result = sweep_from_evaluation(evaluation, grid)
    frame = sweep_frame(result)
    ctx.add(save_frame(frame, out / "sweep.csv"), save_frame(frame, out / "sweep.dat"))
    for axis, table in marginals(result).items():
        ctx.add(save_frame(table, out / f"marginal_{axis}.csv"))
    ctx.add(
        save_json(
            summary(
                extra={
                    "overall_accuracy": result.overall_accuracy,
                    "trials": result.total,
                    "flagged_cells": int(result.cells["flagged"].sum()),
                    "axes": result.axes,
                }
            ),
            out / "summary.json",
        )
    )


def cmd_power_report(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    out = _out_dir(args, config, ctx)
    ctx.seed = config.seed
    data_dirs = _require(args.data or ([config.data_dir] if config.data_dir else None), "--data")
    models = _load_models(args.model, config)
    if len(models) not in (1, len(data_dirs)):
        raise UsageError("give one --model, or one --model per --data")

    rates: Dict[str, PowerObservation] = {}
    for i, data in enumerate(data_dirs):
        test_set = _test_split(config, data)
        model = models[i] if len(models) > 1 else models[0]
        rates[_motion_name(test_set.index)] = activity_rates(evaluate(model, test_set, config.step_ms, config.jobs))

    observations = {
        motion: PowerObservation(obs.synop_rate, obs.event_rate, MOTION_POWER_MW[motion])
        for motion, obs in rates.items()
        if motion in MOTION_POWER_MW
    }
    if args.power_model is not None:
        power = _read_json_model(PowerModel, args.power_model, "power model")
    elif observations:
        power = calibrate_power(list(observations.values()))
    else:
        raise CalibrationError("no dataset matches a motion with a reference power")

    extra: Dict[str, Any] = {}
    if len(observations) >= 3:
        loo = fit_leave_one_out(observations)
        ctx.add(save_frame(loo, out / "leave_one_out.csv"))
        extra["leave_one_out_max_relative_error"] = float(loo["relative_error"].max())

    table = motion_power_table(power, rates)
    ctx.add(
        save_frame(table, out / "power.csv"),
        save_frame(table[["motion", "estimated_mw", "reference_mw"]], out / "power.dat"),
        save_frame(device_comparison(), out / "devices.csv"),
        save_json(power.model_dump(mode="json"), out / "power_model.json"),
        save_json(summary(power=power, power_table=table, extra=extra), out / "summary.json"),
    )


def describe_file(path: Path) -> Dict[str, Any]:
    magic = sniff_magic(path)
    if magic == EVENT_MAGIC:
        stream = read_events(path)
        return {
            "format": "events",
            "width": stream.width,
            "height": stream.height,
            "duration_us": stream.duration_us,
            "events": len(stream),
            "polarity": stream.count_by_polarity(),
            "t_range_us": [int(stream.t[0]), int(stream.t[-1])] if len(stream) else None,
        }
    if magic in (TENSOR_MAGIC, TENSOR2_MAGIC):
        tensor = read_spike_tensor(path)
        return {
            "format": "spike-tensor",
            "shape": list(tensor.counts.shape),
            "dt_us": tensor.dt_us,
            "total": tensor.total(),
            "active_steps": int(np.count_nonzero(tensor.counts.reshape(tensor.t_steps, -1).sum(axis=1))),
        }
    if magic == PARAMS_MAGIC:
        return describe_params(path)
    raise FormatError(f"{path}: unrecognised file magic {magic!r}")


def cmd_inspect(args: argparse.Namespace, config: ExperimentConfig, ctx: RunContext) -> None:
    description = {"file": str(args.file), **describe_file(args.file)}
    print(json.dumps(description, indent=2, sort_keys=True))
    if args.out is not None:
        ctx.out_dir = args.out
        ctx.add(save_json(description, args.out / "inspect.json"))


COMMANDS: Dict[str, Callable[[argparse.Namespace, ExperimentConfig, RunContext], None]] = {
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "curve": cmd_curve,
    "sweep": cmd_sweep,
    "power-report": cmd_power_report,
    "inspect": cmd_inspect,
}

_CONFIG_FLAGS = ("seed", "jobs", "epochs", "lr", "batch_size", "time_stride", "step_ms", "band")


# =====================
# Entry Point
# =====================

def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        error(f"Usage error: {e}")
        return 2
    except SystemExit as e:
        # --help / --version
        return 0 if e.code in (0, None) else 2

    setup_logging(level=args.log_level)
    watch = Stopwatch()
    ctx = RunContext()
    config: Optional[ExperimentConfig] = None
    exit_code = 0
    try:
        overrides = {name: getattr(args, name, None) for name in _CONFIG_FLAGS}
        config = load_config(args.config).merged(overrides)
        COMMANDS[args.command](args, config, ctx)
    except UsageError as e:
        error(f"Usage error: {e}")
        exit_code = 2
    except (SpiketexError, OSError) as e:
        error(f"{args.command} failed: {e}")
        exit_code = 1

    if ctx.out_dir is not None:
        record = RunRecord(
            command=args.command,
            argv=argv,
            config_hash=config.config_hash() if config is not None else "",
            seed=ctx.seed,
            wall_time_s=round(watch.elapsed(), 3),
            exit_code=exit_code,
            artifacts=sorted(_relative(p, ctx.out_dir) for p in ctx.artifacts),
        )
        try:
            record.write(ctx.out_dir)
        except OSError as e:
            error(str(e))
            exit_code = exit_code or 1
    if exit_code == 0:
        success(f"{args.command} finished in {watch.elapsed():.1f} s")
    return exit_code


def _relative(path: Path, root: Path) -> str:
    try:
        return str(Path(path).relative_to(root))
    except ValueError:
        return str(path)


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
