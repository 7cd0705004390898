"""
Surrogate-gradient training

Backpropagation through time over the full simulation, the Heaviside spike
replaced in the backward pass by a surrogate derivative. The loss is the
cross-entropy of the time-summed readout. Optimisation is Adam over shuffled
mini-batches; the parameters with the best validation accuracy are returned.

All randomness (initialisation, validation split, batch order) derives from
the seed, torch runs with deterministic algorithms and a fixed thread count.
"""

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field

from ..aer.transforms import SpikeTensor
from ..core.config import settings
from ..core.errors import ArgumentError, NumericError, TrainingDivergedError
from ..utils.logging import get_logger, success
from .network import NetworkSpec, Parameters, forward_batch, init_params, stack_tensors
from .surrogate import SurrogateSpec, spike_function

logger = get_logger(__name__)

PathLike = Union[str, Path]
Sample = Tuple[SpikeTensor, int]

LOG_COLUMNS = ["epoch", "split", "loss", "accuracy"]
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class Hyperparams(BaseModel):
    """Training configuration; reported next to the training log"""

    model_config = ConfigDict(frozen=True)

    lr: float = Field(default=1e-3, ge=0.0)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=16, ge=1)
    seed: int = Field(default=0, ge=0)
    time_stride: int = Field(default=1, ge=1, description="bins summed per simulation step")
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    dtype: str = Field(default="float32", pattern="^float(32|64)$")
    surrogate: SurrogateSpec = Field(default_factory=SurrogateSpec)

    @property
    def torch_dtype(self) -> torch.dtype:
        return _DTYPES[self.dtype]


@dataclass
class TrainingLog:
    """Per-epoch loss/accuracy rows plus the configuration that produced them"""

    hyperparams: Hyperparams
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def add(self, epoch: int, split: str, loss: float, accuracy: float) -> None:
        self.rows.append({"epoch": epoch, "split": split, "loss": loss, "accuracy": accuracy})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=LOG_COLUMNS)

    def write(self, path: PathLike) -> Path:
        """CSV log at `path`, training configuration as JSON next to it"""
        path = Path(path)
        meta = {
            "algorithm": "surrogate-gradient BPTT",
            "loss": "cross-entropy on time-summed readout",
            "optimizer": "Adam",
            "selection": "best validation accuracy",
            "hyperparams": self.hyperparams.model_dump(mode="json"),
        }
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.to_frame().to_csv(path, index=False, float_format="%.6f")
            path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        except OSError as e:
            raise type(e)(f"Failed to write training log {path}: {e}") from e
        return path


@dataclass
class TrainingResult:
    params: Parameters
    log: TrainingLog
    best_epoch: int
    best_accuracy: Optional[float]
    spec: Optional[NetworkSpec] = None  # the trained spec, time stride included


@dataclass
class GradientResult:
    loss: float
    grads: Dict[str, torch.Tensor]
    scores: torch.Tensor


def _batch(
    samples: Sequence[Sample], dtype: torch.dtype, time_stride: int = 1
) -> Tuple[torch.Tensor, torch.Tensor]:
    tensors = [s if time_stride == 1 else s.time_downsample(time_stride) for s, _ in samples]
    labels = [int(label) for _, label in samples]
    if any(not 1 <= label <= 10 for label in labels):
        raise ArgumentError(f"labels must lie in 1..10, got {sorted(set(labels))}")
    return stack_tensors(tensors, dtype), torch.tensor(labels, dtype=torch.long) - 1


def _check_loss(loss: torch.Tensor, scores: torch.Tensor, context: Dict[str, Any]) -> Dict[str, Any]:
    diagnostics = {
        **context,
        "loss": float(loss.detach()),
        "max_abs_score": float(scores.detach().abs().nan_to_num(float("inf")).max()),
        "nonfinite_scores": int((~torch.isfinite(scores.detach())).sum()),
    }
    return diagnostics


def surrogate_grad(
    spec: NetworkSpec,
    params: Parameters,
    surrogate: SurrogateSpec,
    batch: Sequence[Sample],
    dtype: torch.dtype = torch.float64,
    relaxed: bool = False,
) -> GradientResult:
    """
    Summed cross-entropy over the batch and its parameter gradients.

    `relaxed=True` also smooths the forward spike (see surrogate module), for
    comparison against finite differences.
    """
    if not batch:
        raise ArgumentError("empty batch")
    params.check_shapes(spec)
    weights = {n: t.detach().to(dtype).clone().requires_grad_(True) for n, t in params.tensors.items()}
    x, targets = _batch(batch, dtype, spec.time_stride)
    scores, _ = forward_batch(spec, weights, x, spike_fn=spike_function(surrogate, relaxed))
    loss = F.cross_entropy(scores, targets, reduction="sum")
    if not torch.isfinite(loss):
        raise NumericError("non-finite loss", _check_loss(loss, scores, {"batch_size": len(batch)}))
    loss.backward()
    grads = {n: w.grad.detach().clone() for n, w in weights.items()}
    return GradientResult(float(loss.detach()), grads, scores.detach())


def with_time_stride(spec: NetworkSpec, stride: int) -> NetworkSpec:
    """Spec that sums `stride` bins per step; a spec already fixed to another stride is an error"""
    if stride == 1 or spec.time_stride == stride:
        return spec
    if spec.time_stride != 1:
        raise ArgumentError(f"network already uses time stride {spec.time_stride}, got {stride}")
    return spec.model_copy(update={"time_stride": stride})


def _configure_torch() -> None:
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(settings.torch_threads)


def _validation_split(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    order = rng.permutation(n)
    n_val = int(round(n * fraction))
    n_val = min(n_val, n - 1)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _evaluate(
    spec: NetworkSpec,
    weights: Dict[str, torch.Tensor],
    samples: Sequence[Sample],
    hyper: Hyperparams,
) -> Tuple[float, float]:
    total_loss, correct = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(samples), hyper.batch_size):
            chunk = samples[start : start + hyper.batch_size]
            x, targets = _batch(chunk, hyper.torch_dtype, spec.time_stride)
            scores, _ = forward_batch(spec, weights, x)
            total_loss += float(F.cross_entropy(scores, targets, reduction="sum"))
            correct += int((scores.argmax(dim=1) == targets).sum())
    return total_loss / len(samples), correct / len(samples)


def _snapshot(weights: Dict[str, torch.Tensor], seed: Optional[int]) -> Parameters:
    return Parameters(OrderedDict((n, w.detach().to(torch.float32).clone()) for n, w in weights.items()), seed)


def train(
    spec: NetworkSpec,
    dataset: Sequence[Sample],
    hyper: Optional[Hyperparams] = None,
    val_set: Optional[Sequence[Sample]] = None,
    init: Optional[Parameters] = None,
    log_path: Optional[PathLike] = None,
) -> TrainingResult:
    """
    Train on `dataset` (any indexable sequence of (SpikeTensor, label)).

    Without an explicit `val_set`, `val_fraction` of the dataset is held out.
    A non-finite loss aborts with TrainingDivergedError carrying the best
    parameters seen so far. The result carries the spec with `time_stride`
    applied; save and evaluate the parameters with that spec.
    """
    hyper = hyper or Hyperparams()
    spec = with_time_stride(spec, hyper.time_stride)
    if len(dataset) == 0:
        raise ArgumentError("training set is empty")
    _configure_torch()
    torch.manual_seed(hyper.seed)

    if val_set is None and hyper.val_fraction > 0 and len(dataset) > 1:
        train_pos, val_pos = _validation_split(len(dataset), hyper.val_fraction, hyper.seed)
        val_samples: List[Sample] = [dataset[int(i)] for i in val_pos]
    else:
        train_pos = np.arange(len(dataset))
        val_samples = list(val_set) if val_set is not None else []

    start = init.clone() if init is not None else init_params(spec, hyper.seed)
    start.check_shapes(spec)
    weights = {n: t.to(hyper.torch_dtype).clone().requires_grad_(True) for n, t in start.tensors.items()}
    optimizer = torch.optim.Adam(list(weights.values()), lr=hyper.lr)
    spike_fn = spike_function(hyper.surrogate)

    log = TrainingLog(hyper)
    best = _snapshot(weights, hyper.seed)
    best_epoch, best_accuracy = 0, None
    logger.info(
        f"Training on {len(train_pos)} trials ({len(val_samples)} held out) for {hyper.epochs} epochs"
    )

    for epoch in range(1, hyper.epochs + 1):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=hyper.seed, spawn_key=(1, epoch)))
        order = train_pos[rng.permutation(len(train_pos))]
        total_loss, correct = 0.0, 0

        for b, first in enumerate(range(0, len(order), hyper.batch_size)):
            chunk = [dataset[int(i)] for i in order[first : first + hyper.batch_size]]
            x, targets = _batch(chunk, hyper.torch_dtype, spec.time_stride)
            scores, _ = forward_batch(spec, weights, x, spike_fn=spike_fn)
            loss = F.cross_entropy(scores, targets)
            if not torch.isfinite(loss):
                diagnostics = _check_loss(loss, scores, {"epoch": epoch, "batch": b})
                raise TrainingDivergedError(
                    f"loss became non-finite in epoch {epoch}, batch {b}", best, diagnostics
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(chunk)
            correct += int((scores.detach().argmax(dim=1) == targets).sum())

        train_loss, train_acc = total_loss / len(order), correct / len(order)
        log.add(epoch, "train", train_loss, train_acc)

        if val_samples:
            val_loss, val_acc = _evaluate(spec, weights, val_samples, hyper)
            log.add(epoch, "val", val_loss, val_acc)
            if best_accuracy is None or val_acc > best_accuracy:
                best, best_epoch, best_accuracy = _snapshot(weights, hyper.seed), epoch, val_acc
            logger.info(
                f"Epoch {epoch}/{hyper.epochs}: loss {train_loss:.4f}, train acc {train_acc:.3f}, "
                f"val acc {val_acc:.3f}"
            )
        else:
            best, best_epoch = _snapshot(weights, hyper.seed), epoch
            logger.info(f"Epoch {epoch}/{hyper.epochs}: loss {train_loss:.4f}, train acc {train_acc:.3f}")

    if log_path is not None:
        log.write(log_path)
    success(f"Training finished; best epoch {best_epoch}")
    return TrainingResult(best, log, best_epoch, best_accuracy, spec)
