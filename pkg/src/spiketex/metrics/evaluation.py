"""
Per-trial evaluation shared by every metric

Each trial runs once per model at full length. Because class scores are a
running sum over time steps, the prediction for any prefix length is read off
the same trace, and it equals the prediction on the clipped tensor. Trials are
independent and may run in worker processes; results are collected in trial
order so reports do not depend on the worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from ..aer.io import read_events
from ..aer.transforms import PreprocessConfig, SpikeTensor, clip_steps, preprocess
from ..core.config import settings
from ..core.errors import ArgumentError
from ..sim.dataset import IndexEntry, TrialSet
from ..snn.network import NetworkSpec, Parameters, count_synops, forward, predict_from_scores
from ..utils.logging import get_logger, success

logger = get_logger(__name__)

DEFAULT_STEP_MS = 50


@dataclass(frozen=True)
class Model:
    """A network spec with trained parameters"""

    spec: NetworkSpec
    params: Parameters
    name: str = "model"


@dataclass(frozen=True)
class TrialOutcome:
    label: int
    prefix_predictions: np.ndarray  # (models, lengths)
    predictions: np.ndarray  # (models,) full length
    synops: np.ndarray  # (models,)
    input_events: int
    duration_ms: float


@dataclass
class Evaluation:
    """Outcomes of every (model, trial) pair plus the trial metadata"""

    model_names: List[str]
    lengths_ms: List[float]
    labels: np.ndarray  # (trials,)
    prefix_predictions: np.ndarray  # (models, trials, lengths)
    predictions: np.ndarray  # (models, trials)
    synops: np.ndarray  # (models, trials)
    input_events: np.ndarray  # (trials,)
    durations_ms: np.ndarray  # (trials,)
    entries: Optional[List[IndexEntry]] = None

    @property
    def n_trials(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_models(self) -> int:
        return len(self.model_names)

    def correct(self) -> np.ndarray:
        """(models, trials) full-length hits"""
        return self.predictions == self.labels[None, :]

    def accuracy(self, model: Optional[int] = None) -> float:
        hits = self.correct() if model is None else self.correct()[model : model + 1]
        return float(hits.sum() / hits.size)


def length_grid(duration_ms: float, step_ms: float = DEFAULT_STEP_MS) -> List[float]:
    """step, 2*step, ... up to the tensor duration"""
    if step_ms <= 0:
        raise ArgumentError("step_ms must be positive")
    count = int(np.floor(duration_ms / step_ms + 1e-9))
    if count < 1:
        raise ArgumentError(f"step {step_ms} ms exceeds the {duration_ms} ms trial length")
    return [step_ms * k for k in range(1, count + 1)]


def _evaluate_tensor(models: Sequence[Model], tensor: SpikeTensor, label: int, lengths: Sequence[float]) -> TrialOutcome:
    prefix = np.zeros((len(models), len(lengths)), dtype=np.int64)
    full = np.zeros(len(models), dtype=np.int64)
    synops = np.zeros(len(models), dtype=np.int64)
    for m, model in enumerate(models):
        # forward sums `time_stride` bins per step; prefixes are counted in those steps
        stepped = tensor.time_downsample(model.spec.time_stride)
        steps = [clip_steps(stepped, length) for length in lengths]
        scores, trace = forward(model.spec, model.params, tensor)
        prefix[m] = [predict_from_scores(trace.prefix_scores(k)) for k in steps]
        full[m] = predict_from_scores(scores)
        synops[m] = count_synops(trace)["total"]
    return TrialOutcome(label, prefix, full, synops, tensor.total(), tensor.duration_ms)


def _evaluate_file(job: Tuple[List[Model], str, PreprocessConfig, int, List[float]]) -> TrialOutcome:
    models, path, cfg, label, lengths = job
    torch.set_num_threads(settings.torch_threads)
    return _evaluate_tensor(models, preprocess(read_events(path), cfg), label, lengths)


Samples = Union[TrialSet, Sequence[Tuple[SpikeTensor, int]]]


def evaluate(
    models: Union[Model, Sequence[Model]],
    samples: Samples,
    step_ms: float = DEFAULT_STEP_MS,
    jobs: Optional[int] = None,
    allow_train: bool = False,
) -> Evaluation:
    """
    Run every model on every trial of `samples`.

    `samples` is a TrialSet (parallel-capable, carries index metadata) or any
    sequence of (SpikeTensor, label). TrialSets must not contain training
    trials unless `allow_train` is set.
    """
    models = [models] if isinstance(models, Model) else list(models)
    if not models:
        raise ArgumentError("no models to evaluate")
    if len(samples) == 0:
        raise ArgumentError("evaluation set is empty")
    jobs = jobs or settings.jobs

    entries: Optional[List[IndexEntry]] = None
    if isinstance(samples, TrialSet):
        entries = samples.entries
        if not allow_train and any(entry.split == "train" for entry in entries):
            raise ArgumentError("evaluation set contains training trials")
        duration = samples.cfg.t_steps * samples.cfg.dt_us / 1000.0
    else:
        duration = samples[0][0].duration_ms
    lengths = length_grid(duration, step_ms)
    logger.info(f"Evaluating {len(models)} model(s) on {len(samples)} trials, {len(lengths)} lengths")

    if isinstance(samples, TrialSet) and jobs > 1:
        work = [
            (models, str(samples.index.path_of(entry)), samples.cfg, entry.texture_id, lengths)
            for entry in entries
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_file, work, chunksize=max(1, len(work) // (jobs * 4))))
    else:
        outcomes = []
        for i in range(len(samples)):
            tensor, label = samples[i]
            if tensor.duration_ms != duration:
                raise ArgumentError("all evaluation tensors must have the same length")
            outcomes.append(_evaluate_tensor(models, tensor, int(label), lengths))

    result = Evaluation(
        model_names=[model.name for model in models],
        lengths_ms=lengths,
        labels=np.array([o.label for o in outcomes], dtype=np.int64),
        prefix_predictions=np.stack([o.prefix_predictions for o in outcomes], axis=1),
        predictions=np.stack([o.predictions for o in outcomes], axis=1),
        synops=np.stack([o.synops for o in outcomes], axis=1),
        input_events=np.array([o.input_events for o in outcomes], dtype=np.int64),
        durations_ms=np.array([o.duration_ms for o in outcomes], dtype=np.float64),
        entries=entries,
    )
    success(f"Evaluated {result.n_trials} trials: accuracy {result.accuracy():.4f}")
    return result
