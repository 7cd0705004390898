"""Confusion matrix of full-length predictions"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..core.errors import ArgumentError
from .evaluation import Evaluation, Model, Samples, evaluate

NUM_CLASSES = 10


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[true - 1, predicted - 1]"""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def per_class_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def per_class_recall(self) -> np.ndarray:
        rows = self.per_class_counts()
        return np.divide(np.diag(self.counts), rows, out=np.full(len(rows), np.nan), where=rows > 0)


def confusion_from_predictions(
    labels: Sequence[int], predictions: Sequence[int], num_classes: int = NUM_CLASSES
) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise ArgumentError("labels and predictions differ in length")
    if labels.size and (labels.min() < 1 or labels.max() > num_classes or predictions.min() < 1 or predictions.max() > num_classes):
        raise ArgumentError(f"class ids must lie in 1..{num_classes}")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels - 1, predictions - 1), 1)
    return ConfusionMatrix(counts)


def confusion_from_evaluation(evaluation: Evaluation, model: int = 0) -> ConfusionMatrix:
    return confusion_from_predictions(evaluation.labels, evaluation.predictions[model])


def confusion(
    model: Union[Model, Sequence[Model]], test_set: Samples, jobs: Optional[int] = None
) -> ConfusionMatrix:
    """Confusion matrix of the (first) model on the test set"""
    return confusion_from_evaluation(evaluate(model, test_set, jobs=jobs))
