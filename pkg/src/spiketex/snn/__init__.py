"""Integrate-and-fire spiking convolutional network, surrogate-gradient training and synop accounting."""

from .network import (
    ForwardTrace,
    LayerKind,
    LayerSpec,
    NetworkSpec,
    Parameters,
    PoolKind,
    count_synops,
    forward,
    forward_batch,
    init_params,
    predict,
    predict_from_scores,
    spec_hash,
)
from .neurons import IFConfig, ResetMode, if_step
from .params_io import load_params, save_params
from .surrogate import SurrogateKind, SurrogateSpec, spike_function
from .training import Hyperparams, TrainingLog, TrainingResult, surrogate_grad, train

__all__ = [
    "ForwardTrace",
    "Hyperparams",
    "IFConfig",
    "LayerKind",
    "LayerSpec",
    "NetworkSpec",
    "Parameters",
    "PoolKind",
    "ResetMode",
    "SurrogateKind",
    "SurrogateSpec",
    "TrainingLog",
    "TrainingResult",
    "count_synops",
    "forward",
    "forward_batch",
    "if_step",
    "init_params",
    "load_params",
    "predict",
    "predict_from_scores",
    "save_params",
    "spec_hash",
    "spike_function",
    "surrogate_grad",
    "train",
]
