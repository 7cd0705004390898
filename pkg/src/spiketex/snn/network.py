"""
Spiking convolutional network

A NetworkSpec is an ordered list of layers following the pattern

    (Conv -> IF -> Pool) x n, then (Linear -> IF) x m, then Linear (readout)

simulated step by step over the input's time axis with per-trial zeroed
membranes. The readout is the final linear layer's activation accumulated over
time; class scores after k steps are the running sum of the first k per-step
readouts, so a prefix of the input yields exactly the prefix of the scores.

Synaptic operations are counted in events: every spike (or input event count)
entering a Conv or Linear layer costs its fan-out. Average pooling is
accounted as sum pooling of events, so counts stay integral.
"""

import re
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..aer.transforms import SpikeTensor
from ..core.cache import stable_hash
from ..core.errors import ArgumentError, NumericError
from .neurons import IFConfig, SpikeFn, integrate

NUM_CLASSES = 10
_PATTERN = re.compile(r"(CIP)+(LI)*L")


class LayerKind(str, Enum):
    CONV = "conv"
    POOL = "pool"
    LINEAR = "linear"
    IF = "if"


class PoolKind(str, Enum):
    SUM = "sum"
    AVG = "avg"


_KIND_CODES = {LayerKind.CONV: "C", LayerKind.IF: "I", LayerKind.POOL: "P", LayerKind.LINEAR: "L"}


class LayerSpec(BaseModel):
    """One layer; only the fields of its kind are meaningful"""

    model_config = ConfigDict(frozen=True)

    kind: LayerKind
    out_channels: Optional[int] = Field(default=None, gt=0)
    kernel: int = Field(default=3, gt=0)
    stride: int = Field(default=1, gt=0)
    padding: int = Field(default=0, ge=0)
    pool: PoolKind = PoolKind.AVG
    window: int = Field(default=2, gt=0)
    out_features: Optional[int] = Field(default=None, gt=0)
    neuron: IFConfig = Field(default_factory=IFConfig)

    @model_validator(mode="after")
    def _kind_fields(self) -> "LayerSpec":
        if self.kind is LayerKind.CONV and self.out_channels is None:
            raise ValueError("conv layer needs out_channels")
        if self.kind is LayerKind.LINEAR and self.out_features is None:
            raise ValueError("linear layer needs out_features")
        return self

    @classmethod
    def conv(cls, out_channels: int, kernel: int = 3, stride: int = 1, padding: int = 1) -> "LayerSpec":
        return cls(kind=LayerKind.CONV, out_channels=out_channels, kernel=kernel, stride=stride, padding=padding)

    @classmethod
    def pooling(cls, window: int = 2, kind: PoolKind = PoolKind.AVG) -> "LayerSpec":
        return cls(kind=LayerKind.POOL, window=window, pool=kind)

    @classmethod
    def linear(cls, out_features: int) -> "LayerSpec":
        return cls(kind=LayerKind.LINEAR, out_features=out_features)

    @classmethod
    def spiking(cls, neuron: Optional[IFConfig] = None) -> "LayerSpec":
        return cls(kind=LayerKind.IF, neuron=neuron or IFConfig())

    @property
    def synaptic(self) -> bool:
        return self.kind in (LayerKind.CONV, LayerKind.LINEAR)


class NetworkSpec(BaseModel):
    """
    Layer stack plus the (channels, height, width) of one input time step.

    `time_stride` is part of the model: parameters trained on summed bins are
    only valid when inference sums the same bins.
    """

    model_config = ConfigDict(frozen=True)

    layers: Tuple[LayerSpec, ...]
    input_shape: Tuple[int, int, int] = (1, 20, 20)
    num_classes: int = Field(default=NUM_CLASSES, gt=1)
    time_stride: int = Field(default=1, ge=1, description="input bins summed into one simulation step")

    @model_validator(mode="after")
    def _structure(self) -> "NetworkSpec":
        codes = "".join(_KIND_CODES[layer.kind] for layer in self.layers)
        if not _PATTERN.fullmatch(codes):
            raise ValueError(f"layer pattern {codes!r} is not (Conv IF Pool)+ (Linear IF)* Linear")
        if self.layers[-1].out_features != self.num_classes:
            raise ValueError(f"readout has {self.layers[-1].out_features} outputs, expected {self.num_classes}")
        self.layer_shapes()
        return self

    @classmethod
    def default(cls, input_channels: int = 1) -> "NetworkSpec":
        return cls(
            layers=(
                LayerSpec.conv(16),
                LayerSpec.spiking(),
                LayerSpec.pooling(2),
                LayerSpec.conv(32),
                LayerSpec.spiking(),
                LayerSpec.pooling(2),
                LayerSpec.linear(256),
                LayerSpec.spiking(),
                LayerSpec.linear(64),
                LayerSpec.spiking(),
                LayerSpec.linear(NUM_CLASSES),
            ),
            input_shape=(input_channels, 20, 20),
        )

    def layer_names(self) -> List[str]:
        return [f"{layer.kind.value}{i}" for i, layer in enumerate(self.layers)]

    def layer_shapes(self) -> List[Tuple[int, ...]]:
        """Output shape (without batch) of every layer"""
        shape: Tuple[int, ...] = tuple(self.input_shape)
        shapes = []
        for i, layer in enumerate(self.layers):
            if layer.kind is LayerKind.CONV:
                if len(shape) != 3:
                    raise ValueError(f"layer {i}: conv after flatten")
                _, h, w = shape
                k, s, p = layer.kernel, layer.stride, layer.padding
                shape = (layer.out_channels, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)
            elif layer.kind is LayerKind.POOL:
                c, h, w = shape
                shape = (c, h // layer.window, w // layer.window)
            elif layer.kind is LayerKind.LINEAR:
                shape = (layer.out_features,)
            if min(shape) <= 0:
                raise ValueError(f"layer {i} ({layer.kind.value}) has empty output shape {shape}")
            shapes.append(shape)
        return shapes

    def parameter_shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
        previous: Tuple[int, ...] = tuple(self.input_shape)
        for name, layer, out in zip(self.layer_names(), self.layers, self.layer_shapes()):
            if layer.kind is LayerKind.CONV:
                shapes[f"{name}.weight"] = (layer.out_channels, previous[0], layer.kernel, layer.kernel)
                shapes[f"{name}.bias"] = (layer.out_channels,)
            elif layer.kind is LayerKind.LINEAR:
                shapes[f"{name}.weight"] = (layer.out_features, int(np.prod(previous)))
                shapes[f"{name}.bias"] = (layer.out_features,)
            previous = out
        return shapes

    def with_input_channels(self, channels: int) -> "NetworkSpec":
        return NetworkSpec(layers=self.layers, input_shape=(channels, *self.input_shape[1:]), num_classes=self.num_classes)


def spec_hash(spec: NetworkSpec) -> str:
    """SHA-256 of the canonical JSON form of the spec"""
    return stable_hash(spec.model_dump(mode="json"))


@dataclass
class Parameters:
    """Named float32 weight and bias tensors of a network"""

    tensors: "OrderedDict[str, torch.Tensor]"
    seed: Optional[int] = None

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.tensors[name]

    def names(self) -> List[str]:
        return list(self.tensors)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Parameters):
            return NotImplemented
        return self.names() == other.names() and all(
            torch.equal(self.tensors[n], other.tensors[n]) for n in self.tensors
        )

    def clone(self) -> "Parameters":
        return Parameters(OrderedDict((n, t.detach().clone()) for n, t in self.tensors.items()), self.seed)

    def as_dtype(self, dtype: torch.dtype) -> Dict[str, torch.Tensor]:
        return {n: t.to(dtype) for n, t in self.tensors.items()}

    def check_shapes(self, spec: NetworkSpec) -> None:
        expected = spec.parameter_shapes()
        found = {n: tuple(t.shape) for n, t in self.tensors.items()}
        if found != dict(expected):
            raise ArgumentError(f"parameter shapes {found} do not match the network {dict(expected)}")

    def check_finite(self) -> None:
        bad = [n for n, t in self.tensors.items() if not torch.isfinite(t).all()]
        if bad:
            raise NumericError(f"non-finite parameters in {', '.join(bad)}", {"tensors": bad})


def init_params(spec: NetworkSpec, seed: int = 0) -> Parameters:
    """Kaiming fan-in normal weights, zero biases"""
    generator = torch.Generator().manual_seed(seed)
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for name, shape in spec.parameter_shapes().items():
        if name.endswith(".bias"):
            tensors[name] = torch.zeros(shape, dtype=torch.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            std = float(np.sqrt(2.0 / fan_in))
            tensors[name] = torch.randn(shape, generator=generator, dtype=torch.float32) * std
    return Parameters(tensors, seed)


@lru_cache(maxsize=64)
def _conv_fanout(in_shape: Tuple[int, int, int], out_channels: int, kernel: int, stride: int, padding: int) -> torch.Tensor:
    """Number of (output channel, output position) pairs each input unit feeds"""
    with torch.enable_grad():
        unit = torch.ones((1, *in_shape), dtype=torch.float64, requires_grad=True)
        ones = torch.ones((out_channels, in_shape[0], kernel, kernel), dtype=torch.float64)
        F.conv2d(unit, ones, stride=stride, padding=padding).sum().backward()
    return unit.grad[0].detach()


def fanout_map(spec: NetworkSpec, index: int) -> torch.Tensor:
    """Per-input-unit fan-out of synaptic layer `index` (shape of its input)"""
    layer = spec.layers[index]
    in_shape = tuple(spec.input_shape) if index == 0 else spec.layer_shapes()[index - 1]
    if layer.kind is LayerKind.CONV:
        return _conv_fanout(in_shape, layer.out_channels, layer.kernel, layer.stride, layer.padding)
    if layer.kind is LayerKind.LINEAR:
        return torch.full((int(np.prod(in_shape)),), float(layer.out_features), dtype=torch.float64)
    raise ArgumentError(f"layer {index} is not synaptic")


@dataclass
class BatchTrace:
    """Per-step bookkeeping of a batched simulation (tensors lead with batch, time)"""

    readout_steps: torch.Tensor
    cumulative: torch.Tensor
    spike_counts: Dict[str, torch.Tensor]
    synops: Dict[str, torch.Tensor]
    spikes: Optional[Dict[str, torch.Tensor]] = None
    membranes: Optional[Dict[str, torch.Tensor]] = None


def forward_batch(
    spec: NetworkSpec,
    weights: Union[Parameters, Mapping[str, torch.Tensor]],
    x: torch.Tensor,
    spike_fn: Optional[SpikeFn] = None,
    collect: bool = False,
    record_spikes: bool = False,
    record_membranes: bool = False,
) -> Tuple[torch.Tensor, Optional[BatchTrace]]:
    """
    Simulate a batch x of shape (batch, t_steps, C, H, W).

    Returns the time-summed readout (batch, num_classes) and, with `collect`,
    the per-step trace. `spike_fn=None` uses the hard threshold; training
    passes a surrogate spike function. The dtype of x sets the compute dtype.
    """
    if x.ndim != 5 or tuple(x.shape[2:]) != tuple(spec.input_shape):
        raise ArgumentError(f"input shape {tuple(x.shape)} does not match (batch, t, {spec.input_shape})")
    if x.shape[1] == 0:
        raise ArgumentError("input has no time steps")
    if isinstance(weights, Parameters):
        weights = weights.as_dtype(x.dtype)

    names = spec.layer_names()
    batch, t_steps = x.shape[:2]
    record_spikes = record_spikes and collect
    record_membranes = record_membranes and collect
    fanouts = {
        i: fanout_map(spec, i).to(x.dtype) for i, layer in enumerate(spec.layers) if layer.synaptic
    } if collect else {}

    membranes: Dict[str, torch.Tensor] = {}
    acc = torch.zeros((batch, spec.num_classes), dtype=x.dtype)
    steps: List[torch.Tensor] = []
    cumulative: List[torch.Tensor] = []
    spike_counts: Dict[str, List[torch.Tensor]] = {}
    synops: Dict[str, List[torch.Tensor]] = {}
    spikes: Dict[str, List[torch.Tensor]] = {}
    potentials: Dict[str, List[torch.Tensor]] = {}

    for t in range(t_steps):
        h = x[:, t]
        events = h
        for i, (name, layer) in enumerate(zip(names, spec.layers)):
            if layer.kind is LayerKind.CONV:
                if collect:
                    synops.setdefault(name, []).append((events * fanouts[i]).flatten(1).sum(1))
                    if record_spikes:
                        spikes.setdefault(name, []).append(events)
                h = F.conv2d(h, weights[f"{name}.weight"], weights[f"{name}.bias"], stride=layer.stride, padding=layer.padding)
            elif layer.kind is LayerKind.LINEAR:
                h, events = h.flatten(1), events.flatten(1)
                if collect:
                    synops.setdefault(name, []).append(events.sum(1) * float(layer.out_features))
                    if record_spikes:
                        spikes.setdefault(name, []).append(events)
                h = F.linear(h, weights[f"{name}.weight"], weights[f"{name}.bias"])
            elif layer.kind is LayerKind.POOL:
                w = layer.window
                if layer.pool is PoolKind.AVG:
                    h = F.avg_pool2d(h, w)
                else:
                    h = F.avg_pool2d(h, w, divisor_override=1)
                if collect:
                    events = F.avg_pool2d(events, w, divisor_override=1)
            else:
                v = membranes.get(name)
                if v is None:
                    v = torch.zeros_like(h)
                v, h = integrate(v, h, layer.neuron, spike_fn)
                membranes[name] = v
                events = h
                if collect:
                    spike_counts.setdefault(name, []).append(h.flatten(1).sum(1))
                    if record_membranes:
                        potentials.setdefault(name, []).append(v)
        acc = acc + h
        if collect:
            steps.append(h)
            cumulative.append(acc)

    if not collect:
        return acc, None

    def stack(series: Dict[str, List[torch.Tensor]]) -> Dict[str, torch.Tensor]:
        return {name: torch.stack(values, dim=1) for name, values in series.items()}

    trace = BatchTrace(
        readout_steps=torch.stack(steps, dim=1),
        cumulative=torch.stack(cumulative, dim=1),
        spike_counts=stack(spike_counts),
        synops=stack(synops),
        spikes=stack(spikes) if record_spikes else None,
        membranes=stack(potentials) if record_membranes else None,
    )
    return acc, trace


@dataclass(frozen=True)
class ForwardTrace:
    """Per-step record of one trial's simulation"""

    spike_counts: Dict[str, np.ndarray]  # IF layer -> (t_steps,)
    synops: Dict[str, np.ndarray]  # synaptic layer -> (t_steps,)
    readout_steps: np.ndarray  # (t_steps, num_classes)
    cumulative: np.ndarray  # running class scores
    input_events: int
    spikes: Optional[Dict[str, np.ndarray]] = field(default=None)
    membranes: Optional[Dict[str, np.ndarray]] = field(default=None)

    @property
    def t_steps(self) -> int:
        return int(self.readout_steps.shape[0])

    @property
    def scores(self) -> np.ndarray:
        return self.cumulative[-1]

    def prefix_scores(self, steps: int) -> np.ndarray:
        if not 1 <= steps <= self.t_steps:
            raise ArgumentError(f"prefix of {steps} steps outside 1..{self.t_steps}")
        return self.cumulative[steps - 1]


def _trial_trace(trace: BatchTrace, i: int, input_events: int) -> ForwardTrace:
    def pick(series: Optional[Dict[str, torch.Tensor]]) -> Optional[Dict[str, np.ndarray]]:
        if series is None:
            return None
        return {name: values[i].detach().cpu().numpy() for name, values in series.items()}

    return ForwardTrace(
        spike_counts=pick(trace.spike_counts),
        synops=pick(trace.synops),
        readout_steps=trace.readout_steps[i].detach().cpu().numpy(),
        cumulative=trace.cumulative[i].detach().cpu().numpy(),
        input_events=input_events,
        spikes=pick(trace.spikes),
        membranes=pick(trace.membranes),
    )


def _prepare(spec: NetworkSpec, params: Parameters, tensor: SpikeTensor) -> torch.Tensor:
    if tuple(tensor.counts.shape[1:]) != tuple(spec.input_shape):
        raise ArgumentError(
            f"spike tensor shape {tensor.counts.shape} does not match network input {spec.input_shape}"
        )
    params.check_shapes(spec)
    params.check_finite()
    tensor = tensor.time_downsample(spec.time_stride)
    return torch.from_numpy(tensor.counts.astype(np.float64))[None]


def forward(
    spec: NetworkSpec,
    params: Parameters,
    tensor: SpikeTensor,
    record_spikes: bool = False,
    record_membranes: bool = False,
) -> Tuple[np.ndarray, ForwardTrace]:
    """Class scores (time-summed readout) and the trace of one trial, in float64"""
    x = _prepare(spec, params, tensor)
    with torch.no_grad():
        _, trace = forward_batch(
            spec, params, x, collect=True, record_spikes=record_spikes, record_membranes=record_membranes
        )
    result = _trial_trace(trace, 0, tensor.total())
    return result.scores.copy(), result


def predict_from_scores(scores: np.ndarray) -> Union[int, np.ndarray]:
    """1-based argmax over the last axis; ties go to the lowest class id"""
    scores = np.asarray(scores)
    labels = np.argmax(scores, axis=-1) + 1
    return int(labels) if labels.ndim == 0 else labels


def predict(spec: NetworkSpec, params: Parameters, tensor: SpikeTensor) -> int:
    scores, _ = forward(spec, params, tensor)
    return predict_from_scores(scores)


def count_synops(trace: ForwardTrace) -> Dict[str, int]:
    """Per synaptic layer and total synaptic operations of a trial"""
    per_layer = {name: int(round(float(values.sum()))) for name, values in trace.synops.items()}
    per_layer["total"] = sum(per_layer.values())
    return per_layer


def stack_tensors(tensors: Sequence[SpikeTensor], dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(batch, t, C, H, W) input batch from equally shaped spike tensors"""
    return torch.from_numpy(np.stack([t.counts for t in tensors]).astype(np.float64)).to(dtype)
