"""
Integrate-and-fire neuron dynamics

One update per time step:

    v <- v + input
    s  = 1 where v >= threshold
    v <- v - threshold * s       (subtract reset)   |   v <- v * (1 - s)   (reset to zero)
    v <- max(v, lower_bound)     (when a floor is configured)

There is no leak. The same update runs in inference (hard threshold) and in
training, where the threshold step is replaced by a surrogate spike function.
"""

from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import ArgumentError, NumericError

SpikeFn = Callable[[torch.Tensor], torch.Tensor]
TensorLike = Union[np.ndarray, torch.Tensor]


class ResetMode(str, Enum):
    SUBTRACT = "subtract-threshold"
    ZERO = "to-zero"


class IFConfig(BaseModel):
    """Integrate-and-fire neuron parameters"""

    model_config = ConfigDict(frozen=True)

    threshold: float = Field(default=1.0, gt=0.0)
    reset: ResetMode = ResetMode.SUBTRACT
    lower_bound: Optional[float] = 0.0


def integrate(
    v: torch.Tensor,
    current: torch.Tensor,
    cfg: IFConfig,
    spike_fn: Optional[SpikeFn] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Unchecked IF update used inside the simulation loop"""
    v = v + current
    if spike_fn is None:
        s = (v >= cfg.threshold).to(v.dtype)
    else:
        s = spike_fn(v - cfg.threshold)
    if cfg.reset is ResetMode.SUBTRACT:
        v = v - cfg.threshold * s
    else:
        v = v * (1.0 - s)
    if cfg.lower_bound is not None:
        v = torch.clamp(v, min=cfg.lower_bound)
    return v, s


def if_step(
    state: TensorLike, input_current: TensorLike, cfg: Optional[IFConfig] = None
) -> Tuple[TensorLike, TensorLike]:
    """
    One IF step on membrane `state` with `input_current`.

    Accepts numpy arrays or torch tensors and returns the same kind.
    Raises ArgumentError on shape mismatch, NumericError on non-finite input.
    """
    cfg = cfg or IFConfig()
    as_numpy = isinstance(state, np.ndarray)
    v = torch.as_tensor(state, dtype=torch.float64) if as_numpy else state
    x = torch.as_tensor(input_current, dtype=v.dtype)

    if v.shape != x.shape:
        raise ArgumentError(f"membrane shape {tuple(v.shape)} != input shape {tuple(x.shape)}")
    if not torch.isfinite(x).all() or not torch.isfinite(v).all():
        raise NumericError(
            "non-finite membrane or input current",
            {"nonfinite_inputs": int((~torch.isfinite(x)).sum())},
        )

    v_next, spikes = integrate(v, x, cfg)
    if as_numpy:
        return v_next.numpy(), spikes.numpy().astype(np.uint8)
    return v_next, spikes
