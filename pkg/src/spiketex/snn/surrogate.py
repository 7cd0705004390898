"""
Surrogate spike functions

The forward pass of a spike is the Heaviside step H(x >= 0) of the membrane
distance to threshold. Its derivative is replaced in the backward pass by a
bounded, nonnegative surrogate:

    fast-sigmoid (steepness k):  k / (2 * (1 + k|x|)^2)
    boxcar (width w):            1 / w on |x| < w / 2, 0 elsewhere (0 when w = 0)

Both integrate to one. The "relaxed" variants replace the forward step by the
surrogate's primitive, giving a smooth network whose exact gradients equal
the surrogate gradients; finite differences can be checked against it.
"""

from enum import Enum

import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .neurons import SpikeFn


class SurrogateKind(str, Enum):
    BOXCAR = "boxcar"
    FAST_SIGMOID = "fast-sigmoid"


class SurrogateSpec(BaseModel):
    """
    kind and its single shape parameter: boxcar full width, or fast-sigmoid
    steepness.
    """

    model_config = ConfigDict(frozen=True)

    kind: SurrogateKind = SurrogateKind.FAST_SIGMOID
    scale: float = Field(default=5.0, ge=0.0)

    @model_validator(mode="after")
    def _positive_steepness(self) -> "SurrogateSpec":
        if self.kind is SurrogateKind.FAST_SIGMOID and self.scale <= 0:
            raise ValueError("fast-sigmoid steepness must be > 0")
        return self

    def derivative(self, x: torch.Tensor) -> torch.Tensor:
        if self.kind is SurrogateKind.FAST_SIGMOID:
            k = self.scale
            return k / (2.0 * (1.0 + k * x.abs()) ** 2)
        w = self.scale
        if w == 0:
            return torch.zeros_like(x)
        return (x.abs() < w / 2).to(x.dtype) / w

    def primitive(self, x: torch.Tensor) -> torch.Tensor:
        """Smooth step whose derivative is `derivative`"""
        if self.kind is SurrogateKind.FAST_SIGMOID:
            k = self.scale
            return 0.5 + 0.5 * k * x / (1.0 + k * x.abs())
        w = self.scale
        if w == 0:
            return (x >= 0).to(x.dtype)
        return torch.clamp(x / w + 0.5, 0.0, 1.0)


class SurrogateSpike(torch.autograd.Function):
    """Heaviside forward, surrogate derivative backward"""

    @staticmethod
    def forward(ctx, x: torch.Tensor, spec: SurrogateSpec) -> torch.Tensor:
        ctx.save_for_backward(x)
        ctx.spec = spec
        return (x >= 0).to(x.dtype)

    @staticmethod
    def backward(ctx, grad_output: torch.Tensor):
        (x,) = ctx.saved_tensors
        return grad_output * ctx.spec.derivative(x), None


class RelaxedSpike(torch.autograd.Function):
    """Smooth primitive forward, the same surrogate derivative backward"""

    @staticmethod
    def forward(ctx, x: torch.Tensor, spec: SurrogateSpec) -> torch.Tensor:
        ctx.save_for_backward(x)
        ctx.spec = spec
        return spec.primitive(x)

    @staticmethod
    def backward(ctx, grad_output: torch.Tensor):
        (x,) = ctx.saved_tensors
        return grad_output * ctx.spec.derivative(x), None


def spike_function(spec: SurrogateSpec, relaxed: bool = False) -> SpikeFn:
    """Spike nonlinearity for training (or its relaxation for gradient checks)"""
    fn = RelaxedSpike if relaxed else SurrogateSpike
    return lambda x: fn.apply(x, spec)
