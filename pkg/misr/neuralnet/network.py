# misr/neuralnet/network.py
"""
The multi-image network: three same-padded convolutions in LR space, a
stride-3 transposed convolution into HR space and a fixed mean over its 16
output channels. ReLU follows every layer, including the last one before
averaging.
"""
import math
from dataclasses import dataclass, fields
from typing import Dict, Iterator, Tuple

import numpy as np

from misr.errors import ShapeError
from misr.neuralnet.layers import channel_mean, conv2d, deconv2d, relu
from misr.neuralnet.tensor import Tensor
from misr.raster import SCALE, Image

N_INPUTS = 5
DECONV_STRIDE = SCALE
DECONV_PADDING = 3

LAYOUT: Tuple[Tuple[str, Tuple[int, ...]], ...] = (
    ("conv1_weight", (128, N_INPUTS, 5, 5)),
    ("conv1_bias", (128,)),
    ("conv2_weight", (64, 128, 3, 3)),
    ("conv2_bias", (64,)),
    ("conv3_weight", (9, 64, 3, 3)),
    ("conv3_bias", (9,)),
    ("deconv_weight", (9, 16, 9, 9)),
    ("deconv_bias", (16,)),
)
# The published figure for this architecture is 119,610; no integer deconvolution
# kernel size reproduces it with these layer widths, so the count stays 106,793.
PUBLISHED_PARAM_COUNT = 119_610
PARAM_COUNT = 106_793


@dataclass
class NetworkParams:
    conv1_weight: np.ndarray
    conv1_bias: np.ndarray
    conv2_weight: np.ndarray
    conv2_bias: np.ndarray
    conv3_weight: np.ndarray
    conv3_bias: np.ndarray
    deconv_weight: np.ndarray
    deconv_bias: np.ndarray

    def __post_init__(self):
        for name, shape in LAYOUT:
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def as_dict(self) -> Dict[str, np.ndarray]:
        return dict(self.items())

    def astype(self, dtype) -> "NetworkParams":
        return NetworkParams(**{name: arr.astype(dtype) for name, arr in self.items()})

    def copy(self) -> "NetworkParams":
        return NetworkParams(**{name: arr.copy() for name, arr in self.items()})

    def as_tensors(self) -> Dict[str, Tensor]:
        return {name: Tensor(arr, requires_grad=True) for name, arr in self.items()}

    @classmethod
    def zeros(cls, dtype=np.float32) -> "NetworkParams":
        return cls(**{name: np.zeros(shape, dtype=dtype) for name, shape in LAYOUT})


def _fan_in(name: str, shape: Tuple[int, ...]) -> int:
    if name.startswith("deconv"):
        # each output pixel sees ceil(k / stride)^2 taps of every input channel
        return shape[0] * math.ceil(shape[2] / DECONV_STRIDE) ** 2
    return shape[1] * shape[2] * shape[3]


def init_params(seed: int, dtype=np.float32) -> NetworkParams:
    """He-style fan-in initialisation (gain sqrt(2)) for the ReLU layers, zero biases."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in LAYOUT:
        if name.endswith("_bias"):
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            std = math.sqrt(2.0 / _fan_in(name, shape))
            arrays[name] = (rng.standard_normal(shape) * std).astype(dtype)
    return NetworkParams(**arrays)


def param_count(params: NetworkParams) -> int:
    return sum(arr.size for _, arr in params.items())


def predict(p: Dict[str, Tensor], x: Tensor) -> Tensor:
    """(B, 5, h, w) LR stack -> (B, 1, 3h, 3w) unclamped reconstruction."""
    if x.data.ndim != 4 or x.shape[1] != N_INPUTS:
        raise ShapeError(f"network expects (batch, {N_INPUTS}, h, w) input, got {x.shape}")
    batch, _, h, w = x.shape

    h1 = relu(conv2d(x, p["conv1_weight"], p["conv1_bias"]))
    h2 = relu(conv2d(h1, p["conv2_weight"], p["conv2_bias"]))
    h3 = relu(conv2d(h2, p["conv3_weight"], p["conv3_bias"]))
    for hidden, channels in ((h1, 128), (h2, 64), (h3, 9)):
        if hidden.shape != (batch, channels, h, w):
            raise ShapeError(f"hidden map {hidden.shape} left the {h}x{w} LR grid")

    h4 = relu(deconv2d(h3, p["deconv_weight"], p["deconv_bias"], stride=DECONV_STRIDE, padding=DECONV_PADDING))
    if h4.shape != (batch, 16, SCALE * h, SCALE * w):
        raise ShapeError(f"deconvolution produced {h4.shape}, expected {SCALE * h}x{SCALE * w}")
    return channel_mean(h4)


def forward(params: NetworkParams, lr_stack: np.ndarray) -> Image:
    """Super-resolve one (5, h, w) stack; the result is clamped to [0, 1] on export."""
    stack = np.asarray(lr_stack)
    if stack.ndim != 3:
        raise ShapeError(f"expected a (channels, h, w) stack, got {stack.shape}")
    tensors = {name: Tensor(arr) for name, arr in params.items()}
    out = predict(tensors, Tensor(stack[None].astype(params.conv1_weight.dtype)))
    return Image.clamped(out.data[0, 0].astype(np.float64))
