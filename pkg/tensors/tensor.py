"""
Tensor container and layer specifications.

A Tensor is a shape plus a flat row-major float32 buffer. It is the
exchange type between the kernels, the storage codec and the file formats.
"""
from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import DimensionError


@dataclass(frozen=True)
class Tensor:
    """Immutable float32 tensor stored as a flat row-major buffer."""

    shape: Tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        if not shape or any(d < 1 for d in shape):
            raise DimensionError(f'Tensor dimensions must be positive, got {shape}')
        data = np.ascontiguousarray(self.data, dtype=np.float32).reshape(-1)
        if data.size != math.prod(shape):
            raise DimensionError(
                f'Tensor of shape {shape} needs {math.prod(shape)} values, got {data.size}'
            )
        if not np.all(np.isfinite(data)):
            raise DimensionError('Tensor values must be finite')
        data.setflags(write=False)
        object.__setattr__(self, 'shape', shape)
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_array(cls, array) -> 'Tensor':
        array = np.asarray(array, dtype=np.float32)
        return cls(shape=array.shape or (1,), data=array.reshape(-1))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> 'Tensor':
        return cls(shape=tuple(shape), data=np.zeros(math.prod(shape), dtype=np.float32))

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Read-only view with the tensor's shape."""
        return self.data.reshape(self.shape)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)



class LayerKind(str, Enum):
    CONV2D = 'conv2d'
    FULLY_CONNECTED = 'fully-connected'
    BATCH_NORM = 'batch-norm'


@dataclass(frozen=True)
class LayerSpec:
    """
    Shape description of one layer, used for counting and for the model file.

    For batch-norm layers `in_channels == out_channels`. Spatial output
    sizes are optional: when they are None a conv layer is assumed to run
    at the model's input resolution (stride 1, same padding).
    """

    name: str
    kind: LayerKind
    in_channels: int
    out_channels: int
    kernel: int = 1
    h_out: Optional[int] = None
    w_out: Optional[int] = None
    stride: int = 1
    quantize_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'kind', LayerKind(self.kind))
        for label, value in (('in_channels', self.in_channels), ('out_channels', self.out_channels),
                             ('kernel', self.kernel), ('stride', self.stride)):
            if value < 1:
                raise DimensionError(f'{self.name}: {label} must be >= 1, got {value}')
        for label, value in (('h_out', self.h_out), ('w_out', self.w_out)):
            if value is not None and value < 1:
                raise DimensionError(f'{self.name}: {label} must be >= 1, got {value}')
        if self.kind is LayerKind.BATCH_NORM and self.quantize_flag:
            raise DimensionError(f'{self.name}: batch-norm layers are never quantized')

    @property
    def is_weighted(self) -> bool:
        return self.kind is not LayerKind.BATCH_NORM

    @property
    def weight_shape(self) -> Tuple[int, ...]:
        if self.kind is LayerKind.CONV2D:
            return (self.out_channels, self.in_channels, self.kernel, self.kernel)
        if self.kind is LayerKind.FULLY_CONNECTED:
            return (self.out_channels, self.in_channels)
        return (self.out_channels,)

    @property
    def weight_count(self) -> int:
        return math.prod(self.weight_shape) if self.is_weighted else 0

    def spatial(self, input_resolution: Optional[int] = None) -> Tuple[int, int]:
        """Output positions (H_out, W_out); fully-connected layers have one."""
        if self.kind is LayerKind.FULLY_CONNECTED:
            return 1, 1
        if self.h_out is not None and self.w_out is not None:
            return self.h_out, self.w_out
        if input_resolution is None:
            raise DimensionError(f'{self.name}: spatial size unknown and no input resolution given')
        return input_resolution, input_resolution


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """H_out = (H + 2*padding - K) / stride + 1 (floor division)."""
    span = size + 2 * padding - kernel
    if span < 0 or stride < 1:
        raise DimensionError(
            f'Kernel {kernel} with padding {padding} does not fit input size {size}'
        )
    return span // stride + 1
