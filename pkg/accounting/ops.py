"""
Operation counting.

Dense layers use the fused multiply-accumulate convention (one add per
multiply). Ternary layers accumulate inputs per cluster and spend two
multiplications per output value. Pooling, activations and softmax are
not counted.
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from storage.codec import TernaryLayer
from tensors.tensor import LayerKind, LayerSpec


@dataclass(frozen=True)
class OpsCount:
    adds: int
    mults: int

    def __post_init__(self):
        if self.adds < 0 or self.mults < 0:
            raise ValueError(f'operation counts must be non-negative, got {self.adds}/{self.mults}')
        object.__setattr__(self, 'adds', int(self.adds))
        object.__setattr__(self, 'mults', int(self.mults))

    @property
    def flops(self) -> int:
        return self.adds + self.mults

    def __add__(self, other: 'OpsCount') -> 'OpsCount':
        return OpsCount(self.adds + other.adds, self.mults + other.mults)

    def as_dict(self) -> dict:
        return {'adds': self.adds, 'mults': self.mults, 'flops': self.flops}


ZERO_OPS = OpsCount(0, 0)


def count_dense_ops(spec: LayerSpec, input_resolution: Optional[int] = None) -> OpsCount:
    positions = 1
    if spec.kind is not LayerKind.FULLY_CONNECTED:
        h_out, w_out = spec.spatial(input_resolution)
        positions = h_out * w_out
    if spec.kind is LayerKind.BATCH_NORM:
        per_position = spec.out_channels
    else:
        per_position = spec.weight_count
    return OpsCount(adds=per_position * positions, mults=per_position * positions)


def dense_param_count(spec: LayerSpec) -> int:
    """Weights, plus a bias per output of a fully-connected layer, plus scale and shift per batch-norm channel."""
    if spec.kind is LayerKind.BATCH_NORM:
        return 2 * spec.out_channels
    if spec.kind is LayerKind.FULLY_CONNECTED:
        return spec.weight_count + spec.out_channels
    return spec.weight_count


def count_ternary_ops(layer: TernaryLayer, spatial: Tuple[int, int] = (1, 1), tree_adder: bool = False) -> OpsCount:
    """
    Accumulations and multiplications of a ternary layer.

    Per output channel m with z_m nonzero weights: z_m adds (tree-adder
    mode: max(z_m - 1, 0), plus one to combine the two partial sums when
    both clusters are present) and 2 multiplications if z_m > 0. Totals
    scale with the number of output positions.
    """
    labels = layer.labels().reshape(layer.out_channels, -1)
    z_p = np.count_nonzero(labels > 0, axis=1)
    z_n = np.count_nonzero(labels < 0, axis=1)
    z = z_p + z_n
    if tree_adder:
        adds = np.maximum(z - 1, 0) + ((z_p > 0) & (z_n > 0))
    else:
        adds = z
    mults = np.where(z > 0, 2, 0)
    positions = spatial[0] * spatial[1]
    return OpsCount(adds=int(adds.sum()) * positions, mults=int(mults.sum()) * positions)


def dense_model_flops(specs: Iterable[LayerSpec], input_resolution: Optional[int] = None) -> int:
    return sum(count_dense_ops(spec, input_resolution).flops for spec in specs)
