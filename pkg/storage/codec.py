"""
Dual-mask encoding of a ternary layer.

The location mask has one bit per weight position (1 = nonzero). The
sign mask has one bit per nonzero position, in the same row-major
order (1 = w_p). Both are packed least-significant-bit first and the
final byte is zero padded. Centroids are kept as half-precision values.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Optional, Tuple

import numpy as np

from quantizer.assignment import LABEL_N, LABEL_P, AssignmentMatrix
from quantizer.centroids import CentroidSet
from tensors.exceptions import DimensionError
from tensors.tensor import LayerKind, Tensor

from .exceptions import CorruptLayerError

logger = logging.getLogger(__name__)


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=bool).reshape(-1), bitorder='little').tobytes()


def unpack_bits(payload: bytes, count: int) -> np.ndarray:
    """First `count` bits of `payload`; the remaining padding bits must be zero."""
    if len(payload) != math.ceil(count / 8):
        raise CorruptLayerError(f'mask holds {len(payload)} bytes, {math.ceil(count / 8)} expected for {count} bits')
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder='little').astype(bool)
    if bits[count:].any():
        raise CorruptLayerError('mask padding bits are not zero')
    return bits[:count]


def to_half(value: float) -> float:
    """Round to the nearest half-precision value (ties to even)."""
    return float(np.float16(value))


@dataclass(frozen=True)
class TernaryLayer:
    """
    A quantized layer in dual-mask form.

    `dims` is the weight shape: (M, N, K, K) for convolutions and (M, N)
    for fully-connected layers. `bn_bias` optionally holds one
    half-precision bias per effective output channel.
    """

    name: str
    kind: LayerKind
    dims: Tuple[int, ...]
    location_mask: bytes = field(repr=False)
    sign_mask: bytes = field(repr=False)
    w_n: float
    w_p: float
    bn_bias: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', LayerKind(self.kind))
        object.__setattr__(self, 'dims', tuple(int(d) for d in self.dims))
        expected_rank = 4 if self.kind is LayerKind.CONV2D else 2
        if self.kind is LayerKind.BATCH_NORM or len(self.dims) != expected_rank:
            raise DimensionError(f'{self.name}: {self.kind.value} layer cannot have dims {self.dims}')
        if any(d < 1 for d in self.dims):
            raise DimensionError(f'{self.name}: dims must be positive, got {self.dims}')
        if self.kind is LayerKind.CONV2D and self.dims[2] != self.dims[3]:
            raise DimensionError(f'{self.name}: conv kernels must be square, got {self.dims}')
        object.__setattr__(self, 'location_mask', bytes(self.location_mask))
        object.__setattr__(self, 'sign_mask', bytes(self.sign_mask))
        if self.bn_bias is not None:
            object.__setattr__(self, 'bn_bias', tuple(to_half(b) for b in self.bn_bias))

    @property
    def out_channels(self) -> int:
        return self.dims[0]

    @property
    def in_channels(self) -> int:
        return self.dims[1]

    @property
    def kernel(self) -> int:
        return self.dims[2] if self.kind is LayerKind.CONV2D else 1

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def location_bits(self) -> np.ndarray:
        """Location mask as a bool array shaped like the weights."""
        return unpack_bits(self.location_mask, self.total).reshape(self.dims)

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.location_bits()))

    def sign_bits(self) -> np.ndarray:
        return unpack_bits(self.sign_mask, self.popcount)

    @property
    def density(self) -> float:
        """sigma: fraction of nonzero positions."""
        return self.popcount / self.total

    def labels(self) -> np.ndarray:
        """int8 labels in {-1, 0, 1} shaped like the weights."""
        location = self.location_bits()
        signs = self.sign_bits()
        labels = np.zeros(self.total, dtype=np.int8)
        labels[location.reshape(-1)] = np.where(signs, LABEL_P, LABEL_N)
        return labels.reshape(self.dims)

    def effective_channels(self) -> Tuple[int, int]:
        """(N_eff, M_eff): input and output channels with at least one nonzero weight."""
        location = self.location_bits()
        per_out = location.reshape(self.out_channels, self.in_channels, -1)
        m_eff = int(np.count_nonzero(per_out.any(axis=(1, 2))))
        n_eff = int(np.count_nonzero(per_out.any(axis=(0, 2))))
        return n_eff, m_eff


def encode_ternary_layer(assign: AssignmentMatrix, centroids: CentroidSet, dims=None, name: str = '',
                         kind=None, bn_bias=None) -> TernaryLayer:
    """
    Encode an assignment and its centroids into masks.

    Args:
        assign: labels of the layer
        centroids: the layer's CentroidSet (rounded to half precision)
        dims: weight shape; defaults to the assignment's shape, with a
            rank-1 assignment stored as a 1 x n fully-connected layer
        name: layer name stored in the model file
        kind: LayerKind, inferred from the rank when omitted
        bn_bias: optional per-effective-output-channel biases

    Returns:
        TernaryLayer
    """
    if dims is not None and tuple(assign.shape) not in (tuple(dims), (math.prod(dims),)):
        raise DimensionError(f'assignment shape {assign.shape} does not match dims {tuple(dims)}')
    labels = assign.labels if dims is None else assign.labels.reshape(tuple(dims))
    return layer_from_labels(labels, centroids.w_n, centroids.w_p, name=name, kind=kind, bn_bias=bn_bias)


def layer_from_labels(labels: np.ndarray, w_n: float, w_p: float, name: str = '', kind=None,
                      bn_bias=None) -> TernaryLayer:
    """Pack int8 labels shaped like the weights; centroid values are rounded to half precision."""
    labels = np.asarray(labels)
    if labels.ndim == 1:
        labels = labels.reshape(1, -1)
    if kind is None:
        kind = LayerKind.CONV2D if labels.ndim == 4 else LayerKind.FULLY_CONNECTED
    flat = labels.reshape(-1)
    nonzero = flat != 0
    return TernaryLayer(
        name=name,
        kind=kind,
        dims=labels.shape,
        location_mask=pack_bits(nonzero),
        sign_mask=pack_bits(flat[nonzero] == LABEL_P),
        w_n=to_half(w_n),
        w_p=to_half(w_p),
        bn_bias=bn_bias,
    )


def decode_ternary_layer(layer: TernaryLayer) -> Tensor:
    """
    Rebuild the quantized weight tensor.

    Raises:
        CorruptLayerError: if the sign mask length does not match the
        location mask's popcount or a padding bit is set.
    """
    try:
        labels = layer.labels()
    except CorruptLayerError as e:
        logger.error(f'Layer {layer.name!r} is corrupt: {str(e)}')
        raise
    values = np.array([layer.w_n, 0.0, layer.w_p], dtype=np.float32)
    return Tensor.from_array(values[labels.astype(np.intp) + 1])