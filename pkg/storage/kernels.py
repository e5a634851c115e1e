"""
Multiplication-free kernels over dual-mask layers.

Inputs under w_p taps and under w_n taps are accumulated separately and
each partial sum is multiplied by its centroid once per output value.
"""
from typing import Optional

import numpy as np

from tensors.exceptions import DimensionError
from tensors.kernels import batch_norm_affine, check_conv_shapes, padded_input, tap_window
from tensors.tensor import LayerKind, Tensor, conv_output_size

from .codec import TernaryLayer


def ternary_fc(input: Tensor, layer: TernaryLayer) -> Tensor:
    if layer.kind is not LayerKind.FULLY_CONNECTED:
        raise DimensionError(f'{layer.name}: ternary_fc needs a fully-connected layer')
    if input.size != layer.in_channels:
        raise DimensionError(
            f'{layer.name}: input has {input.size} values, layer expects {layer.in_channels}'
        )
    x = input.data.astype(np.float64)
    labels = layer.labels()
    out = np.zeros(layer.out_channels, dtype=np.float64)
    for m in range(layer.out_channels):
        positive = x[labels[m] > 0].sum()
        negative = x[labels[m] < 0].sum()
        out[m] = layer.w_p * positive + layer.w_n * negative
    return Tensor.from_array(out.astype(np.float32))


def ternary_conv2d(input: Tensor, layer: TernaryLayer, stride: int = 1, padding: int = 0) -> Tensor:
    """Same geometry as the dense cross-correlation, weights taken from the masks."""
    if layer.kind is not LayerKind.CONV2D:
        raise DimensionError(f'{layer.name}: ternary_conv2d needs a conv2d layer')
    check_conv_shapes(input, layer.dims, stride, padding)
    m_out, n_in, k, _ = layer.dims
    h_out = conv_output_size(input.shape[1], k, stride, padding)
    w_out = conv_output_size(input.shape[2], k, stride, padding)

    x = padded_input(input, padding)
    labels = layer.labels()
    positive = np.zeros((m_out, h_out, w_out), dtype=np.float64)
    negative = np.zeros((m_out, h_out, w_out), dtype=np.float64)
    for m in range(m_out):
        for n, i, j in np.argwhere(labels[m] != 0):
            window = tap_window(x, n, i, j, stride, h_out, w_out)
            if labels[m, n, i, j] > 0:
                positive[m] += window
            else:
                negative[m] += window
    out = layer.w_p * positive + layer.w_n * negative
    return Tensor.from_array(out.astype(np.float32))


def ternary_forward(input: Tensor, layer: TernaryLayer, stride: int = 1, padding: int = 0) -> Tensor:
    if layer.kind is LayerKind.CONV2D:
        return ternary_conv2d(input, layer, stride=stride, padding=padding)
    return ternary_fc(input, layer)


def _relu(tensor: Tensor) -> Tensor:
    return Tensor.from_array(np.maximum(tensor.numpy(), 0.0))


def ternary_block_forward(input: Tensor, conv1: TernaryLayer, bn1, conv2: TernaryLayer, bn2,
                          stride: int = 1, shortcut: Optional[TernaryLayer] = None, shortcut_bn=None) -> Tensor:
    """
    Residual building block: relu(bn2(conv2(relu(bn1(conv1(x))))) + s(x)).

    `bn1`, `bn2` and `shortcut_bn` are (scale, bias) pairs. s is the
    identity unless a 1x1 projection `shortcut` is given, which runs
    with the block's stride.
    """
    kernel = conv1.kernel
    hidden = _relu(batch_norm_affine(ternary_conv2d(input, conv1, stride, kernel // 2), *bn1))
    main = batch_norm_affine(ternary_conv2d(hidden, conv2, 1, conv2.kernel // 2), *bn2)
    if shortcut is None:
        if stride != 1 or input.shape != main.shape:
            raise DimensionError(f'{conv1.name}: identity shortcut needs matching shapes, '
                                 f'got {input.shape} and {main.shape}')
        residual = input
    else:
        if shortcut_bn is None:
            raise DimensionError(f'{shortcut.name}: projection shortcut needs its batch-norm')
        residual = batch_norm_affine(ternary_conv2d(input, shortcut, stride, 0), *shortcut_bn)
    return _relu(Tensor.from_array(main.numpy().astype(np.float64) + residual.numpy()))
