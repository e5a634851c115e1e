"""
Reference dense kernels.

These are the ground truth for every equivalence check in the project:
the quantized forward pass, the sparse ternary kernels and `verify` all
compare against them. Accumulation runs in float64 in a fixed order
(input channel, then kernel row, then kernel column) and the result is
rounded to float32 once.
"""
import numpy as np

from .exceptions import DimensionError
from .tensor import Tensor, conv_output_size


def check_conv_shapes(input: Tensor, weight_shape, stride: int, padding: int):
    if len(weight_shape) != 4 or weight_shape[2] != weight_shape[3]:
        raise DimensionError(f'conv2d weights must be M x N x K x K, got {weight_shape}')
    if input.rank != 3:
        raise DimensionError(f'conv2d input must be N x H x W, got {input.shape}')
    if input.shape[0] != weight_shape[1]:
        raise DimensionError(
            f'conv2d input has {input.shape[0]} channels, weights expect {weight_shape[1]}'
        )
    if stride < 1 or padding < 0:
        raise DimensionError(f'invalid stride {stride} / padding {padding}')


def padded_input(input: Tensor, padding: int) -> np.ndarray:
    x = input.numpy().astype(np.float64)
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    return x


def tap_window(x: np.ndarray, channel: int, row: int, col: int, stride: int, h_out: int, w_out: int):
    """Input values seen by kernel tap (row, col) at every output position."""
    return x[channel,
             row:row + stride * (h_out - 1) + 1:stride,
             col:col + stride * (w_out - 1) + 1:stride]


def conv2d_dense(input: Tensor, weights: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    Cross-correlation of an N x H x W input with M x N x K x K weights.

    Args:
        input: N x H x W tensor
        weights: M x N x K x K tensor
        stride: step between output positions
        padding: zero padding added on every border

    Returns:
        Tensor: M x H_out x W_out output, no bias.
    """
    check_conv_shapes(input, weights.shape, stride, padding)
    m_out, n_in, k, _ = weights.shape
    h_out = conv_output_size(input.shape[1], k, stride, padding)
    w_out = conv_output_size(input.shape[2], k, stride, padding)

    x = padded_input(input, padding)
    w = weights.numpy().astype(np.float64)
    out = np.zeros((m_out, h_out, w_out), dtype=np.float64)
    for n in range(n_in):
        for i in range(k):
            for j in range(k):
                window = tap_window(x, n, i, j, stride, h_out, w_out)
                out += w[:, n, i, j][:, None, None] * window[None, :, :]
    return Tensor.from_array(out.astype(np.float32))


def fc_dense(input: Tensor, weights: Tensor) -> Tensor:
    """Matrix-vector product of M x N weights with a length-N input."""
    if weights.rank != 2:
        raise DimensionError(f'fully-connected weights must be M x N, got {weights.shape}')
    if input.size != weights.shape[1]:
        raise DimensionError(
            f'fully-connected input has {input.size} values, weights expect {weights.shape[1]}'
        )
    x = input.data.astype(np.float64)
    w = weights.numpy().astype(np.float64)
    out = np.zeros(weights.shape[0], dtype=np.float64)
    for n in range(weights.shape[1]):
        out += w[:, n] * x[n]
    return Tensor.from_array(out.astype(np.float32))


def batch_norm_affine(input: Tensor, scale, bias) -> Tensor:
    """Per-channel affine map y = scale * x + bias over the leading channel axis."""
    scale = np.asarray(scale, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    channels = input.shape[0]
    if scale.shape != (channels,) or bias.shape != (channels,):
        raise DimensionError(
            f'batch-norm expects {channels} scales and biases, got {scale.shape} / {bias.shape}'
        )
    x = input.numpy().astype(np.float64)
    broadcast = (channels,) + (1,) * (input.rank - 1)
    out = x * scale.reshape(broadcast) + bias.reshape(broadcast)
    return Tensor.from_array(out.astype(np.float32))
