"""
Reader and writer for the .ect-tensor container.

Layout (all integers little-endian):
    8 bytes   magic b'ECT-TNSR'
    1 byte    version (1)
    1 byte    rank
    rank * 4  dimensions (uint32)
    ...       float32 values, row-major
"""
import logging
import math
import struct
from pathlib import Path

import numpy as np

from .exceptions import TensorFormatError
from .tensor import Tensor

logger = logging.getLogger(__name__)

TENSOR_MAGIC = b'ECT-TNSR'
TENSOR_VERSION = 1


def tensor_to_bytes(tensor: Tensor) -> bytes:
    header = TENSOR_MAGIC + struct.pack('<BB', TENSOR_VERSION, tensor.rank)
    header += struct.pack(f'<{tensor.rank}I', *tensor.shape)
    return header + tensor.data.astype('<f4').tobytes()


def tensor_from_bytes(payload: bytes) -> Tensor:
    if len(payload) < 10 or payload[:8] != TENSOR_MAGIC:
        raise TensorFormatError('Not an .ect-tensor file (bad magic)')
    version, rank = struct.unpack_from('<BB', payload, 8)
    if version != TENSOR_VERSION:
        raise TensorFormatError(f'Unsupported .ect-tensor version {version}')
    if rank < 1:
        raise TensorFormatError('Tensor rank must be at least 1')
    offset = 10
    if len(payload) < offset + 4 * rank:
        raise TensorFormatError('Truncated .ect-tensor header')
    shape = struct.unpack_from(f'<{rank}I', payload, offset)
    offset += 4 * rank
    count = math.prod(shape)
    expected = offset + 4 * count
    if len(payload) != expected:
        raise TensorFormatError(
            f'.ect-tensor body has {len(payload) - offset} bytes, expected {4 * count}'
        )
    data = np.frombuffer(payload, dtype='<f4', count=count, offset=offset)
    try:
        return Tensor(shape=shape, data=data.astype(np.float32))
    except Exception as e:
        raise TensorFormatError(f'Invalid tensor contents: {str(e)}') from e


def write_tensor(path, tensor: Tensor) -> Path:
    path = Path(path)
    path.write_bytes(tensor_to_bytes(tensor))
    logger.debug(f'Wrote tensor {tensor.shape} to {path}')
    return path


def read_tensor(path) -> Tensor:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise TensorFormatError(f'Cannot read tensor file {path}: {str(e)}') from e
    return tensor_from_bytes(payload)
