"""
Reader and writer for .ec2t model files.

Layout (all integers little-endian):
    8 bytes   magic b'EC2TMODL'
    1 byte    version (1)
    2 bytes   layer count
    per layer:
        2 bytes + n   UTF-8 name
        1 byte        kind (0 conv2d, 1 fully-connected)
        4 * 4 bytes   dims M, N, K, K (fully-connected: M, N, 1, 1)
        2 * 2 bytes   w_n, w_p as float16
        4 bytes + n   location mask
        4 bytes + n   sign mask
        1 byte        batch-norm flag, then M_eff float16 biases when set
    4 bytes   CRC-32 of everything above
"""
import logging
from pathlib import Path
import struct
from typing import List, Sequence
import zlib

import numpy as np

from tensors.exceptions import EC2TError
from tensors.tensor import LayerKind

from .codec import TernaryLayer
from .exceptions import CorruptLayerError, CorruptModelError

logger = logging.getLogger(__name__)

MODEL_MAGIC = b'EC2TMODL'
MODEL_VERSION = 1
KIND_CODES = {LayerKind.CONV2D: 0, LayerKind.FULLY_CONNECTED: 1}
CODE_KINDS = {code: kind for kind, code in KIND_CODES.items()}
_CRC = struct.Struct('<I')


def _layer_to_bytes(layer: TernaryLayer) -> bytes:
    name = layer.name.encode('utf-8')
    dims = layer.dims if layer.kind is LayerKind.CONV2D else layer.dims + (1, 1)
    parts = [
        struct.pack('<H', len(name)), name,
        struct.pack('<B', KIND_CODES[layer.kind]),
        struct.pack('<4I', *dims),
        np.array([layer.w_n, layer.w_p], dtype='<f2').tobytes(),
        struct.pack('<I', len(layer.location_mask)), layer.location_mask,
        struct.pack('<I', len(layer.sign_mask)), layer.sign_mask,
    ]
    if layer.bn_bias is None:
        parts.append(struct.pack('<B', 0))
    else:
        parts.append(struct.pack('<B', 1))
        parts.append(np.array(layer.bn_bias, dtype='<f2').tobytes())
    return b''.join(parts)


def model_to_bytes(layers: Sequence[TernaryLayer]) -> bytes:
    if len(layers) > 0xFFFF:
        raise CorruptModelError(f'A model file holds at most 65535 layers, got {len(layers)}')
    body = MODEL_MAGIC + struct.pack('<BH', MODEL_VERSION, len(layers))
    body += b''.join(_layer_to_bytes(layer) for layer in layers)
    return body + _CRC.pack(zlib.crc32(body))


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise CorruptModelError('Truncated .ec2t file')
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_layer(reader: _Reader) -> TernaryLayer:
    (name_length,) = reader.unpack('<H')
    try:
        name = reader.take(name_length).decode('utf-8')
    except UnicodeDecodeError as e:
        raise CorruptModelError(f'Layer name is not valid UTF-8: {str(e)}') from e
    (code,) = reader.unpack('<B')
    if code not in CODE_KINDS:
        raise CorruptModelError(f'{name}: unknown layer kind {code}')
    kind = CODE_KINDS[code]
    dims = reader.unpack('<4I')
    if kind is LayerKind.FULLY_CONNECTED:
        if dims[2:] != (1, 1):
            raise CorruptModelError(f'{name}: fully-connected layer with kernel dims {dims[2:]}')
        dims = dims[:2]
    w_n, w_p = (float(v) for v in np.frombuffer(reader.take(4), dtype='<f2'))
    (location_length,) = reader.unpack('<I')
    location_mask = reader.take(location_length)
    (sign_length,) = reader.unpack('<I')
    sign_mask = reader.take(sign_length)
    (bn_flag,) = reader.unpack('<B')
    layer = TernaryLayer(name=name, kind=kind, dims=dims, location_mask=location_mask,
                         sign_mask=sign_mask, w_n=w_n, w_p=w_p)
    if bn_flag not in (0, 1):
        raise CorruptModelError(f'{name}: invalid batch-norm flag {bn_flag}')
    if bn_flag:
        _, m_eff = layer.effective_channels()
        bias = np.frombuffer(reader.take(2 * m_eff), dtype='<f2')
        layer = TernaryLayer(name=name, kind=kind, dims=dims, location_mask=location_mask,
                             sign_mask=sign_mask, w_n=w_n, w_p=w_p, bn_bias=tuple(float(b) for b in bias))
    # popcount, length and padding checks
    layer.labels()
    return layer


def model_from_bytes(payload: bytes) -> List[TernaryLayer]:
    """
    Parse a model file.

    Raises:
        CorruptModelError: bad magic, version, checksum, framing or layer contents.
    """
    if len(payload) < len(MODEL_MAGIC) + 3 + _CRC.size or payload[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise CorruptModelError('Not an .ec2t model file (bad magic)')
    body, (stored_crc,) = payload[:-_CRC.size], _CRC.unpack(payload[-_CRC.size:])
    if zlib.crc32(body) != stored_crc:
        logger.error(f'Checksum mismatch: stored {stored_crc:#010x}, computed {zlib.crc32(body):#010x}')
        raise CorruptModelError('Model file checksum mismatch')
    reader = _Reader(body)
    reader.take(len(MODEL_MAGIC))
    version, count = reader.unpack('<BH')
    if version != MODEL_VERSION:
        raise CorruptModelError(f'Unsupported .ec2t version {version}')
    layers = []
    try:
        for _ in range(count):
            layers.append(_read_layer(reader))
    except CorruptModelError:
        raise
    except CorruptLayerError as e:
        logger.error(f'Corrupt layer in model file: {str(e)}')
        raise CorruptModelError(str(e)) from e
    except EC2TError as e:
        raise CorruptModelError(f'Invalid layer record: {str(e)}') from e
    if reader.offset != len(body):
        raise CorruptModelError(f'{len(body) - reader.offset} trailing bytes after the last layer')
    return layers


def write_model(path, layers: Sequence[TernaryLayer]) -> Path:
    path = Path(path)
    path.write_bytes(model_to_bytes(layers))
    logger.info(f'Wrote {len(layers)} ternary layers to {path}')
    return path


def read_model(path) -> List[TernaryLayer]:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise CorruptModelError(f'Cannot read model file {path}: {str(e)}') from e
    return model_from_bytes(payload)
