import logging
from typing import NamedTuple

import numpy as np

from .exceptions import DatasetError
from .rng import XorShift64Star

logger = logging.getLogger(__name__)


class Dataset(NamedTuple):
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)


def gen_two_moons(n: int, noise: float, seed: int) -> Dataset:
    """
    Two interleaved half-circles in the plane.

    The first n/2 points lie on the upper unit half-circle around the
    origin (label 0), the rest on the lower unit half-circle around
    (1, 0.5) (label 1). Gaussian noise with standard deviation `noise`
    is added to every coordinate in row-major order.
    """
    if n < 2 or n % 2:
        raise DatasetError(f'two-moons needs an even number of points >= 2, got {n}')
    if noise < 0:
        raise DatasetError(f'noise must be >= 0, got {noise}')
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    outer = np.stack([np.cos(t), np.sin(t)], axis=1)
    inner = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    x = np.concatenate([outer, inner])
    y = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    if noise > 0:
        x = x + XorShift64Star(seed).normal_array(x.shape, scale=noise)
    logger.debug(f'Generated {n} two-moons points with noise {noise} (seed {seed})')
    return Dataset(x=x, y=y)
