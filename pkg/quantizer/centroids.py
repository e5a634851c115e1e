"""
Per-layer ternary centroid values {w_n, 0, w_p}.
"""
from dataclasses import dataclass

import numpy as np

from tensors.tensor import Tensor

from .exceptions import DegenerateInitError

# Smallest magnitude a learned centroid may take.
CENTROID_EPSILON = 1e-8


@dataclass(frozen=True)
class CentroidSet:
    """The three quantized values of a layer. w_0 is fixed at zero and never learned."""

    w_n: float
    w_p: float

    def __post_init__(self):
        w_n, w_p = float(self.w_n), float(self.w_p)
        if not (np.isfinite(w_n) and np.isfinite(w_p)):
            raise DegenerateInitError(f'Centroids must be finite, got ({w_n}, {w_p})')
        if w_n > -CENTROID_EPSILON or w_p < CENTROID_EPSILON:
            raise DegenerateInitError(
                f'Centroids must satisfy w_n <= -{CENTROID_EPSILON} and w_p >= {CENTROID_EPSILON}, '
                f'got ({w_n}, {w_p})'
            )
        object.__setattr__(self, 'w_n', w_n)
        object.__setattr__(self, 'w_p', w_p)

    @property
    def w_0(self) -> float:
        return 0.0

    @classmethod
    def clamped(cls, w_n: float, w_p: float) -> 'CentroidSet':
        """Build a centroid set after a gradient step, clamping each value to its sign."""
        return cls(w_n=min(float(w_n), -CENTROID_EPSILON), w_p=max(float(w_p), CENTROID_EPSILON))

    def values(self) -> np.ndarray:
        """Centroid values in label order (n, 0, p)."""
        return np.array([self.w_n, 0.0, self.w_p], dtype=np.float64)

    def scaled(self, factor: float) -> 'CentroidSet':
        return CentroidSet(w_n=self.w_n * factor, w_p=self.w_p * factor)

    def as_dict(self) -> dict:
        return {'w_n': self.w_n, 'w_0': self.w_0, 'w_p': self.w_p}


def init_centroids(weights) -> CentroidSet:
    """
    Initialize centroids from the full-precision weights.

    w_p is the mean of the positive elements and w_n the mean of the
    negative ones; a missing sign falls back to +/- CENTROID_EPSILON.

    Raises:
        DegenerateInitError: if the tensor is empty or all zero.
    """
    w = as_weight_array(weights)
    if w.size == 0 or not np.any(w):
        raise DegenerateInitError('Cannot initialize centroids from an all-zero tensor')
    positive = w[w > 0]
    negative = w[w < 0]
    w_p = float(positive.mean()) if positive.size else CENTROID_EPSILON
    w_n = float(negative.mean()) if negative.size else -CENTROID_EPSILON
    return CentroidSet.clamped(w_n, w_p)


def as_weight_array(weights) -> np.ndarray:
    """float64 copy of a Tensor or array-like, keeping its shape."""
    if isinstance(weights, Tensor):
        return weights.numpy().astype(np.float64)
    return np.asarray(weights, dtype=np.float64)
