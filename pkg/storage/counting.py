"""
Fractional parameter counting of dual-mask layers.

Every count is expressed in 32-bit parameters: a mask bit counts 1/32,
a 16-bit value counts 1/2. Pruned channels (all-zero input or output
slices) are excluded before anything is counted.
"""
from dataclasses import dataclass

from .codec import TernaryLayer

BITS_PER_PARAM = 32
CENTROID_PARAMS = 1.0


@dataclass(frozen=True)
class StorageCount:
    mask_params: float
    sign_params: float
    centroid_params: float
    bn_params: float

    def __post_init__(self):
        if min(self.mask_params, self.sign_params, self.centroid_params, self.bn_params) < 0:
            raise ValueError('storage counts must be non-negative')

    @property
    def total(self) -> float:
        return self.mask_params + self.sign_params + self.centroid_params + self.bn_params

    def __add__(self, other: 'StorageCount') -> 'StorageCount':
        return StorageCount(
            mask_params=self.mask_params + other.mask_params,
            sign_params=self.sign_params + other.sign_params,
            centroid_params=self.centroid_params + other.centroid_params,
            bn_params=self.bn_params + other.bn_params,
        )

    def as_dict(self) -> dict:
        return {
            'mask_params': self.mask_params,
            'sign_params': self.sign_params,
            'centroid_params': self.centroid_params,
            'bn_params': self.bn_params,
            'total': self.total,
        }


def count_storage_params(layer: TernaryLayer, include_bn: bool = True) -> StorageCount:
    """
    mask = N_eff*K^2*M_eff/32, sign = sigma*N_eff*K^2*M_eff/32 (sigma over
    the effective sub-tensor), centroids = 1, batch-norm = M_eff/2.
    """
    n_eff, m_eff = layer.effective_channels()
    effective_positions = n_eff * layer.kernel ** 2 * m_eff
    # every nonzero weight lies inside the effective sub-tensor
    nonzero = layer.popcount
    return StorageCount(
        mask_params=effective_positions / BITS_PER_PARAM,
        sign_params=nonzero / BITS_PER_PARAM,
        centroid_params=CENTROID_PARAMS,
        bn_params=m_eff / 2 if include_bn else 0.0,
    )


def effective_density(layer: TernaryLayer) -> float:
    """sigma over the effective sub-tensor; 0 for an empty layer."""
    n_eff, m_eff = layer.effective_channels()
    positions = n_eff * layer.kernel ** 2 * m_eff
    return layer.popcount / positions if positions else 0.0
