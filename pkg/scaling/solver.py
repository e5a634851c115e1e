"""
Grid solver for the compound scaling constraint a * b^2 * c^2 ~= 2, a >= 1.

Depth, width and resolution factors for a compound coefficient phi are
d = a^phi, w = b^phi, r = c^phi. Among grid points with the same
residual, the one whose scaled model's dense FLOPs come closest to
2^phi times the baseline FLOPs wins.
"""
from dataclasses import dataclass
import logging
from typing import Optional

from django.conf import settings
import numpy as np

from accounting.ops import dense_model_flops

from .architecture import ArchDescriptor, expand_layers, micronet_descriptor, scale_architecture
from .exceptions import InfeasibleScalingError

logger = logging.getLogger(__name__)

CONSTRAINT_TARGET = 2.0
GRID_UPPER = 3.0
# Residuals closer than this are treated as ties.
_TIE_ATOL = 1e-9


@dataclass(frozen=True)
class ScalingSolution:
    a: float
    b: float
    c: float
    phi: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 1.0:
            raise InfeasibleScalingError(
                f'Scaling bases must be >= 1, got ({self.a}, {self.b}, {self.c})', self.residual,
            )
        if self.phi < 0:
            raise InfeasibleScalingError(f'phi must be >= 0, got {self.phi}', self.residual)

    @property
    def d(self) -> float:
        return self.a ** self.phi

    @property
    def w(self) -> float:
        return self.b ** self.phi

    @property
    def r(self) -> float:
        return self.c ** self.phi

    @property
    def residual(self) -> float:
        return abs(self.a * self.b ** 2 * self.c ** 2 - CONSTRAINT_TARGET)

    def as_dict(self) -> dict:
        return {
            'a': self.a, 'b': self.b, 'c': self.c, 'phi': self.phi,
            'd': self.d, 'w': self.w, 'r': self.r, 'residual': self.residual,
        }


def scaling_grid(grid_step: float) -> np.ndarray:
    """{1, 1 + step, ...} up to 3 inclusive, rounded to suppress accumulation noise."""
    count = int(np.floor((GRID_UPPER - 1.0) / grid_step + 1e-9))
    return np.round(1.0 + grid_step * np.arange(count + 1), 10)


def _flops_deviation(base: ArchDescriptor, base_flops: int, a: float, b: float, c: float, phi: float) -> float:
    scaled = scale_architecture(base, ScalingSolution(a, b, c, phi))
    return abs(dense_model_flops(expand_layers(scaled)) - (2.0 ** phi) * base_flops)


def solve_compound_scaling(phi: float, fix_r: bool = False, grid_step: Optional[float] = None,
                           tolerance: Optional[float] = None,
                           arch: Optional[ArchDescriptor] = None) -> ScalingSolution:
    """
    Search the (a, b, c) grid for the point closest to a * b^2 * c^2 = 2.

    Args:
        phi: compound coefficient, >= 0
        fix_r: force c = 1 (resolution unchanged)
        grid_step: grid spacing in (0, 0.5]
        tolerance: largest accepted residual
        arch: descriptor used for the FLOPs tie-break (MicroNet-C10 by default)

    Returns:
        ScalingSolution

    Raises:
        InfeasibleScalingError: if the best residual exceeds the tolerance.
    """
    grid_step = settings.EC2T_SCALING_GRID_STEP if grid_step is None else grid_step
    tolerance = settings.EC2T_SCALING_TOLERANCE if tolerance is None else tolerance
    if phi < 0:
        raise InfeasibleScalingError(f'phi must be >= 0, got {phi}', None)
    if not 0.0 < grid_step <= 0.5:
        raise InfeasibleScalingError(f'grid step must lie in (0, 0.5], got {grid_step}', None)

    grid = scaling_grid(grid_step)
    c_values = np.array([1.0]) if fix_r else grid
    a_grid, b_grid = np.meshgrid(grid, grid, indexing='ij')

    best_residual = np.inf
    candidates = []
    for c in c_values:
        residuals = np.abs(a_grid * b_grid ** 2 * c ** 2 - CONSTRAINT_TARGET)
        layer_best = float(residuals.min())
        if layer_best < best_residual - _TIE_ATOL:
            best_residual = layer_best
            candidates = []
        if layer_best <= best_residual + _TIE_ATOL:
            for i, j in zip(*np.nonzero(residuals <= best_residual + _TIE_ATOL)):
                candidates.append((float(grid[i]), float(grid[j]), float(c)))

    if best_residual > tolerance:
        logger.warning(f'No scaling grid point within {tolerance:g}; best residual {best_residual:.6g}')
        raise InfeasibleScalingError(
            f'No (a, b, c) on a {grid_step:g} grid satisfies |a*b^2*c^2 - 2| <= {tolerance:g} '
            f'(best residual {best_residual:.6g})',
            best_residual,
        )

    if len(candidates) == 1:
        a, b, c = candidates[0]
    else:
        base = arch or micronet_descriptor(10)
        base_flops = dense_model_flops(expand_layers(base))
        deviations = [_flops_deviation(base, base_flops, a, b, c, phi) for a, b, c in candidates]
        # argmin keeps the first candidate in grid order among equal deviations
        a, b, c = candidates[int(np.argmin(deviations))]
        logger.debug(f'{len(candidates)} tied grid points, picked ({a}, {b}, {c}) by FLOPs deviation')
    return ScalingSolution(a=a, b=b, c=c, phi=float(phi))
