"""
Entropy-constrained assignment of weights to ternary centroids.

Each weight W_ij gets the label c in {n, 0, p} minimizing

    C_c = (W_ij - w_c)^2 - lambda * log2(P_c)

where P_c is the fraction of the layer's weights currently assigned to
c. Because P_c depends on the assignment itself, assignment and
cluster statistics are alternated until the labels stop changing.
"""
from dataclasses import dataclass
import logging
from typing import Optional, Tuple

from django.conf import settings
import numpy as np

from .centroids import CentroidSet, as_weight_array
from .exceptions import QuantizationError

logger = logging.getLogger(__name__)

LABEL_N = -1
LABEL_ZERO = 0
LABEL_P = 1

MODE_EC2T = 'ec2t'
MODE_TTQ_THRESHOLD = 'ttq-threshold'
MODES = (MODE_EC2T, MODE_TTQ_THRESHOLD)

# Cost rows are stored in label order (n, 0, p); argmin scans them in
# tie-break order (0, n, p) so equal costs resolve toward zero, then w_n.
_TIE_BREAK_ROWS = np.array([1, 0, 2])
_TIE_BREAK_LABELS = np.array([LABEL_ZERO, LABEL_N, LABEL_P], dtype=np.int8)


@dataclass(frozen=True)
class AssignmentMatrix:
    """Per-element labels in {-1, 0, +1} with the shape of the layer's weights."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int8, copy=True)
        if labels.size == 0:
            raise QuantizationError('Assignment matrix must not be empty')
        if not np.isin(labels, (LABEL_N, LABEL_ZERO, LABEL_P)).all():
            raise QuantizationError('Assignment labels must be in {-1, 0, 1}')
        labels.setflags(write=False)
        object.__setattr__(self, 'labels', labels)

    @property
    def shape(self):
        return self.labels.shape

    @property
    def size(self) -> int:
        return self.labels.size

    @property
    def sparsity(self) -> float:
        return float(np.count_nonzero(self.labels == LABEL_ZERO)) / self.size

    def materialize(self, centroids: CentroidSet, dtype=np.float64) -> np.ndarray:
        """Quantized weight tensor q with q_ij = centroid value at label A_ij."""
        return centroids.values().astype(dtype)[self.labels.astype(np.intp) + 1]

    def __eq__(self, other):
        if not isinstance(other, AssignmentMatrix):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class ClusterStats:
    """Cluster sizes and floored probabilities, in label order (n, 0, p)."""

    counts: Tuple[int, int, int]

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def floor(self) -> float:
        return 1.0 / (2 * self.total)

    @property
    def raw_probabilities(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.float64) / self.total

    @property
    def probabilities(self) -> np.ndarray:
        return np.maximum(self.raw_probabilities, self.floor)

    @property
    def count_n(self) -> int:
        return self.counts[0]

    @property
    def count_zero(self) -> int:
        return self.counts[1]

    @property
    def count_p(self) -> int:
        return self.counts[2]

    @property
    def sign_cluster_empty(self) -> bool:
        return self.count_n == 0 or self.count_p == 0

    def as_dict(self) -> dict:
        probabilities = self.probabilities
        return {
            'counts': {'n': self.count_n, '0': self.count_zero, 'p': self.count_p},
            'probabilities': {'n': probabilities[0], '0': probabilities[1], 'p': probabilities[2]},
        }


def cluster_stats(assign) -> ClusterStats:
    labels = assign.labels if isinstance(assign, AssignmentMatrix) else np.asarray(assign)
    if labels.size == 0:
        raise QuantizationError('Cannot compute statistics of an empty assignment')
    return ClusterStats(counts=(
        int(np.count_nonzero(labels == LABEL_N)),
        int(np.count_nonzero(labels == LABEL_ZERO)),
        int(np.count_nonzero(labels == LABEL_P)),
    ))


def assignment_cost(weights, centroids: CentroidSet, stats: ClusterStats, lam: float) -> np.ndarray:
    """
    Cost tensor of shape (3, *weights.shape), rows in label order (n, 0, p).

    Squared distance to each centroid plus lambda times the information
    content -log2(P_c) of that centroid.
    """
    if lam < 0 or not np.isfinite(lam):
        raise QuantizationError(f'lambda must be a finite value >= 0, got {lam}')
    w = as_weight_array(weights)
    values = centroids.values().reshape((3,) + (1,) * w.ndim)
    information = -np.log2(stats.probabilities).reshape((3,) + (1,) * w.ndim)
    return (w[None, ...] - values) ** 2 + lam * information


def assign(cost: np.ndarray) -> AssignmentMatrix:
    """Elementwise argmin over the centroid axis; ties go to w_0, then w_n."""
    winners = np.argmin(cost[_TIE_BREAK_ROWS], axis=0)
    return AssignmentMatrix(labels=_TIE_BREAK_LABELS[winners])


def nearest_assignment(weights, centroids: CentroidSet) -> AssignmentMatrix:
    """Plain nearest-centroid assignment (the lambda = 0 case)."""
    w = as_weight_array(weights)
    placeholder = ClusterStats(counts=(1, 1, 1))
    return assign(assignment_cost(w, centroids, placeholder, 0.0))


def fixed_point_assignment(weights, centroids: CentroidSet, lam: float,
                           max_iterations: Optional[int] = None):
    """
    Alternate assignment and cluster statistics until the labels are stable.

    The first statistics come from the lambda = 0 assignment. When the cap
    is reached the last iterate is accepted.

    Returns:
        tuple: (AssignmentMatrix, ClusterStats, iterations)
    """
    if max_iterations is None:
        max_iterations = settings.EC2T_FIXED_POINT_ITERATIONS
    w = as_weight_array(weights)
    current = nearest_assignment(w, centroids)
    stats = cluster_stats(current)
    for iteration in range(1, max_iterations + 1):
        updated = assign(assignment_cost(w, centroids, stats, lam))
        if updated == current:
            return current, stats, iteration
        current, stats = updated, cluster_stats(updated)
    logger.debug(f'Assignment did not settle after {max_iterations} iterations at lambda={lam:.6g}')
    return current, stats, max_iterations


def threshold_assignment(weights, threshold_t: float) -> AssignmentMatrix:
    """TTQ baseline: zero where |W| <= t * max|W|, otherwise the sign of W."""
    if not 0.0 <= threshold_t < 1.0:
        raise QuantizationError(f'ttq-threshold needs t in [0, 1), got {threshold_t}')
    w = as_weight_array(weights)
    delta = threshold_t * float(np.max(np.abs(w)))
    labels = np.where(np.abs(w) <= delta, LABEL_ZERO, np.sign(w))
    return AssignmentMatrix(labels=labels)


def quantize_layer(weights, centroids: CentroidSet, lam: float = 0.0, mode: str = MODE_EC2T,
                   threshold_t: float = 0.0) -> Tuple[AssignmentMatrix, ClusterStats]:
    """
    Quantize one layer.

    Args:
        weights: full-precision weights (Tensor or array)
        centroids: the layer's CentroidSet
        lam: entropy weight lambda (ec2t mode)
        mode: 'ec2t' or 'ttq-threshold'
        threshold_t: relative threshold (ttq-threshold mode)

    Returns:
        tuple: (AssignmentMatrix, ClusterStats)
    """
    if mode == MODE_EC2T:
        assignment, stats, _ = fixed_point_assignment(weights, centroids, lam)
        return assignment, stats
    if mode == MODE_TTQ_THRESHOLD:
        assignment = threshold_assignment(weights, threshold_t)
        return assignment, cluster_stats(assignment)
    raise QuantizationError(f'Unknown quantization mode {mode!r}; expected one of {", ".join(MODES)}')
