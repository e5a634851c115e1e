"""
Layer-wise lambda schedule: lambda = gamma * delta * lambda_max.

gamma is the global sparsification intensity, delta scales each layer by
its size relative to the largest quantized layer, and lambda_max is the
smallest lambda at which a layer's ternary assignment collapses to
binary (one sign cluster becomes empty). A layer only gets a positive
lambda while w_0 is its most probable cluster and the search converged;
under that condition more lambda never means fewer zeros.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

from django.conf import settings

from .assignment import (
    MODE_EC2T,
    AssignmentMatrix,
    ClusterStats,
    cluster_stats,
    fixed_point_assignment,
    nearest_assignment,
    quantize_layer,
)
from .centroids import CentroidSet, as_weight_array
from .exceptions import QuantizationError

logger = logging.getLogger(__name__)

# Rounds of boundary re-checking after bisection.
_BOUNDARY_ROUNDS = 20


class LambdaMaxResult(NamedTuple):
    value: float
    saturated: bool
    evaluations: int


@dataclass(frozen=True)
class LambdaState:
    """
    Global gamma with per-layer delta and lambda_max.

    `lambda_maxes` holds the bounds the schedule applies, which are zero
    for layers where `schedule_bound` rejects the searched value.
    """

    gamma: float
    deltas: Tuple[float, ...]
    lambda_maxes: Tuple[float, ...]

    def __post_init__(self):
        if self.gamma < 0:
            raise QuantizationError(f'gamma must be >= 0, got {self.gamma}')
        if len(self.deltas) != len(self.lambda_maxes):
            raise QuantizationError('deltas and lambda_maxes must have one entry per layer')
        if any(not 0.0 < d <= 1.0 for d in self.deltas):
            raise QuantizationError(f'delta values must lie in (0, 1], got {self.deltas}')
        if any(lm < 0 for lm in self.lambda_maxes):
            raise QuantizationError('lambda_max values must be >= 0')
        object.__setattr__(self, 'deltas', tuple(float(d) for d in self.deltas))
        object.__setattr__(self, 'lambda_maxes', tuple(float(v) for v in self.lambda_maxes))

    @property
    def lambdas(self) -> Tuple[float, ...]:
        return tuple(self.gamma * d * lm for d, lm in zip(self.deltas, self.lambda_maxes))


def compute_delta(layer_sizes: Sequence[int]) -> List[float]:
    """delta^(l) = N_W^(l) / max_k N_W^(k)."""
    if not layer_sizes:
        raise QuantizationError('compute_delta needs at least one quantized layer')
    if any(size < 1 for size in layer_sizes):
        raise QuantizationError(f'layer sizes must be positive, got {list(layer_sizes)}')
    largest = max(layer_sizes)
    return [size / largest for size in layer_sizes]


def _sign_cluster_emptied(weights, centroids: CentroidSet, lam: float, max_iterations: int) -> bool:
    _, stats, _ = fixed_point_assignment(weights, centroids, lam, max_iterations)
    return stats.sign_cluster_empty


def search_lambda_max(weights, centroids: CentroidSet, rtol: Optional[float] = None,
                      cap: Optional[float] = None,
                      max_iterations: Optional[int] = None) -> LambdaMaxResult:
    """
    Find the smallest lambda at which the fixed-point assignment empties a sign cluster.

    Brackets exponentially from lambda = 1 and bisects to relative
    precision `rtol`. The returned value always empties a cluster; the
    value (1 - rtol) * result is re-checked and the search continues
    below it if that point empties a cluster too.

    Returns:
        LambdaMaxResult: value, saturated flag (cap reached without
        emptying), and the number of fixed-point evaluations.
    """
    rtol = settings.EC2T_LAMBDA_MAX_RTOL if rtol is None else rtol
    cap = settings.EC2T_LAMBDA_MAX_CAP if cap is None else cap
    max_iterations = settings.EC2T_FIXED_POINT_ITERATIONS if max_iterations is None else max_iterations
    w = as_weight_array(weights)
    evaluations = 0

    def emptied(lam):
        nonlocal evaluations
        evaluations += 1
        return _sign_cluster_emptied(w, centroids, lam, max_iterations)

    if emptied(0.0):
        return LambdaMaxResult(0.0, False, evaluations)

    lo, hi = 0.0, 1.0
    while not emptied(hi):
        if hi >= cap:
            logger.info(f'lambda_max bracketing reached the cap {cap:g} without emptying a sign cluster')
            return LambdaMaxResult(float(cap), True, evaluations)
        lo, hi = hi, min(hi * 2.0, cap)
    logger.debug(f'lambda_max bracketed in ({lo:g}, {hi:g}]')

    clear_points = [lo]
    for _ in range(_BOUNDARY_ROUNDS):
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if emptied(mid):
                hi = mid
            else:
                lo = mid
                clear_points.append(mid)
        candidate = (1.0 - rtol) * hi
        if candidate == lo or not emptied(candidate):
            break
        hi = candidate
        lo = max(p for p in clear_points if p < hi)
    return LambdaMaxResult(hi, False, evaluations)


def compute_lambda_max(weights, centroids: CentroidSet, **kwargs) -> float:
    return search_lambda_max(weights, centroids, **kwargs).value


def zero_cluster_dominates(weights, centroids: CentroidSet) -> bool:
    """
    True when P_0 >= max(P_n, P_p) for the lambda = 0 assignment.

    In that case raising lambda only moves weights from a sign cluster to
    w_0, so the number of zeros is non-decreasing in lambda and a sign
    cluster empties at a single boundary. Otherwise the entropy term
    drains w_0 toward the larger sign cluster.
    """
    probabilities = cluster_stats(nearest_assignment(weights, centroids)).probabilities
    return probabilities[1] >= max(probabilities[0], probabilities[2])


def schedule_bound(weights, centroids: CentroidSet, search: LambdaMaxResult) -> float:
    """lambda_max used by the schedule: the searched value, or 0 where a positive lambda cannot add zeros."""
    if search.saturated or not zero_cluster_dominates(weights, centroids):
        return 0.0
    return search.value


def _map_layers(function, *iterables, threads: Optional[int] = None):
    threads = settings.EC2T_THREADS if threads is None else threads
    if threads <= 1:
        return list(map(function, *iterables))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(function, *iterables))


def build_lambda_state(gamma: float, layer_weights: Sequence, layer_centroids: Sequence[CentroidSet],
                       threads: Optional[int] = None) -> Tuple[LambdaState, List[LambdaMaxResult]]:
    """
    Compute delta and lambda_max for every quantized layer.

    Returns the state with the applied bounds and the raw search results.
    """
    arrays = [as_weight_array(w) for w in layer_weights]
    deltas = compute_delta([a.size for a in arrays])
    searches = _map_layers(search_lambda_max, arrays, layer_centroids, threads=threads)
    bounds = [schedule_bound(w, c, s) for w, c, s in zip(arrays, layer_centroids, searches)]
    for index, (search, bound) in enumerate(zip(searches, bounds)):
        if bound != search.value:
            logger.debug(f'layer {index}: entropy term disabled (saturated={search.saturated}, '
                         f'searched lambda_max={search.value:g})')
    state = LambdaState(gamma=gamma, deltas=tuple(deltas), lambda_maxes=tuple(bounds))
    return state, searches


def reassign_layers(layer_weights: Sequence, layer_centroids: Sequence[CentroidSet], gamma: float = 0.0,
                    mode: str = MODE_EC2T, threshold_t: float = 0.0, threads: Optional[int] = None
                    ) -> Tuple[List[AssignmentMatrix], List[ClusterStats], Optional[LambdaState]]:
    """
    Full reassignment of all quantized layers.

    In ec2t mode delta and lambda_max are recomputed, lambda = gamma *
    delta * lambda_max, and every layer runs the fixed-point assignment.
    In ttq-threshold mode each layer is thresholded and no lambda state
    is produced.
    """
    arrays = [as_weight_array(w) for w in layer_weights]
    if len(arrays) != len(layer_centroids):
        raise QuantizationError('one CentroidSet is needed per quantized layer')
    state = None
    if mode == MODE_EC2T:
        state, _ = build_lambda_state(gamma, arrays, layer_centroids, threads=threads)
        lambdas = state.lambdas
    else:
        lambdas = [0.0] * len(arrays)
    results = _map_layers(
        lambda w, c, lam: quantize_layer(w, c, lam, mode=mode, threshold_t=threshold_t),
        arrays, layer_centroids, lambdas, threads=threads,
    )
    assignments = [r[0] for r in results]
    stats = [r[1] for r in results]
    return assignments, stats, state
