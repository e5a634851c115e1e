"""
Dual model: full-precision latent weights plus the ternary model used in
the forward pass.

Quantized layers compute with q = materialized centroids at the current
labels; the latent weights only drive reassignment and receive the
straight-through gradient. Every change to parameters or labels bumps
`version`, which invalidates outstanding forward caches.
"""
import copy
from dataclasses import dataclass, field, replace
import logging
import math
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from quantizer.assignment import MODE_EC2T, AssignmentMatrix, nearest_assignment
from quantizer.centroids import CentroidSet, init_centroids
from quantizer.schedule import reassign_layers
from tensors.exceptions import DimensionError
from tensors.tensor import LayerKind, LayerSpec, Tensor

from .exceptions import StaleCacheError
from .rng import XorShift64Star

logger = logging.getLogger(__name__)

REFERENCE_SIZES = (2, 16, 16, 2)


@dataclass(frozen=True)
class MLPArchitecture:
    """
    Fully-connected tanh network. Layers that produce hidden activations
    are quantized; the output layer stays full precision, and so does the
    first layer when `exclude_first` is set.
    """

    sizes: Tuple[int, ...] = REFERENCE_SIZES
    exclude_first: bool = False
    quantized: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'sizes', tuple(int(s) for s in self.sizes))
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise DimensionError(f'MLP needs at least two positive layer sizes, got {self.sizes}')

    def layer_specs(self) -> List[LayerSpec]:
        last = len(self.sizes) - 2
        return [
            LayerSpec(f'fc{i + 1}', LayerKind.FULLY_CONNECTED, n_in, n_out,
                      quantize_flag=self.quantized and i < last and not (self.exclude_first and i == 0))
            for i, (n_in, n_out) in enumerate(zip(self.sizes, self.sizes[1:]))
        ]

    def full_precision(self) -> 'MLPArchitecture':
        return replace(self, quantized=False)


@dataclass
class DualModel:
    specs: List[LayerSpec]
    latent: List[np.ndarray]
    biases: List[np.ndarray]
    centroids: List[Optional[CentroidSet]]
    assignments: List[Optional[AssignmentMatrix]]
    version: int = field(default=0)

    def __post_init__(self):
        counts = {len(self.specs), len(self.latent), len(self.biases), len(self.centroids), len(self.assignments)}
        if len(counts) != 1:
            raise DimensionError('DualModel needs one entry per layer in every list')
        for i, spec in enumerate(self.specs):
            if self.latent[i].shape != spec.weight_shape or self.biases[i].shape != (spec.out_channels,):
                raise DimensionError(f'{spec.name}: parameters do not match shape {spec.weight_shape}')
            if spec.quantize_flag:
                if self.centroids[i] is None or self.assignments[i] is None:
                    raise DimensionError(f'{spec.name}: quantized layer without centroids or labels')
                if self.assignments[i].shape != spec.weight_shape:
                    raise DimensionError(f'{spec.name}: labels do not match the weight shape')

    @property
    def quantized_indices(self) -> List[int]:
        return [i for i, spec in enumerate(self.specs) if spec.quantize_flag]

    def forward_weights(self, index: int) -> np.ndarray:
        if self.specs[index].quantize_flag:
            return self.assignments[index].materialize(self.centroids[index])
        return self.latent[index]

    @property
    def sparsity(self) -> float:
        """Fraction of zero labels among all quantized-layer elements."""
        indices = self.quantized_indices
        if not indices:
            return 0.0
        zeros = sum(int(np.count_nonzero(self.assignments[i].labels == 0)) for i in indices)
        return zeros / sum(self.assignments[i].size for i in indices)

    def touch(self):
        self.version += 1

    def reassign(self, gamma: float, mode: str = MODE_EC2T, threshold_t: float = 0.0):
        """Recompute the labels of every quantized layer from the latent weights."""
        indices = self.quantized_indices
        if not indices:
            return None
        assignments, _, state = reassign_layers(
            [self.latent[i] for i in indices], [self.centroids[i] for i in indices],
            gamma=gamma, mode=mode, threshold_t=threshold_t, threads=1,
        )
        for i, assignment in zip(indices, assignments):
            self.assignments[i] = assignment
        self.touch()
        return state

    def centroid_rows(self) -> Tuple[Tuple[str, float, float], ...]:
        return tuple((self.specs[i].name, self.centroids[i].w_n, self.centroids[i].w_p)
                     for i in self.quantized_indices)

    def copy(self) -> 'DualModel':
        return copy.deepcopy(self)


def init_model(arch: MLPArchitecture, rng: XorShift64Star) -> DualModel:
    """
    Latent weights drawn in layer order from a Laplace distribution with
    variance 1/N_in, zero biases. Like pretrained weights, most of the mass
    sits near zero, so w_0 starts as the most probable cluster.
    Quantized layers start from mean-initialized centroids and
    nearest-centroid labels.
    """
    specs = arch.layer_specs()
    latent, biases, centroids, assignments = [], [], [], []
    for spec in specs:
        weights = rng.laplace_array(spec.weight_shape, scale=1.0 / math.sqrt(2.0 * spec.in_channels))
        latent.append(weights)
        biases.append(np.zeros(spec.out_channels))
        if spec.quantize_flag:
            layer_centroids = init_centroids(weights)
            centroids.append(layer_centroids)
            assignments.append(nearest_assignment(weights, layer_centroids))
        else:
            centroids.append(None)
            assignments.append(None)
    return DualModel(specs=specs, latent=latent, biases=biases, centroids=centroids, assignments=assignments)


@dataclass(frozen=True)
class ForwardCache:
    version: int
    activations: Tuple[np.ndarray, ...]
    weights: Tuple[np.ndarray, ...]

    @property
    def logits(self) -> np.ndarray:
        return self.activations[-1]


class Gradients(NamedTuple):
    latent: List[np.ndarray]
    centroids: List[Optional[Tuple[float, float]]]
    biases: List[np.ndarray]


def _as_batch(input) -> np.ndarray:
    x = input.numpy() if isinstance(input, Tensor) else np.asarray(input)
    x = x.astype(np.float64)
    return x[None, :] if x.ndim == 1 else x


def forward_batch(model: DualModel, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    if x.ndim != 2 or x.shape[1] != model.specs[0].in_channels:
        raise DimensionError(f'input must be B x {model.specs[0].in_channels}, got {x.shape}')
    activations = [x]
    weights = []
    h = x
    last = len(model.specs) - 1
    for i in range(len(model.specs)):
        w = model.forward_weights(i)
        weights.append(w)
        h = h @ w.T + model.biases[i]
        if i < last:
            h = np.tanh(h)
        activations.append(h)
    return h, ForwardCache(version=model.version, activations=tuple(activations), weights=tuple(weights))


def forward_quantized(model: DualModel, input) -> Tuple[Tensor, ForwardCache]:
    """
    Forward pass with quantized weights for quantized layers and latent
    weights elsewhere.

    Args:
        model: DualModel
        input: Tensor or array, one sample (N,) or a batch (B, N)

    Returns:
        tuple: (logits as a float32 Tensor, ForwardCache with float64 activations)
    """
    logits, cache = forward_batch(model, _as_batch(input))
    return Tensor.from_array(logits), cache


def centroid_gradients(grad_q: np.ndarray, assignment: AssignmentMatrix) -> Tuple[float, float]:
    """(dL/dw_n, dL/dw_p): sums of dL/dq over the elements labeled n and p. w_0 gets nothing."""
    labels = assignment.labels
    return float(grad_q[labels < 0].sum()), float(grad_q[labels > 0].sum())


def backward_ste(model: DualModel, cache: ForwardCache, loss_grad) -> Gradients:
    """
    Backpropagate dL/dlogits through the quantized model.

    Quantized layers pass dL/dq unchanged to their latent weights
    (identity straight-through estimator) and sum it per cluster for the
    centroids.

    Raises:
        StaleCacheError: if the model changed after the forward pass.
    """
    if cache.version != model.version:
        raise StaleCacheError(
            f'forward cache is from model version {cache.version}, model is at {model.version}'
        )
    g = _as_batch(loss_grad)
    if g.shape != cache.logits.shape:
        raise DimensionError(f'loss gradient shape {g.shape} does not match logits {cache.logits.shape}')
    count = len(model.specs)
    latent_grads = [None] * count
    bias_grads = [None] * count
    centroid_grads = [None] * count
    for i in reversed(range(count)):
        if i < count - 1:
            g = g * (1.0 - cache.activations[i + 1] ** 2)
        grad_q = g.T @ cache.activations[i]
        latent_grads[i] = grad_q
        bias_grads[i] = g.sum(axis=0)
        if model.specs[i].quantize_flag:
            centroid_grads[i] = centroid_gradients(grad_q, model.assignments[i])
        g = g @ cache.weights[i]
    return Gradients(latent=latent_grads, centroids=centroid_grads, biases=bias_grads)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(len(labels))
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / len(labels)


def apply_gradients(model: DualModel, grads: Gradients, learning_rate: float, centroid_learning_rate: float):
    """Plain SGD step; centroids keep their sign. Labels are left untouched."""
    for i, spec in enumerate(model.specs):
        model.latent[i] = model.latent[i] - learning_rate * grads.latent[i]
        model.biases[i] = model.biases[i] - learning_rate * grads.biases[i]
        if spec.quantize_flag:
            g_n, g_p = grads.centroids[i]
            current = model.centroids[i]
            model.centroids[i] = CentroidSet.clamped(current.w_n - centroid_learning_rate * g_n,
                                                     current.w_p - centroid_learning_rate * g_p)
    model.touch()


def quantized_loss(model: DualModel, x: np.ndarray, y: np.ndarray) -> float:
    logits, _ = forward_batch(model, x)
    return cross_entropy(logits, y)[0]
