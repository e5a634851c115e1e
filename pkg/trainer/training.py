"""
Training loop for the dual model.

Each step runs the quantized forward pass, softmax cross-entropy, the
straight-through backward pass and a plain SGD update of latent weights,
biases and centroids. Every `reassign_every` steps (and once before the
first step) the labels are recomputed from the latent weights with the
layer-wise lambda schedule. The whole run draws from one seeded stream:
initialization first, then one permutation per epoch.
"""
from dataclasses import dataclass, replace
import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

from django.conf import settings
import numpy as np

from quantizer.assignment import MODE_EC2T, MODES

from .datasets import Dataset
from .exceptions import TrainingConfigError, TrainingDivergedError
from .model import (
    DualModel,
    MLPArchitecture,
    apply_gradients,
    backward_ste,
    cross_entropy,
    forward_batch,
    init_model,
)
from .rng import XorShift64Star

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.0
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.1
    centroid_learning_rate: float = 0.01
    reassign_every: Optional[int] = None
    seed: int = 20201027
    mode: str = MODE_EC2T
    threshold_t: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise TrainingConfigError(f'gamma must be >= 0, got {self.gamma}')
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainingConfigError('epochs and batch_size must be >= 1')
        if self.reassign_every is not None and self.reassign_every < 1:
            raise TrainingConfigError(f'reassign_every must be >= 1, got {self.reassign_every}')
        if self.learning_rate <= 0 or self.centroid_learning_rate <= 0:
            raise TrainingConfigError('learning rates must be > 0')
        if self.mode not in MODES:
            raise TrainingConfigError(f'unknown mode {self.mode!r}; expected one of {", ".join(MODES)}')
        if not 0 <= self.seed < 2 ** 64:
            raise TrainingConfigError(f'seed must be an unsigned 64-bit integer, got {self.seed}')

    @classmethod
    def from_settings(cls, **overrides) -> 'TrainConfig':
        values = {
            'epochs': settings.EC2T_TRAIN_EPOCHS,
            'batch_size': settings.EC2T_TRAIN_BATCH_SIZE,
            'learning_rate': settings.EC2T_TRAIN_LEARNING_RATE,
            'centroid_learning_rate': settings.EC2T_TRAIN_CENTROID_LEARNING_RATE,
            'seed': settings.EC2T_DEFAULT_SEED,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def steps_per_epoch(self, samples: int) -> int:
        return math.ceil(samples / self.batch_size)


class MetricsRow(NamedTuple):
    epoch: int
    train_loss: float
    train_accuracy: float
    model_sparsity: float
    centroids: Tuple[Tuple[str, float, float], ...]


class SweepRow(NamedTuple):
    gamma: float
    final_loss: float
    final_accuracy: float
    final_sparsity: float
    full_precision_accuracy: float


def evaluate(model: DualModel, data: Dataset) -> Tuple[float, float]:
    """
    Returns:
        tuple: (accuracy of the quantized model on `data`, label sparsity of the quantized layers)
    """
    logits, _ = forward_batch(model, data.x)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == data.y))
    return accuracy, model.sparsity


def _metrics(model: DualModel, data: Dataset, epoch: int) -> MetricsRow:
    logits, _ = forward_batch(model, data.x)
    loss, _ = cross_entropy(logits, data.y)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == data.y))
    return MetricsRow(epoch=epoch, train_loss=loss, train_accuracy=accuracy,
                      model_sparsity=model.sparsity, centroids=model.centroid_rows())


def _reassign(model: DualModel, config: TrainConfig, step: int):
    state = model.reassign(config.gamma, mode=config.mode, threshold_t=config.threshold_t)
    if model.quantized_indices:
        lambdas = ', '.join(f'{lam:.4g}' for lam in state.lambdas) if state else '-'
        logger.info(f'step {step}: reassigned labels, sparsity {model.sparsity:.4f}, lambda [{lambdas}]')


def _train(arch: MLPArchitecture, data: Dataset, config: TrainConfig) -> Tuple[DualModel, List[MetricsRow]]:
    if len(data) == 0:
        raise TrainingConfigError('training data is empty')
    rng = XorShift64Star(config.seed)
    model = init_model(arch, rng)
    steps_per_epoch = config.steps_per_epoch(len(data))
    reassign_every = config.reassign_every or steps_per_epoch
    _reassign(model, config, 0)

    metrics = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data))
        for start in range(0, len(data), config.batch_size):
            batch = order[start:start + config.batch_size]
            logits, cache = forward_batch(model, data.x[batch])
            loss, loss_grad = cross_entropy(logits, data.y[batch])
            if not math.isfinite(loss):
                raise TrainingDivergedError(f'loss became {loss} at epoch {epoch}, step {step}')
            apply_gradients(model, backward_ste(model, cache, loss_grad),
                            config.learning_rate, config.centroid_learning_rate)
            step += 1
            if step % reassign_every == 0:
                _reassign(model, config, step)
        row = _metrics(model, data, epoch)
        if not math.isfinite(row.train_loss):
            raise TrainingDivergedError(f'loss became {row.train_loss} after epoch {epoch}')
        logger.info(f'epoch {epoch}: loss {row.train_loss:.5f}, accuracy {row.train_accuracy:.4f}, '
                    f'sparsity {row.model_sparsity:.4f}')
        metrics.append(row)
    return model, metrics


def train_ec2t(arch: Optional[MLPArchitecture], data: Dataset,
               config: TrainConfig) -> Tuple[DualModel, List[MetricsRow]]:
    """
    Train the dual model with entropy-constrained reassignment
    (or thresholding when config.mode is 'ttq-threshold').

    Raises:
        TrainingDivergedError: if the loss becomes non-finite.
    """
    return _train(arch or MLPArchitecture(), data, config)


def train_full_precision(arch: Optional[MLPArchitecture], data: Dataset,
                         config: TrainConfig) -> Tuple[DualModel, List[MetricsRow]]:
    """Same loop and random stream with every layer left at full precision."""
    return _train((arch or MLPArchitecture()).full_precision(), data, config)


def run_gamma_sweep(gammas: Sequence[float], data: Dataset, config: TrainConfig,
                    arch: Optional[MLPArchitecture] = None) -> List[SweepRow]:
    """One training run per gamma with the same seed, plus one full-precision reference run."""
    arch = arch or MLPArchitecture()
    reference, _ = train_full_precision(arch, data, config)
    reference_accuracy, _ = evaluate(reference, data)
    logger.info(f'full-precision reference accuracy {reference_accuracy:.4f}')
    rows = []
    for gamma in gammas:
        _, metrics = train_ec2t(arch, data, replace(config, gamma=float(gamma)))
        final = metrics[-1]
        rows.append(SweepRow(gamma=float(gamma), final_loss=final.train_loss, final_accuracy=final.train_accuracy,
                             final_sparsity=final.model_sparsity, full_precision_accuracy=reference_accuracy))
        logger.info(f'gamma {gamma}: accuracy {final.train_accuracy:.4f}, sparsity {final.model_sparsity:.4f}')
    return rows
