"""
Architecture descriptors and depth/width/resolution scaling.

A descriptor holds a stem convolution, a list of stages of residual
building blocks and a fully-connected head. `expand_layers` flattens it
into the ordered LayerSpec list used for counting.
"""
from dataclasses import dataclass, replace
import logging
import math
from typing import List, NamedTuple, Tuple

from tensors.exceptions import DimensionError
from tensors.tensor import LayerKind, LayerSpec

logger = logging.getLogger(__name__)

MICRONET_INPUT_CHANNELS = 3
MICRONET_STAGES = ((7, 16, 32), (7, 32, 16), (7, 64, 8))
BLOCK_KERNEL = 3


class StageSpec(NamedTuple):
    repetitions: int
    channels: int
    resolution: int


class ScalingFactors(NamedTuple):
    """Plain (d, w, r) multipliers, not bound to the a*b^2*c^2 constraint."""

    d: float
    w: float
    r: float


@dataclass(frozen=True)
class ArchDescriptor:
    stem: LayerSpec
    stages: Tuple[StageSpec, ...]
    head: LayerSpec
    n_classes: int

    def __post_init__(self):
        stages = tuple(StageSpec(*stage) for stage in self.stages)
        if not stages:
            raise DimensionError('An architecture needs at least one stage')
        for index, stage in enumerate(stages, start=1):
            if stage.repetitions < 1 or stage.channels < 1 or stage.resolution < 1:
                raise DimensionError(f'stage {index}: repetitions, channels and resolution must be >= 1')
        for previous, stage in zip(stages, stages[1:]):
            if stage.resolution > previous.resolution:
                raise DimensionError('Stage resolutions must not increase')
        if self.n_classes < 2:
            raise DimensionError(f'n_classes must be >= 2, got {self.n_classes}')
        if self.head.out_channels != self.n_classes:
            raise DimensionError('head output must equal n_classes')
        object.__setattr__(self, 'stages', stages)

    @property
    def input_resolution(self) -> int:
        return self.stem.h_out or self.stages[0].resolution

    @property
    def depth(self) -> int:
        return sum(stage.repetitions for stage in self.stages)

    def as_dict(self) -> dict:
        return {
            'stem': {'in_channels': self.stem.in_channels, 'out_channels': self.stem.out_channels,
                     'kernel': self.stem.kernel, 'resolution': self.input_resolution},
            'stages': [stage._asdict() for stage in self.stages],
            'head': {'in_channels': self.head.in_channels, 'out_channels': self.head.out_channels},
            'n_classes': self.n_classes,
        }


def micronet_descriptor(n_classes: int = 10) -> ArchDescriptor:
    """
    Baseline CIFAR MicroNet: 3x3 stem to 16 channels at 32x32, three
    stages of 7 blocks at 16/32/64 channels, pooled fully-connected head.
    """
    if n_classes < 2:
        raise DimensionError(f'n_classes must be >= 2, got {n_classes}')
    stem_channels, resolution = MICRONET_STAGES[0][1], MICRONET_STAGES[0][2]
    return ArchDescriptor(
        stem=LayerSpec('stem', LayerKind.CONV2D, MICRONET_INPUT_CHANNELS, stem_channels,
                       kernel=BLOCK_KERNEL, h_out=resolution, w_out=resolution),
        stages=tuple(StageSpec(*stage) for stage in MICRONET_STAGES),
        head=LayerSpec('head', LayerKind.FULLY_CONNECTED, MICRONET_STAGES[-1][1], n_classes),
        n_classes=n_classes,
    )


def micronet_supernet(n_classes: int = 10) -> ArchDescriptor:
    """The competition-size MicroNet: baseline scaled by d=3, w=2, r=1."""
    return scale_architecture(micronet_descriptor(n_classes), ScalingFactors(d=3.0, w=2.0, r=1.0))


def round_half_up(value: float) -> int:
    return max(1, math.floor(value + 0.5))


def scale_architecture(arch: ArchDescriptor, sol) -> ArchDescriptor:
    """
    Apply depth, width and resolution factors to a descriptor.

    Args:
        arch: descriptor to scale
        sol: anything with d, w and r attributes (ScalingSolution or ScalingFactors)

    Returns:
        ArchDescriptor: scaled copy; n_classes and the stem input channels are unchanged.
    """
    stages = tuple(
        StageSpec(round_half_up(stage.repetitions * sol.d),
                  round_half_up(stage.channels * sol.w),
                  round_half_up(stage.resolution * sol.r))
        for stage in arch.stages
    )
    stem_resolution = round_half_up(arch.input_resolution * sol.r)
    stem = replace(arch.stem, out_channels=round_half_up(arch.stem.out_channels * sol.w),
                   h_out=stem_resolution, w_out=stem_resolution)
    head = replace(arch.head, in_channels=stages[-1].channels)
    logger.debug(f'Scaled architecture by d={sol.d:.4g} w={sol.w:.4g} r={sol.r:.4g}: {stages}')
    return ArchDescriptor(stem=stem, stages=stages, head=head, n_classes=arch.n_classes)


def _batch_norm(name: str, channels: int, resolution: int) -> LayerSpec:
    return LayerSpec(name, LayerKind.BATCH_NORM, channels, channels, h_out=resolution, w_out=resolution)


def expand_layers(arch: ArchDescriptor) -> List[LayerSpec]:
    """
    Ordered layer list of a descriptor.

    Each building block is two 3x3 convolutions with batch-norm. A block
    that changes resolution or channel count runs its first convolution
    with stride 2 (or 1 if only channels change) and adds a 1x1
    projection with batch-norm on the shortcut. Stem and head are not
    quantized; every block convolution is.
    """
    layers = [arch.stem, _batch_norm('stem.bn', arch.stem.out_channels, arch.input_resolution)]
    channels, resolution = arch.stem.out_channels, arch.input_resolution
    for s, stage in enumerate(arch.stages, start=1):
        for b in range(1, stage.repetitions + 1):
            prefix = f'stage{s}.block{b}'
            stride = 2 if stage.resolution < resolution else 1
            layers.append(LayerSpec(f'{prefix}.conv1', LayerKind.CONV2D, channels, stage.channels,
                                    kernel=BLOCK_KERNEL, h_out=stage.resolution, w_out=stage.resolution,
                                    stride=stride, quantize_flag=True))
            layers.append(_batch_norm(f'{prefix}.bn1', stage.channels, stage.resolution))
            layers.append(LayerSpec(f'{prefix}.conv2', LayerKind.CONV2D, stage.channels, stage.channels,
                                    kernel=BLOCK_KERNEL, h_out=stage.resolution, w_out=stage.resolution,
                                    quantize_flag=True))
            layers.append(_batch_norm(f'{prefix}.bn2', stage.channels, stage.resolution))
            if channels != stage.channels or stride != 1:
                layers.append(LayerSpec(f'{prefix}.shortcut', LayerKind.CONV2D, channels, stage.channels,
                                        kernel=1, h_out=stage.resolution, w_out=stage.resolution,
                                        stride=stride, quantize_flag=True))
                layers.append(_batch_norm(f'{prefix}.shortcut_bn', stage.channels, stage.resolution))
            channels, resolution = stage.channels, stage.resolution
    layers.append(arch.head)
    return layers
