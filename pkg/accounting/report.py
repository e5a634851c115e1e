"""
Per-layer and per-model reports in the column layout of a results table:
parameters, additions, multiplications, FLOPs and sparsity, each next to
the dense figure of the same layer.
"""
from dataclasses import dataclass
import logging
from typing import List, Optional, Sequence, Tuple

from storage.codec import TernaryLayer
from storage.counting import StorageCount, count_storage_params
from tensors.tensor import LayerKind, LayerSpec

from .exceptions import InconsistentModelError
from .ops import ZERO_OPS, OpsCount, count_dense_ops, count_ternary_ops, dense_param_count

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerReport:
    name: str
    kind: LayerKind
    quantized: bool
    ops: OpsCount
    dense_ops: OpsCount
    params: float
    dense_params: int
    zero_params: int
    storage: Optional[StorageCount] = None

    def as_dict(self) -> dict:
        row = {
            'name': self.name,
            'kind': self.kind.value,
            'quantized': self.quantized,
            'ops': self.ops.as_dict(),
            'dense_ops': self.dense_ops.as_dict(),
            'params': self.params,
            'dense_params': self.dense_params,
            'zero_params': self.zero_params,
        }
        if self.storage is not None:
            row['storage'] = self.storage.as_dict()
        return row


@dataclass(frozen=True)
class ModelReport:
    layers: Tuple[LayerReport, ...]
    input_resolution: int
    tree_adder: bool

    @property
    def ops(self) -> OpsCount:
        total = ZERO_OPS
        for layer in self.layers:
            total = total + layer.ops
        return total

    @property
    def dense_ops(self) -> OpsCount:
        total = ZERO_OPS
        for layer in self.layers:
            total = total + layer.dense_ops
        return total

    @property
    def params(self) -> float:
        return sum(layer.params for layer in self.layers)

    @property
    def dense_params(self) -> int:
        return sum(layer.dense_params for layer in self.layers)

    @property
    def sparsity(self) -> float:
        """Zero-valued parameters over all parameters of the network."""
        total = self.dense_params
        return sum(layer.zero_params for layer in self.layers) / total if total else 0.0

    @property
    def param_reduction(self) -> float:
        return 1.0 - self.params / self.dense_params if self.dense_params else 0.0

    @property
    def flops_reduction(self) -> float:
        dense = self.dense_ops.flops
        return 1.0 - self.ops.flops / dense if dense else 0.0

    def as_dict(self) -> dict:
        return {
            'input_resolution': self.input_resolution,
            'tree_adder': self.tree_adder,
            'layers': [layer.as_dict() for layer in self.layers],
            'totals': {
                'params': self.params,
                'dense_params': self.dense_params,
                'ops': self.ops.as_dict(),
                'dense_ops': self.dense_ops.as_dict(),
                'sparsity': self.sparsity,
                'param_reduction': self.param_reduction,
                'flops_reduction': self.flops_reduction,
            },
        }


def _check_consistent(spec: LayerSpec, layer: TernaryLayer):
    if spec.kind is not layer.kind:
        raise InconsistentModelError(f'{spec.name}: spec is {spec.kind.value}, masks are {layer.kind.value}')
    if tuple(spec.weight_shape) != tuple(layer.dims):
        raise InconsistentModelError(
            f'{spec.name}: spec weight shape {spec.weight_shape} does not match mask dims {layer.dims}'
        )


def model_report(model: Sequence[Tuple[LayerSpec, Optional[TernaryLayer]]], input_resolution: int,
                 tree_adder: bool = False) -> ModelReport:
    """
    Count every layer of a model.

    Layers paired with a TernaryLayer use ternary operation counts and
    dual-mask storage; the others are counted dense. A batch-norm layer
    directly after a ternary layer is folded into it: its biases are
    stored with the ternary layer (M_eff / 2) and the batch-norm row
    contributes no parameters of its own.

    Raises:
        InconsistentModelError: if a spec and its masks disagree.
    """
    rows: List[LayerReport] = []
    for index, (spec, layer) in enumerate(model):
        dense_ops = count_dense_ops(spec, input_resolution)
        dense_params = dense_param_count(spec)
        if layer is None:
            folded = (spec.kind is LayerKind.BATCH_NORM and index > 0 and model[index - 1][1] is not None)
            rows.append(LayerReport(
                name=spec.name, kind=spec.kind, quantized=False, ops=dense_ops, dense_ops=dense_ops,
                params=0.0 if folded else float(dense_params), dense_params=dense_params, zero_params=0,
            ))
            continue
        if spec.kind is LayerKind.BATCH_NORM:
            raise InconsistentModelError(f'{spec.name}: batch-norm layers cannot carry ternary masks')
        _check_consistent(spec, layer)
        followed_by_bn = index + 1 < len(model) and model[index + 1][0].kind is LayerKind.BATCH_NORM
        storage = count_storage_params(layer, include_bn=followed_by_bn or layer.bn_bias is not None)
        ops = count_ternary_ops(layer, spec.spatial(input_resolution), tree_adder=tree_adder)
        bias = dense_params - spec.weight_count
        rows.append(LayerReport(
            name=spec.name, kind=spec.kind, quantized=True, ops=ops, dense_ops=dense_ops,
            params=storage.total + bias, dense_params=dense_params,
            zero_params=layer.total - layer.popcount, storage=storage,
        ))
    report = ModelReport(layers=tuple(rows), input_resolution=input_resolution, tree_adder=tree_adder)
    logger.debug(f'Model report: {len(rows)} layers, {report.params:.1f} params, {report.ops.flops} FLOPs')
    return report


def dense_report(specs: Sequence[LayerSpec], input_resolution: int) -> ModelReport:
    return model_report([(spec, None) for spec in specs], input_resolution)


def format_table(report: ModelReport) -> str:
    """Fixed-width text table, one row per layer plus a total row."""
    header = f'{"layer":<28}{"kind":<16}{"params":>14}{"#+":>14}{"#x":>14}{"#FLOPs":>14}{"sparsity":>10}'
    lines = [header, '-' * len(header)]
    for row in report.layers:
        sparsity = row.zero_params / row.dense_params if row.dense_params else 0.0
        lines.append(
            f'{row.name:<28}{row.kind.value:<16}{row.params:>14.2f}{row.ops.adds:>14}'
            f'{row.ops.mults:>14}{row.ops.flops:>14}{sparsity:>10.4f}'
        )
    lines.append('-' * len(header))
    lines.append(
        f'{"total":<28}{"":<16}{report.params:>14.2f}{report.ops.adds:>14}'
        f'{report.ops.mults:>14}{report.ops.flops:>14}{report.sparsity:>10.4f}'
    )
    lines.append(
        f'dense: {report.dense_params} params, {report.dense_ops.flops} FLOPs; '
        f'reduction: params {100 * report.param_reduction:.2f}%, FLOPs {100 * report.flops_reduction:.2f}%'
    )
    return '\n'.join(lines)
