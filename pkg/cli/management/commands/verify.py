"""
Check an .ec2t model file: checksum and framing, mask round trip, and
agreement of the multiplication-free kernels with the dense kernels.
Usage: ec2t verify --model demo.ec2t
"""
from pathlib import Path

from django.core.management.base import CommandError
import numpy as np

from storage.codec import decode_ternary_layer, layer_from_labels
from storage.kernels import ternary_forward
from storage.model_file import model_to_bytes, read_model
from tensors.kernels import conv2d_dense, fc_dense
from tensors.tensor import LayerKind, Tensor

from cli.base import EC2TCommand

KERNEL_TOLERANCE = 1e-6


def kernel_error(layer, rng, samples: int) -> float:
    """Largest deviation of the ternary kernel from the dense one, relative to max(|dense|, 1)."""
    weights = decode_ternary_layer(layer)
    worst = 0.0
    for _ in range(samples):
        if layer.kind is LayerKind.CONV2D:
            size = layer.kernel + 3
            x = Tensor.from_array(rng.normal(size=(layer.in_channels, size, size)))
            dense = conv2d_dense(x, weights, stride=1, padding=1)
            sparse = ternary_forward(x, layer, stride=1, padding=1)
        else:
            x = Tensor.from_array(rng.normal(size=layer.in_channels))
            dense = fc_dense(x, weights)
            sparse = ternary_forward(x, layer)
        reference = dense.numpy().astype(np.float64)
        scale = np.maximum(np.abs(reference), 1.0)
        worst = max(worst, float(np.max(np.abs(reference - sparse.numpy()) / scale)))
    return worst


class Command(EC2TCommand):
    help = 'Verify checksum, mask round trip and ternary kernel equivalence of an .ec2t file'

    def add_command_arguments(self, parser):
        parser.add_argument('--model', required=True, help='.ec2t model file')
        parser.add_argument('--samples', type=int, default=3, help='Random inputs per layer')

    def run(self, **options):
        path = Path(options['model'])
        layers = read_model(path)
        rng = np.random.default_rng(options['seed'])
        rows = []
        for layer in layers:
            labels = layer.labels()
            rebuilt = layer_from_labels(labels, layer.w_n, layer.w_p, name=layer.name, kind=layer.kind,
                                        bn_bias=layer.bn_bias)
            error = kernel_error(layer, rng, options['samples'])
            rows.append({
                'name': layer.name,
                'round_trip': rebuilt == layer,
                'kernel_max_error': error,
                'kernel_ok': error <= KERNEL_TOLERANCE,
            })
        file_round_trip = model_to_bytes(layers) == path.read_bytes()
        ok = file_round_trip and all(row['round_trip'] and row['kernel_ok'] for row in rows)
        payload = {'model': str(path), 'file_round_trip': file_round_trip, 'layers': rows, 'ok': ok}
        table = '\n'.join(
            [f'{path}: file round trip {"ok" if file_round_trip else "FAILED"}']
            + [f'  {row["name"]:<20} masks {"ok" if row["round_trip"] else "FAILED"}, '
               f'kernel error {row["kernel_max_error"]:.2e}' for row in rows]
        )
        self.emit(payload, table, options['output'])
        if not ok:
            raise CommandError(f'{path} failed verification')
        self.stderr.write(self.style.SUCCESS(f'{path}: {len(rows)} layers verified'))
