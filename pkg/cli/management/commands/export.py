"""
Write ternary layers to an .ec2t model file.
Usage: ec2t export --demo --gamma 0.2 --out demo.ec2t
       ec2t export --weights conv1.ect-tensor fc.ect-tensor --gamma 0.2 --out model.ec2t
"""
from pathlib import Path

from django.core.management.base import CommandError

from quantizer.centroids import init_centroids
from quantizer.schedule import reassign_layers
from storage.codec import encode_ternary_layer
from storage.model_file import write_model
from tensors.tensor_io import read_tensor
from trainer.training import train_ec2t

from cli.base import EC2TCommand
from cli.management.commands.train_demo import add_training_arguments, build_training


def layer_summary(layer) -> dict:
    n_eff, m_eff = layer.effective_channels()
    return {
        'name': layer.name,
        'kind': layer.kind.value,
        'dims': list(layer.dims),
        'density': layer.density,
        'w_n': layer.w_n,
        'w_p': layer.w_p,
        'effective_in': n_eff,
        'effective_out': m_eff,
    }


class Command(EC2TCommand):
    help = 'Quantize the trained demo network or a set of tensor files into an .ec2t model file'

    def add_command_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--demo', action='store_true', help='Train the two-moons network and export it')
        source.add_argument('--weights', nargs='+', help='.ect-tensor files (M x N or M x N x K x K)')
        parser.add_argument('--out', required=True, help='Output .ec2t path')
        add_training_arguments(parser)

    def run(self, **options):
        if options['demo']:
            layers = self.demo_layers(options)
        else:
            layers = self.tensor_layers(options)
        path = write_model(options['out'], layers)
        payload = {
            'model': str(path),
            'bytes': path.stat().st_size,
            'layers': [layer_summary(layer) for layer in layers],
        }
        table = '\n'.join(
            [f'{path} ({payload["bytes"]} bytes)']
            + [f'  {s["name"]:<20} {s["kind"]:<16} {"x".join(map(str, s["dims"])):<12} density {s["density"]:.4f}'
               for s in payload['layers']]
        )
        self.emit(payload, table, options['output'])

    def demo_layers(self, options):
        arch, data, config = build_training(options)
        model, _ = train_ec2t(arch, data, config)
        return [
            encode_ternary_layer(model.assignments[i], model.centroids[i], name=model.specs[i].name)
            for i in model.quantized_indices
        ]

    def tensor_layers(self, options):
        tensors = [read_tensor(path) for path in options['weights']]
        for path, tensor in zip(options['weights'], tensors):
            if tensor.rank not in (2, 4) or (tensor.rank == 4 and tensor.shape[2] != tensor.shape[3]):
                raise CommandError(f'{path}: expected M x N or M x N x K x K weights, got {tensor.shape}')
        centroids = [init_centroids(tensor) for tensor in tensors]
        assignments, _, _ = reassign_layers(tensors, centroids, gamma=options['gamma'], mode=options['mode'],
                                            threshold_t=options['threshold_t'])
        return [
            encode_ternary_layer(assignment, layer_centroids, name=Path(path).stem)
            for path, assignment, layer_centroids in zip(options['weights'], assignments, centroids)
        ]
