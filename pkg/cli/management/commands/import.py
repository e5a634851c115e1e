"""
Decode an .ec2t model file into one .ect-tensor file per layer.
Usage: ec2t import --model demo.ec2t --out-dir layers/
"""
from pathlib import Path

from storage.codec import decode_ternary_layer
from storage.model_file import read_model
from tensors.tensor_io import write_tensor

from cli.base import EC2TCommand
from cli.management.commands.export import layer_summary


def tensor_filename(index: int, name: str) -> str:
    safe = ''.join(ch if ch.isalnum() or ch in '._-' else '_' for ch in name).strip('.')
    return f'{index:03d}_{safe or "layer"}.ect-tensor'


class Command(EC2TCommand):
    help = 'Decode every layer of an .ec2t file into .ect-tensor files and print a summary'

    def add_command_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Input .ec2t file')
        parser.add_argument('--out-dir', required=True, help='Directory for the decoded tensors')

    def run(self, **options):
        layers = read_model(options['model'])
        out_dir = Path(options['out_dir'])
        out_dir.mkdir(parents=True, exist_ok=True)
        summaries = []
        for index, layer in enumerate(layers):
            path = write_tensor(out_dir / tensor_filename(index, layer.name), decode_ternary_layer(layer))
            summary = layer_summary(layer)
            summary['file'] = str(path)
            summary['bn_bias'] = list(layer.bn_bias) if layer.bn_bias is not None else None
            summaries.append(summary)
        table = '\n'.join(f'{s["name"]:<20} -> {s["file"]}' for s in summaries)
        self.emit({'model': options['model'], 'layers': summaries}, table, options['output'])
