"""
Parameter and operation report of a model file or a built-in architecture.
Usage: ec2t report --model demo.ec2t [--tree-adder] [--table]
       ec2t report --arch micronet --supernet --classes 100
"""
from django.core.management.base import CommandError

from accounting.report import dense_report, format_table, model_report
from scaling.architecture import expand_layers, micronet_descriptor, micronet_supernet
from storage.model_file import read_model
from tensors.tensor import LayerSpec

from cli.base import EC2TCommand


def spec_for_layer(layer) -> LayerSpec:
    return LayerSpec(layer.name, layer.kind, layer.in_channels, layer.out_channels,
                     kernel=layer.kernel, quantize_flag=True)


class Command(EC2TCommand):
    help = 'Print params, additions, multiplications, FLOPs and sparsity per layer and in total'

    def add_command_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--model', help='.ec2t model file')
        source.add_argument('--arch', choices=['micronet'], help='Built-in architecture (dense counts)')
        parser.add_argument('--classes', type=int, default=10, help='Number of classes (--arch)')
        parser.add_argument('--supernet', action='store_true', help='Use the d=3, w=2 MicroNet (--arch)')
        parser.add_argument('--resolution', type=int, default=None,
                            help='Output spatial size of conv layers read from a model file (default 1)')
        parser.add_argument('--tree-adder', action='store_true', help='Count accumulations with a tree adder')

    def run(self, **options):
        if options['resolution'] is not None and options['resolution'] < 1:
            raise CommandError('--resolution must be >= 1', returncode=2)
        if options['model']:
            layers = read_model(options['model'])
            resolution = options['resolution'] or 1
            report = model_report([(spec_for_layer(layer), layer) for layer in layers], resolution,
                                  tree_adder=options['tree_adder'])
        else:
            build = micronet_supernet if options['supernet'] else micronet_descriptor
            arch = build(options['classes'])
            report = dense_report(expand_layers(arch), options['resolution'] or arch.input_resolution)
        self.emit(report.as_dict(), format_table(report), options['output'])
