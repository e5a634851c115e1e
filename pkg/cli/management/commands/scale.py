"""
Solve the compound scaling constraint and scale the MicroNet descriptor.
Usage: ec2t scale --phi 1 --fix-r
"""
from scaling.architecture import micronet_descriptor, scale_architecture
from scaling.solver import solve_compound_scaling

from cli.base import EC2TCommand


class Command(EC2TCommand):
    help = 'Solve a*b^2*c^2 ~= 2 on a grid and print (d, w, r) with the scaled architecture'

    def add_command_arguments(self, parser):
        parser.add_argument('--phi', type=float, required=True, help='Compound coefficient (>= 0)')
        parser.add_argument('--fix-r', action='store_true', help='Keep the input resolution (c = 1)')
        parser.add_argument('--grid-step', type=float, default=None, help='Grid spacing in (0, 0.5]')
        parser.add_argument('--tolerance', type=float, default=None, help='Largest accepted residual')
        parser.add_argument('--arch', choices=['micronet'], default='micronet', help='Architecture to scale')
        parser.add_argument('--classes', type=int, default=10, help='Number of classes of the head')

    def run(self, **options):
        base = micronet_descriptor(options['classes'])
        solution = solve_compound_scaling(options['phi'], fix_r=options['fix_r'], grid_step=options['grid_step'],
                                          tolerance=options['tolerance'], arch=base)
        scaled = scale_architecture(base, solution)
        payload = {'solution': solution.as_dict(), 'architecture': scaled.as_dict()}
        table = '\n'.join(
            [f'a={solution.a:g} b={solution.b:g} c={solution.c:g} phi={solution.phi:g} '
             f'-> d={solution.d:.4f} w={solution.w:.4f} r={solution.r:.4f} (residual {solution.residual:.2e})',
             f'stem: {scaled.stem.in_channels} -> {scaled.stem.out_channels} channels at {scaled.input_resolution}px']
            + [f'stage {i}: {stage.repetitions} blocks, {stage.channels} channels, {stage.resolution}px'
               for i, stage in enumerate(scaled.stages, start=1)]
            + [f'head: {scaled.head.in_channels} -> {scaled.n_classes}']
        )
        self.emit(payload, table, options['output'])
