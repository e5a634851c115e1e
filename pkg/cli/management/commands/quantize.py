"""
Quantize one weight tensor and print its assignment diagnostics.
Usage: ec2t quantize --weights layer.ect-tensor --gamma 0.2
"""
from django.core.management.base import CommandError

from quantizer.assignment import MODE_EC2T, MODE_TTQ_THRESHOLD, quantize_layer
from quantizer.centroids import init_centroids
from quantizer.schedule import build_lambda_state
from tensors.tensor_io import read_tensor

from cli.base import EC2TCommand

MODE_ALIASES = {'ec2t': MODE_EC2T, 'ttq': MODE_TTQ_THRESHOLD, 'ttq-threshold': MODE_TTQ_THRESHOLD}


class Command(EC2TCommand):
    help = 'Ternarize a tensor file and report histogram, sparsity, centroids and lambda diagnostics'

    def add_command_arguments(self, parser):
        parser.add_argument('--weights', required=True, help='Path to an .ect-tensor file')
        parser.add_argument('--gamma', type=float, default=0.0, help='Sparsification intensity (ec2t mode)')
        parser.add_argument('--mode', choices=sorted(MODE_ALIASES), default='ec2t', help='Assignment rule')
        parser.add_argument('--t', dest='threshold_t', type=float, default=0.0,
                            help='Relative threshold in [0, 1) for ttq mode')

    def run(self, **options):
        mode = MODE_ALIASES[options['mode']]
        if options['gamma'] < 0:
            raise CommandError(f'--gamma must be >= 0, got {options["gamma"]}', returncode=2)
        weights = read_tensor(options['weights'])
        centroids = init_centroids(weights)
        diagnostics = None
        lam = 0.0
        if mode == MODE_EC2T:
            state, searches = build_lambda_state(options['gamma'], [weights], [centroids])
            lam = state.lambdas[0]
            diagnostics = {
                'gamma': state.gamma,
                'delta': state.deltas[0],
                'lambda_max': searches[0].value,
                'lambda_max_saturated': searches[0].saturated,
                'lambda_max_applied': state.lambda_maxes[0],
                'fixed_point_evaluations': searches[0].evaluations,
                'lambda': lam,
            }
        assignment, stats = quantize_layer(weights, centroids, lam, mode=mode, threshold_t=options['threshold_t'])
        payload = {
            'shape': list(weights.shape),
            'mode': mode,
            'histogram': stats.as_dict()['counts'],
            'probabilities': stats.as_dict()['probabilities'],
            'sparsity': assignment.sparsity,
            'centroids': centroids.as_dict(),
            'lambda': diagnostics,
        }
        table = '\n'.join([
            f'shape {"x".join(str(d) for d in weights.shape)}, mode {mode}',
            f'counts n={stats.count_n} 0={stats.count_zero} p={stats.count_p}, sparsity {assignment.sparsity:.4f}',
            f'centroids w_n={centroids.w_n:.6g} w_p={centroids.w_p:.6g}',
        ] + ([f'lambda_max={diagnostics["lambda_max"]:.6g} lambda={lam:.6g}'] if diagnostics else []))
        self.emit(payload, table, options['output'])
