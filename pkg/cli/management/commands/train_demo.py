"""
Train the reference two-moons network and write per-epoch metrics as CSV.
Usage: ec2t train-demo --gamma 0.2 --epochs 200 --seed 7
       ec2t train-demo --sweep 0,0.1,0.2,0.3,0.4
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from trainer.datasets import gen_two_moons
from trainer.model import MLPArchitecture
from trainer.reporting import write_metrics_csv, write_sweep_csv
from trainer.training import TrainConfig, run_gamma_sweep, train_ec2t

from cli.base import EC2TCommand


def parse_gammas(value: str):
    try:
        gammas = [float(part) for part in value.split(',') if part.strip()]
    except ValueError:
        raise CommandError(f'--sweep expects comma-separated numbers, got {value!r}', returncode=2)
    if not gammas or any(g < 0 for g in gammas):
        raise CommandError(f'--sweep needs one or more gamma values >= 0, got {value!r}', returncode=2)
    return gammas


def add_training_arguments(parser):
    parser.add_argument('--gamma', type=float, default=0.0, help='Sparsification intensity')
    parser.add_argument('--epochs', type=int, default=None, help='Training epochs')
    parser.add_argument('--batch-size', type=int, default=None, help='Mini-batch size')
    parser.add_argument('--learning-rate', type=float, default=None, help='SGD step for latent weights')
    parser.add_argument('--centroid-learning-rate', type=float, default=None, help='SGD step for centroids')
    parser.add_argument('--reassign-every', type=int, default=None, help='Steps between reassignments')
    parser.add_argument('--samples', type=int, default=settings.EC2T_TRAIN_SAMPLES, help='Two-moons points')
    parser.add_argument('--noise', type=float, default=settings.EC2T_TRAIN_NOISE, help='Two-moons noise')
    parser.add_argument('--mode', choices=['ec2t', 'ttq-threshold'], default='ec2t', help='Reassignment rule')
    parser.add_argument('--t', dest='threshold_t', type=float, default=0.0, help='Threshold for ttq-threshold')
    parser.add_argument('--exclude-first', action='store_true', help='Keep the first layer at full precision')


def build_training(options):
    config = TrainConfig.from_settings(
        gamma=options['gamma'],
        epochs=options['epochs'],
        batch_size=options['batch_size'],
        learning_rate=options['learning_rate'],
        centroid_learning_rate=options['centroid_learning_rate'],
        reassign_every=options['reassign_every'],
        seed=options['seed'],
        mode=options['mode'],
        threshold_t=options['threshold_t'],
    )
    data = gen_two_moons(options['samples'], options['noise'], options['seed'])
    return MLPArchitecture(exclude_first=options['exclude_first']), data, config


class Command(EC2TCommand):
    help = 'Train the 2-16-16-2 two-moons network with ternary hidden layers and write CSV metrics'
    structured_output = False

    def add_command_arguments(self, parser):
        add_training_arguments(parser)
        parser.add_argument('--sweep', nargs='?', const=settings.EC2T_SWEEP_GAMMAS, default=None,
                            help='Comma-separated gammas (default list: EC2T_SWEEP_GAMMAS); '
                                 'writes one summary row per gamma')
        parser.add_argument('--out', default=None, help='CSV file (default: stdout)')

    def run(self, **options):
        if options['sweep'] and options['mode'] != 'ec2t':
            raise CommandError('--sweep varies gamma, which only the ec2t mode uses', returncode=2)
        arch, data, config = build_training(options)
        if options['out']:
            with Path(options['out']).open('w', newline='') as stream:
                self.write(arch, data, config, options, stream)
            self.stderr.write(self.style.SUCCESS(f'Wrote {options["out"]}'))
        else:
            self.write(arch, data, config, options, self.stdout)

    def write(self, arch, data, config, options, stream):
        if options['sweep']:
            write_sweep_csv(run_gamma_sweep(parse_gammas(options['sweep']), data, config, arch), stream)
        else:
            _, metrics = train_ec2t(arch, data, config)
            write_metrics_csv(metrics, stream)
