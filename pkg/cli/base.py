"""
Shared behaviour of the ec2t management commands.

Results go to stdout (JSON by default, a text table with --table).
Library errors become CommandError, which Django reports on stderr with
exit status 1; argument errors exit with status 2.
"""
import json
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from tensors.exceptions import EC2TError

logger = logging.getLogger(__name__)


class EC2TCommand(BaseCommand):
    requires_system_checks = []
    structured_output = True

    def add_arguments(self, parser):
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help=f'Seed for every randomized step (default: EC2T_DEFAULT_SEED = {settings.EC2T_DEFAULT_SEED})',
        )
        if self.structured_output:
            output = parser.add_mutually_exclusive_group()
            output.add_argument('--json', dest='output', action='store_const', const='json', default='json',
                                help='Print JSON (default)')
            output.add_argument('--table', dest='output', action='store_const', const='table',
                                help='Print a human-readable table')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        options['seed'] = settings.EC2T_DEFAULT_SEED if options['seed'] is None else options['seed']
        if not 0 <= options['seed'] < 2 ** 64:
            raise CommandError(f'--seed must be an unsigned 64-bit integer, got {options["seed"]}', returncode=2)
        try:
            self.run(**options)
        except EC2TError as e:
            logger.debug(f'{self.__class__.__module__.rsplit(".", 1)[-1]} failed: {str(e)}')
            raise CommandError(str(e)) from e

    def run(self, **options):
        raise NotImplementedError('subclasses of EC2TCommand must provide a run() method')

    def emit(self, payload: dict, table: str = None, output: str = 'json'):
        if output == 'table' and table is not None:
            self.stdout.write(table)
        else:
            self.stdout.write(json.dumps(payload, indent=2, sort_keys=True))
