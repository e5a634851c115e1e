"""
Entry point of the `ec2t` program: `ec2t <subcommand> [options]`.

Exit status 0 on success, 2 on usage errors, 1 on runtime errors.
"""
from importlib import import_module
import logging
import sys

logger = logging.getLogger(__name__)

COMMANDS = {
    'scale': 'scale',
    'quantize': 'quantize',
    'train-demo': 'train_demo',
    'export': 'export',
    'import': 'import',
    'report': 'report',
    'verify': 'verify',
}

USAGE = 'usage: ec2t {' + ','.join(COMMANDS) + '} [options]\n' \
        "Run 'ec2t <subcommand> --help' for the options of a subcommand.\n"


def dispatch(argv, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if argv and argv[0] in ('-h', '--help'):
        stdout.write(USAGE)
        return 0
    if not argv or argv[0] not in COMMANDS:
        if argv:
            stderr.write(f'ec2t: unknown subcommand {argv[0]!r}\n')
        stderr.write(USAGE)
        return 2

    name = argv[0]
    module = import_module(f'cli.management.commands.{COMMANDS[name]}')
    command = module.Command(stdout=stdout, stderr=stderr)
    try:
        command.run_from_argv(['ec2t', name] + list(argv[1:]))
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
    except Exception as e:
        logger.debug(f'ec2t {name} failed', exc_info=True)
        stderr.write(f'ec2t {name}: error: {str(e)}\n')
        return 1
    return 0


def main():
    import django

    django.setup()
    sys.exit(dispatch(sys.argv[1:]))
