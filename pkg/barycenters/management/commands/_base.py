import json
import logging

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from barycenters.exceptions import EXIT_IO, EXIT_NUMERICAL, BarycenterError

logger = logging.getLogger(__name__)


def parse_params(pairs):
    """key=value command-line pairs; values are parsed as JSON when possible."""
    params = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition('=')
        if not sep:
            raise CommandError(f"expected key=value, got {pair!r}", returncode=1)
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def format_value(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class BarycenterCommand(BaseCommand):
    """Shared flags (--seed, --out-dir, --config) and the exit-code contract:
    1 validation, 2 numerical, 3 I/O."""

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='Seed for every random draw.')
        parser.add_argument('--out-dir', dest='out_dir', default=None, help='Directory for written files.')
        parser.add_argument('--config', default=None, help='JSON file with the command settings.')

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CommandError:
            raise
        except BarycenterError as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {e}", exc_info=True)
            raise CommandError(str(e), returncode=e.exit_code) from e
        except OSError as e:
            logger.error(f"I/O error: {e}", exc_info=True)
            raise CommandError(f"I/O error: {e}", returncode=EXIT_IO) from e
        except (np.linalg.LinAlgError, FloatingPointError) as e:
            logger.error(f"Numerical error: {e}", exc_info=True)
            raise CommandError(f"Numerical error: {e}", returncode=EXIT_NUMERICAL) from e

    def run(self, **options):
        raise NotImplementedError('subclasses of BarycenterCommand must provide a run() method')

    def table(self, columns, rows):
        self.stdout.write('  '.join(f"{c:>14}" for c in columns))
        for row in rows:
            self.stdout.write('  '.join(f"{format_value(row[c]):>14}" for c in columns))
