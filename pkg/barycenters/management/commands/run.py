import json

from barycenters import experiments

from ._base import BarycenterCommand, format_value


def add_spec_overrides(parser):
    """Flags that override ExperimentSpec fields read from --config."""
    parser.add_argument('--family', default=None)
    parser.add_argument('--population', default=None, help='Population manifest.')
    parser.add_argument('--max-steps', dest='max_steps', type=int, default=None)
    parser.add_argument('--batch-size', dest='batch_size', type=json.loads, default=None,
                        help='Batch size, or a JSON list of per-step sizes.')
    parser.add_argument('--schedule-mode', dest='schedule_mode', choices=['convergent', 'any'], default=None)
    parser.add_argument('--snapshot-stride', dest='snapshot_stride', type=int, default=None)
    parser.add_argument('--name', default=None)


def spec_from_options(options):
    overrides = {key: options.get(key) for key in (
        'family', 'population', 'max_steps', 'batch_size', 'schedule_mode', 'snapshot_stride', 'name',
        'seed', 'out_dir',
    )}
    return experiments.load_spec(options['config'], **overrides)


class Command(BarycenterCommand):
    help = 'Runs SGD (or batch SGD) on an experiment spec and writes the record and trajectory.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_spec_overrides(parser)

    def run(self, **options):
        result = experiments.cmd_run(spec_from_options(options))
        for key, value in result.summary.items():
            self.stdout.write(f"{key}: {format_value(value)}")
        self.stdout.write(self.style.SUCCESS(f"Record written to {result.record_path} and {result.csv_path}"))
