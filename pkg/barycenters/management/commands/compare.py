from barycenters import experiments

from ._base import BarycenterCommand
from .run import add_spec_overrides, spec_from_options


def int_list(text):
    return [int(part) for part in text.split(',') if part.strip()]


class Command(BarycenterCommand):
    help = 'Compares fixed-point iteration, gradient descent and SGD on a finite population; optional variance study.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_spec_overrides(parser)
        parser.add_argument('--methods', default=None, help='Comma-separated: sgd, fixed_point, gradient_descent.')
        parser.add_argument('--variance-batch-sizes', dest='variance_batch_sizes', type=int_list, default=None,
                            help='Comma-separated batch sizes for the integrated-variance table.')
        parser.add_argument('--n-mc', dest='n_mc', type=int, default=None)

    def run(self, **options):
        spec = spec_from_options(options)
        compare = dict(spec.get('compare') or {
            'methods': ['fixed_point', 'sgd'], 'variance_batch_sizes': [], 'n_mc': 10000, 'gamma': 1.0,
        })
        if options['methods']:
            compare['methods'] = [m.strip() for m in options['methods'].split(',') if m.strip()]
        if options['variance_batch_sizes'] is not None:
            compare['variance_batch_sizes'] = options['variance_batch_sizes']
        if options['n_mc'] is not None:
            compare['n_mc'] = options['n_mc']
        spec['compare'] = compare

        method_rows, variance_rows, paths = experiments.cmd_compare(spec)
        self.table(experiments.COMPARE_COLUMNS, method_rows)
        if variance_rows:
            self.stdout.write('')
            self.table(experiments.VARIANCE_COLUMNS, variance_rows)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(paths)} files to {paths[-1].parent}"))
