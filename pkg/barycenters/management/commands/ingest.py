import json

from barycenters import experiments
from barycenters.exceptions import InvalidSpec
from barycenters.serializers import COPULA, UNIVARIATE

from ._base import BarycenterCommand


class Command(BarycenterCommand):
    help = 'Turns CSV sample files (one measure per file) into quantile-grid measure files.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('paths', nargs='+', help='CSV files; rows are observations.')
        parser.add_argument('--family', choices=[UNIVARIATE, COPULA], default=UNIVARIATE)
        parser.add_argument('--grid-size', dest='grid_size', type=int, default=None,
                            help='Quantile levels per marginal.')
        parser.add_argument('--copula', default=None,
                            help='Declared copula as JSON, e.g. {"kind": "independence"}.')
        parser.add_argument('--name', default='ingested', help='Output subdirectory.')

    def run(self, **options):
        copula_spec = None
        if options['copula']:
            try:
                copula_spec = json.loads(options['copula'])
            except json.JSONDecodeError as e:
                raise InvalidSpec(f"--copula is not valid JSON: {e}") from e
        manifest, report = experiments.cmd_ingest(
            options['paths'], family=options['family'], m=options['grid_size'],
            out_dir=options['out_dir'], name=options['name'], copula_spec=copula_spec,
        )
        for source, target, count in report:
            self.stdout.write(f"{source}: {count} observations -> {target}")
        self.stdout.write(self.style.SUCCESS(f"Manifest written to {manifest}"))
