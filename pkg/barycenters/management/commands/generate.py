from barycenters import experiments, io_utils
from barycenters.exceptions import InvalidSpec
from barycenters.generators import GENERATORS

from ._base import BarycenterCommand, parse_params


class Command(BarycenterCommand):
    help = 'Writes a seeded synthetic population: member measure files and a manifest.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('model', nargs='?', default=None,
                            help=f"Population generator: {', '.join(sorted(GENERATORS))}.")
        parser.add_argument('--param', action='append', default=[], metavar='KEY=VALUE',
                            help='Generator parameter; repeatable, values parsed as JSON.')
        parser.add_argument('--name', default=None, help='Output subdirectory (default: the model name).')

    def run(self, **options):
        config = io_utils.read_json(options['config']) if options['config'] else {}
        model = options['model'] or config.get('model')
        if model is None:
            raise InvalidSpec("a generator model is required, as argument or in the config file")
        params = {**config.get('params', {}), **parse_params(options['param'])}
        seed = options['seed'] if options['seed'] is not None else config.get('seed', 0)
        manifest, built = experiments.cmd_generate(
            model, params, seed=seed,
            out_dir=options['out_dir'] or config.get('out_dir'),
            name=options['name'] or config.get('name'),
        )
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {len(built.measures)} {built.family} members and {manifest}"
        ))
