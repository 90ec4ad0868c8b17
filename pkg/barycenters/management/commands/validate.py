from barycenters import experiments

from ._base import BarycenterCommand


class Command(BarycenterCommand):
    help = 'Validates measure files, manifests, experiment specs and run records.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('paths', nargs='+')

    def run(self, **options):
        paths = list(options['paths'])
        if options['config']:
            paths.append(options['config'])
        for path in paths:
            self.stdout.write(f"{path}: {experiments.validate_file(path)}")
        self.stdout.write(self.style.SUCCESS(f"{len(paths)} files valid"))
