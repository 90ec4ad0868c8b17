"""Experiment orchestration behind the management commands: building
populations from specs, running solvers, comparing methods and writing
the resulting files and ledger rows.
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import copula, generators, io_utils, quantile1d, scatterlocation, solver, spherical
from .core import FiniteSupport, PopulationModel, make_rng, require_finite, schedule_from_dict
from .exceptions import InvalidSpec, MaxIterExceeded
from .models import SolverRun
from .serializers import (
    COPULA,
    FAMILY_KINDS,
    SCATTER_LOCATION,
    SPHERICAL,
    UNIVARIATE,
    ExperimentSpecSerializer,
    ManifestSerializer,
    dump_measure,
    load_measure,
    record_from_dict,
    record_to_dict,
    validated,
)

logger = logging.getLogger(__name__)

FAMILIES = {
    UNIVARIATE: quantile1d.FAMILY,
    SCATTER_LOCATION: scatterlocation.FAMILY,
    COPULA: copula.FAMILY,
    SPHERICAL: spherical.FAMILY,
}

TRAJECTORY_COLUMNS = ('k', 'gamma', 'F', 'grad_norm_sq', 'w2_ref', 'batch_size')
COMPARE_COLUMNS = ('method', 'steps', 'final_F_gap', 'final_w2', 'wall_time', 'stop_reason')
VARIANCE_COLUMNS = ('S', 'V', 'V_se', 'V_times_S', 'V_times_S_se', 'predicted_V')


def get_family(kind):
    try:
        return FAMILIES[kind]
    except KeyError:
        raise InvalidSpec(f"unknown family {kind!r}; expected one of {FAMILY_KINDS}") from None


def _resolve(base_dir, path):
    path = Path(path)
    return path if path.is_absolute() else Path(base_dir) / path


def detect_kind(data):
    """Family kind of a measure payload from its keys."""
    if not isinstance(data, dict):
        return None
    if 'copula' in data and 'marginals' in data:
        return COPULA
    if 'generator' in data and 'profile' in data:
        return SPHERICAL
    if 'b' in data and 'sigma' in data:
        return SCATTER_LOCATION
    if 'm' in data and 'values' in data:
        return UNIVARIATE
    return None


def read_measure(path, kind=None):
    data = io_utils.read_json(path)
    detected = detect_kind(data)
    if kind is not None and detected != kind:
        raise InvalidSpec(f"{path}: expected a {kind} measure, file holds {detected or 'no known measure'}")
    return load_measure(kind or detected, data, source=str(path))


def write_measure(path, measure):
    return io_utils.write_json(path, dump_measure(measure))


def load_population(manifest_path):
    """(family kind, FiniteSupport, manifest) from a manifest and its member files."""
    manifest_path = Path(manifest_path)
    manifest = validated(ManifestSerializer, io_utils.read_json(manifest_path), str(manifest_path))
    kind = manifest['family']
    members = [read_measure(_resolve(manifest_path.parent, member), kind) for member in manifest['members']]
    return kind, FiniteSupport(manifest['weights'], members), manifest


def write_population(out_dir, built, seed=None, prefix='member'):
    """Member files plus manifest.json for a finite population."""
    out_dir = Path(out_dir)
    names = []
    for i, measure in enumerate(built.measures):
        name = f"{prefix}_{i:03d}.json"
        write_measure(out_dir / name, measure)
        names.append(name)
    manifest = {
        'family': built.family,
        'weights': [float(w) for w in built.weights],
        'members': names,
        'seed': seed,
        'description': built.description,
    }
    return io_utils.write_json(out_dir / 'manifest.json', manifest)


# --- Specs ------------------------------------------------------------------

def load_spec(config=None, **overrides):
    """Validated ExperimentSpec from a JSON file; non-None overrides (command flags) win."""
    data = io_utils.read_json(config) if config else {}
    if not isinstance(data, dict):
        raise InvalidSpec(f"{config}: an experiment spec must be a JSON object")
    data.update({key: value for key, value in overrides.items() if value is not None})
    spec = dict(validated(ExperimentSpecSerializer, data, str(config or 'command line')))
    spec['base_dir'] = Path(config).parent if config else Path.cwd()
    return spec


@dataclass
class Experiment:
    spec: dict
    family: Any
    population: PopulationModel
    initial: Any
    reference: Optional[Any]
    config: solver.SolverConfig

    @property
    def name(self):
        return self.spec['name']

    def out_dir(self):
        return io_utils.output_dir(self.spec.get('out_dir'), self.name)


def standard_member(family, like):
    """The family member a run starts from when no initial measure is given."""
    if family is quantile1d.FAMILY:
        return quantile1d.from_gaussian(0.0, 1.0, like.m)
    if family is scatterlocation.FAMILY:
        return scatterlocation.ScatterLocationMeasure(b=np.zeros(like.q), sigma=np.eye(like.q))
    if family is copula.FAMILY:
        return like.with_marginals([quantile1d.from_gaussian(0.0, 1.0, like.m)] * like.q)
    return like


def _population(spec, family):
    base_dir = spec['base_dir']
    if spec.get('population'):
        kind, population, _ = load_population(_resolve(base_dir, spec['population']))
        if kind != family.name:
            raise InvalidSpec(f"spec family {family.name} does not match population family {kind}")
        return population, None
    if spec.get('inline'):
        weights = [item['weight'] for item in spec['inline']]
        measures = [load_measure(family.name, item['measure'], source=f"inline member {i}")
                    for i, item in enumerate(spec['inline'])]
        return FiniteSupport(weights, measures), None
    model = generators.generative_model(spec['generative']['model'], **spec['generative']['params'])
    if model.family != family.name:
        raise InvalidSpec(f"generative model {spec['generative']['model']} builds {model.family} measures, "
                          f"spec family is {family.name}")
    return model.population, model.oracle


def exact_reference(family, population):
    """The oracle barycenter; a non-converged fixed point falls back to its best iterate."""
    try:
        return family.exact_barycenter(population)
    except MaxIterExceeded as e:
        logger.warning(f"Using best fixed-point iterate as reference: {e}")
        return e.best


def build_experiment(spec) -> Experiment:
    family = get_family(spec['family'])
    population, oracle = _population(spec, family)
    base_dir = spec['base_dir']

    if spec.get('reference'):
        reference = read_measure(_resolve(base_dir, spec['reference']), family.name)
    elif population.is_finite:
        reference = exact_reference(family, population)
    else:
        reference = oracle

    initial = spec.get('initial')
    if isinstance(initial, str):
        initial = read_measure(_resolve(base_dir, initial), family.name)
    elif isinstance(initial, dict):
        initial = load_measure(family.name, initial, source='initial')
    elif population.is_finite:
        initial = population.measures[0]
    else:
        initial = standard_member(family, population.sample(1, make_rng([spec['seed'], 2]))[0])

    stop = spec.get('stop') or {}
    config = solver.SolverConfig(
        schedule=schedule_from_dict(spec['schedule']),
        batch_size=spec['batch_size'],
        max_steps=spec['max_steps'],
        seed=spec['seed'],
        snapshot_stride=spec.get('snapshot_stride'),
        reference=reference,
        stop_rule=stop.get('rule', solver.MAX_STEPS),
        stop_threshold=stop.get('threshold', 0.0),
        schedule_mode=spec['schedule_mode'],
        monitor_samples=spec['monitor_samples'],
    )
    config.validate(population)
    family.check_members(initial)
    if population.is_finite:
        family.check_members(initial, *population.measures)
    return Experiment(spec, family, population, initial, reference, config)


# --- Records and the ledger -------------------------------------------------

def _finite_or_none(value):
    return None if value is None or math.isnan(value) else float(value)


def log_run(record, batch_size, record_path=''):
    return SolverRun.objects.create(
        family=record.family,
        method=record.method,
        seed=record.seed,
        schedule=record.schedule,
        batch_size=json.dumps(batch_size),
        steps=record.executed_steps,
        final_F=_finite_or_none(record.last('F')),
        final_grad_norm_sq=_finite_or_none(record.last('grad_norm_sq')),
        final_w2_reference=_finite_or_none(record.last('w2_ref')),
        stop_reason=record.stop_reason,
        wall_time=record.wall_time,
        record_path=str(record_path),
    )


def write_record(out_dir, stem, record):
    """<stem>.record.json and <stem>.trajectory.csv."""
    out_dir = Path(out_dir)
    record_path = io_utils.write_json(out_dir / f"{stem}.record.json", record_to_dict(record))
    rows = ([row[c] for c in TRAJECTORY_COLUMNS] for row in record.rows())
    csv_path = io_utils.write_csv(out_dir / f"{stem}.trajectory.csv", TRAJECTORY_COLUMNS, rows)
    return record_path, csv_path


def read_record(path):
    return record_from_dict(io_utils.read_json(path))


def recompute_scalars(record, family, population, reference=None):
    """(k, F, grad_norm_sq, w2_ref) recomputed from each snapshot of a finite-population run."""
    require_finite(population, 'recompute_scalars')
    rows = []
    for k, measure in record.snapshots:
        value, grad = family.functional_and_gradient(measure, population)
        distance = family.w2(measure, reference) if reference is not None else math.nan
        rows.append((k, value, grad, distance))
    return rows


# --- Commands ---------------------------------------------------------------

def cmd_generate(model, params=None, seed=0, out_dir=None, name=None):
    """Write a seeded synthetic population: member files plus manifest.json."""
    built = generators.generate(model, make_rng(seed), **(params or {}))
    target = io_utils.output_dir(out_dir, name or model)
    manifest = write_population(target, built, seed=seed)
    logger.info(f"Generated {len(built.measures)} {built.family} members in {target}: {built.description}")
    return manifest, built


def _copula_sampler(copula_spec, q):
    if not copula_spec:
        return copula.IndependenceCopula(q)
    spec = dict(copula_spec)
    spec.setdefault('params', {})
    if spec.get('kind') == copula.INDEPENDENCE:
        spec['params'] = {'q': q, **spec['params']}
    sampler = copula.copula_from_dict(spec)
    if sampler.q != q:
        raise InvalidSpec(f"copula of dimension {sampler.q} declared for {q}-column samples")
    return sampler


def cmd_ingest(paths, family=UNIVARIATE, m=None, out_dir=None, name='ingested', copula_spec=None):
    """One measure file per CSV sample file, plus a uniform-weight manifest.

    Returns (manifest path, [(csv path, measure path, observation count)]).
    """
    if family not in (UNIVARIATE, COPULA):
        raise InvalidSpec(f"samples can be ingested as {UNIVARIATE} or {COPULA} measures, not {family}")
    target = io_utils.output_dir(out_dir, name)
    report, measures, names = [], [], []
    for path in map(Path, paths):
        samples = io_utils.read_samples(path)
        n, q = samples.shape
        if family == UNIVARIATE:
            if q != 1:
                raise InvalidSpec(f"{path}: univariate ingestion needs one column, found {q}")
            measure = quantile1d.from_samples(samples[:, 0], m)
        else:
            sampler = _copula_sampler(copula_spec, q)
            marginals = tuple(quantile1d.from_samples(samples[:, i], m) for i in range(q))
            measure = copula.CopulaMeasure(sampler.copula_id, marginals, sampler)
        measure_name = f"{path.stem}.json"
        measure_path = write_measure(target / measure_name, measure)
        logger.info(f"Ingested {n} observations from {path} into {measure_path}")
        report.append((path, measure_path, n))
        measures.append(measure)
        names.append(measure_name)
    if not measures:
        raise InvalidSpec("no sample files given")
    manifest = io_utils.write_json(target / 'manifest.json', {
        'family': family,
        'weights': [1.0 / len(measures)] * len(measures),
        'members': names,
        'seed': None,
        'description': f"ingested from {len(measures)} sample files",
    })
    return manifest, report


@dataclass
class RunResult:
    record: Any
    record_path: Path
    csv_path: Path
    summary: dict


def cmd_run(spec) -> RunResult:
    experiment = build_experiment(spec)
    record = solver.run(experiment.family, experiment.population, experiment.initial, experiment.config)
    record_path, csv_path = write_record(experiment.out_dir(), experiment.name, record)
    log_run(record, spec['batch_size'], record_path)
    summary = {
        'steps': record.executed_steps,
        'stop_reason': record.stop_reason,
        'final_F': record.last('F'),
        'final_grad_norm_sq': record.last('grad_norm_sq'),
        'final_w2_reference': record.last('w2_ref'),
        'wall_time': record.wall_time,
    }
    return RunResult(record, record_path, csv_path, summary)


def _method_record(experiment, method, gamma):
    if method == 'sgd':
        return solver.run(experiment.family, experiment.population, experiment.initial, experiment.config)
    step = 1.0 if method == 'fixed_point' else gamma
    return solver.gradient_descent(
        experiment.family, experiment.population, experiment.initial,
        gamma=step, max_steps=experiment.spec['max_steps'], reference=experiment.reference,
    )


def cmd_compare(spec):
    """Method table (steps, F gap, W2 to the oracle, wall time) and, when
    batch sizes are given, the integrated-variance table at the initial measure.

    Returns (method rows, variance rows, [written paths]).
    """
    experiment = build_experiment(spec)
    require_finite(experiment.population, 'compare')
    options = spec.get('compare') or {'methods': ['fixed_point', 'sgd'], 'variance_batch_sizes': [], 'n_mc': 10000,
                                      'gamma': 1.0}
    family, population = experiment.family, experiment.population
    oracle_F = family.functional_F(experiment.reference, population)
    out_dir = experiment.out_dir()

    method_rows, paths = [], []
    for method in options['methods']:
        record = _method_record(experiment, method, options.get('gamma', 1.0))
        record_path, _ = write_record(out_dir, f"{experiment.name}.{method}", record)
        log_run(record, spec['batch_size'] if method == 'sgd' else len(population), record_path)
        method_rows.append({
            'method': method,
            'steps': record.executed_steps,
            'final_F_gap': record.last('F') - oracle_F,
            'final_w2': record.last('w2_ref'),
            'wall_time': record.wall_time,
            'stop_reason': record.stop_reason,
        })
        paths.append(record_path)
    paths.append(io_utils.write_csv(out_dir / f"{experiment.name}.compare.csv", COMPARE_COLUMNS,
                                    ([row[c] for c in COMPARE_COLUMNS] for row in method_rows)))

    variance_rows = []
    sizes = options.get('variance_batch_sizes') or []
    if sizes:
        mu = experiment.initial
        value, grad = family.functional_and_gradient(mu, population)
        for size in sizes:
            estimate = solver.integrated_variance(family, population, mu, size, options['n_mc'], spec['seed'])
            variance_rows.append({
                'S': size,
                'V': estimate.value,
                'V_se': estimate.se,
                'V_times_S': estimate.value * size,
                'V_times_S_se': estimate.se * size,
                'predicted_V': (2.0 * value - grad) / size,
            })
        paths.append(io_utils.write_csv(out_dir / f"{experiment.name}.variance.csv", VARIANCE_COLUMNS,
                                        ([row[c] for c in VARIANCE_COLUMNS] for row in variance_rows)))
    return method_rows, variance_rows, paths


def validate_file(path):
    """Validate one JSON file of any supported kind; returns a one-line description."""
    path = Path(path)
    data = io_utils.read_json(path)
    if isinstance(data, dict) and 'members' in data:
        kind, population, _ = load_population(path)
        return f"manifest of {len(population)} {kind} members"
    if isinstance(data, dict) and 'scalars' in data:
        record = read_record(path)
        return f"{record.family} run record with {record.executed_steps} steps and {len(record.snapshots)} snapshots"
    if isinstance(data, dict) and 'family' in data:
        spec = load_spec(path)
        experiment = build_experiment(spec)
        return f"{experiment.family.name} experiment spec {experiment.name!r} ({experiment.config.schedule.describe()})"
    kind = detect_kind(data)
    if kind is None:
        raise InvalidSpec(f"{path}: not a measure, manifest, spec or run record")
    measure = load_measure(kind, data, source=str(path))
    return f"{kind} measure {measure!r}"

