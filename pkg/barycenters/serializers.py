import math

from rest_framework import serializers

from . import copula, quantile1d, scatterlocation, spherical
from .core import ANY, CONVERGENT, RunRecord
from .exceptions import InvalidSpec, NotSpd, ValidationFailure
from .solver import STOP_RULES

UNIVARIATE = quantile1d.FAMILY.name
SCATTER_LOCATION = scatterlocation.FAMILY.name
COPULA = copula.FAMILY.name
SPHERICAL = spherical.FAMILY.name
FAMILY_KINDS = (UNIVARIATE, SCATTER_LOCATION, COPULA, SPHERICAL)


def _domain(build):
    """Run a domain constructor, reporting its validation errors as serializer errors.

    A matrix read from a file that is not positive definite is bad input too.
    """
    try:
        return build()
    except (ValidationFailure, NotSpd) as exc:
        raise serializers.ValidationError(str(exc))


# --- Measures ---------------------------------------------------------------

class QuantileGridSerializer(serializers.Serializer):
    m = serializers.IntegerField(min_value=1)
    values = serializers.ListField(child=serializers.FloatField(), allow_empty=False)

    grid_class = quantile1d.QuantileGrid

    def validate(self, data):
        if len(data['values']) != data['m']:
            raise serializers.ValidationError(f"values has {len(data['values'])} entries, m is {data['m']}")
        data['measure'] = _domain(lambda: self.grid_class(data['values']))
        return data

    @staticmethod
    def dump(grid):
        return {'m': grid.m, 'values': grid.values.tolist()}


class RadialProfileSerializer(QuantileGridSerializer):
    grid_class = spherical.RadialProfile


class ScatterLocationSerializer(serializers.Serializer):
    b = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    sigma = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()), allow_empty=False)

    def validate(self, data):
        rows = {len(row) for row in data['sigma']}
        if rows != {len(data['sigma'])}:
            raise serializers.ValidationError("sigma must be a square matrix")
        data['measure'] = _domain(lambda: scatterlocation.ScatterLocationMeasure(b=data['b'], sigma=data['sigma']))
        return data

    @staticmethod
    def dump(measure):
        return {'b': measure.b.tolist(), 'sigma': measure.sigma.tolist()}


class CopulaSpecSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[copula.INDEPENDENCE, copula.GAUSSIAN])
    params = serializers.DictField(required=False, default=dict)


class CopulaMeasureSerializer(serializers.Serializer):
    copula = CopulaSpecSerializer()
    marginals = QuantileGridSerializer(many=True, allow_empty=False)

    def validate(self, data):
        marginals = [item['measure'] for item in data['marginals']]
        spec = dict(data['copula'])
        if spec['kind'] == copula.INDEPENDENCE:
            spec['params'] = {'q': len(marginals), **spec['params']}

        def build():
            sampler = copula.copula_from_dict(spec)
            return copula.CopulaMeasure(sampler.copula_id, tuple(marginals), sampler)

        data['measure'] = _domain(build)
        return data

    @staticmethod
    def dump(measure):
        spec = measure.copula.to_dict() if measure.copula is not None else {'kind': measure.copula_id, 'params': {}}
        return {'copula': spec, 'marginals': [QuantileGridSerializer.dump(g) for g in measure.marginals]}


class SphericalMeasureSerializer(serializers.Serializer):
    generator = serializers.CharField()
    profile = RadialProfileSerializer()

    def validate(self, data):
        data['measure'] = spherical.SphericalMeasure(data['generator'], data['profile']['measure'])
        return data

    @staticmethod
    def dump(measure):
        return {'generator': measure.generator_id, 'profile': QuantileGridSerializer.dump(measure.profile)}


MEASURE_SERIALIZERS = {
    UNIVARIATE: QuantileGridSerializer,
    SCATTER_LOCATION: ScatterLocationSerializer,
    COPULA: CopulaMeasureSerializer,
    SPHERICAL: SphericalMeasureSerializer,
}


def load_measure(kind, data, source='measure'):
    """Validate a JSON payload and return the domain measure of family ``kind``."""
    if kind not in MEASURE_SERIALIZERS:
        raise InvalidSpec(f"unknown family {kind!r}; expected one of {FAMILY_KINDS}")
    serializer = MEASURE_SERIALIZERS[kind](data=data)
    if not serializer.is_valid():
        raise InvalidSpec(f"{source}: invalid {kind} measure: {serializer.errors}")
    return serializer.validated_data['measure']


def measure_kind(measure):
    if isinstance(measure, spherical.SphericalMeasure):
        return SPHERICAL
    if isinstance(measure, quantile1d.QuantileGrid):
        return UNIVARIATE
    if isinstance(measure, scatterlocation.ScatterLocationMeasure):
        return SCATTER_LOCATION
    if isinstance(measure, copula.CopulaMeasure):
        return COPULA
    raise InvalidSpec(f"cannot serialize {type(measure).__name__}")


def dump_measure(measure):
    return MEASURE_SERIALIZERS[measure_kind(measure)].dump(measure)


# --- Manifests and experiment specs -----------------------------------------

class ManifestSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=FAMILY_KINDS)
    weights = serializers.ListField(child=serializers.FloatField(min_value=0.0), allow_empty=False)
    members = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    seed = serializers.IntegerField(required=False, allow_null=True, default=None)
    description = serializers.CharField(required=False, allow_blank=True, default='')

    def validate(self, data):
        if len(data['weights']) != len(data['members']):
            raise serializers.ValidationError(
                f"{len(data['weights'])} weights for {len(data['members'])} members"
            )
        return data


class ScheduleSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=['power', 'constant'], default='power')
    scale = serializers.FloatField(required=False)
    offset = serializers.FloatField(required=False)
    exponent = serializers.FloatField(required=False)
    gamma = serializers.FloatField(required=False)

    def validate(self, data):
        if data['kind'] == 'constant' and 'gamma' not in data:
            raise serializers.ValidationError("a constant schedule needs gamma")
        return data


class StopSerializer(serializers.Serializer):
    rule = serializers.ChoiceField(choices=STOP_RULES, default=STOP_RULES[0])
    threshold = serializers.FloatField(required=False, default=0.0)


class GenerativeSerializer(serializers.Serializer):
    model = serializers.CharField()
    params = serializers.DictField(required=False, default=dict)


class InlineMemberSerializer(serializers.Serializer):
    weight = serializers.FloatField()
    measure = serializers.DictField()


class CompareSerializer(serializers.Serializer):
    methods = serializers.ListField(
        child=serializers.ChoiceField(choices=['sgd', 'fixed_point', 'gradient_descent']),
        required=False, default=lambda: ['fixed_point', 'sgd'],
    )
    variance_batch_sizes = serializers.ListField(
        child=serializers.IntegerField(min_value=1), required=False, default=list,
    )
    n_mc = serializers.IntegerField(min_value=2, required=False, default=10000)
    gamma = serializers.FloatField(min_value=0.0, max_value=1.0, required=False, default=1.0)


class ExperimentSpecSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=FAMILY_KINDS)
    population = serializers.CharField(required=False, allow_null=True, default=None)
    inline = InlineMemberSerializer(many=True, required=False, allow_null=True, default=None)
    generative = GenerativeSerializer(required=False, allow_null=True, default=None)
    schedule = ScheduleSerializer(required=False, default=lambda: {'kind': 'power'})
    schedule_mode = serializers.ChoiceField(choices=[CONVERGENT, ANY], default=CONVERGENT)
    batch_size = serializers.JSONField(required=False, default=1)
    max_steps = serializers.IntegerField(min_value=1, default=1000)
    seed = serializers.IntegerField(min_value=0, default=0)
    snapshot_stride = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    stop = StopSerializer(required=False, default=lambda: {'rule': STOP_RULES[0], 'threshold': 0.0})
    reference = serializers.CharField(required=False, allow_null=True, default=None)
    initial = serializers.JSONField(required=False, allow_null=True, default=None)
    monitor_samples = serializers.IntegerField(min_value=0, default=0)
    out_dir = serializers.CharField(required=False, allow_null=True, default=None)
    name = serializers.CharField(required=False, default='experiment')
    compare = CompareSerializer(required=False, allow_null=True, default=None)

    def validate_batch_size(self, value):
        sizes = value if isinstance(value, list) else [value]
        if not sizes or any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in sizes):
            raise serializers.ValidationError("batch_size must be a positive integer or a list of them")
        return value

    def validate(self, data):
        sources = [key for key in ('population', 'inline', 'generative') if data.get(key)]
        if len(sources) != 1:
            raise serializers.ValidationError(
                f"exactly one of population, inline or generative is required, got {sources or 'none'}"
            )
        return data


def validated(serializer_class, data, source):
    """Run a serializer and convert its errors into InvalidSpec."""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise InvalidSpec(f"{source}: {serializer.errors}")
    return serializer.validated_data


# --- Run records ------------------------------------------------------------

def _nullable(values):
    return [None if isinstance(v, float) and math.isnan(v) else v for v in values]


def _nan(values):
    return [math.nan if v is None else v for v in values]


class RunRecordSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=FAMILY_KINDS)
    seed = serializers.IntegerField(allow_null=True)
    schedule = serializers.CharField()
    method = serializers.CharField(default='sgd')
    stop_reason = serializers.CharField()
    wall_time = serializers.FloatField()
    scalars = serializers.DictField(child=serializers.ListField(child=serializers.FloatField(allow_null=True)))
    snapshots = serializers.ListField(child=serializers.DictField())
    final = serializers.DictField(required=False, allow_null=True)

    def validate_scalars(self, value):
        missing = set(RunRecord.SCALAR_COLUMNS) - set(value)
        if missing:
            raise serializers.ValidationError(f"missing scalar columns {sorted(missing)}")
        if len({len(series) for series in value.values()}) > 1:
            raise serializers.ValidationError("scalar columns differ in length")
        return value

    def to_representation(self, record):
        return {
            'family': record.family,
            'seed': record.seed,
            'schedule': record.schedule,
            'method': record.method,
            'stop_reason': record.stop_reason,
            'wall_time': record.wall_time,
            'scalars': {
                'k': record.steps,
                'gamma': _nullable(record.gammas),
                'F': _nullable(record.F),
                'grad_norm_sq': _nullable(record.grad_norm_sq),
                'w2_ref': _nullable(record.w2_ref),
                'batch_size': record.batch_sizes,
            },
            'snapshots': [{'k': k, 'measure': dump_measure(m)} for k, m in record.snapshots],
            'final': dump_measure(record.final) if record.final is not None else None,
        }

    def create(self, validated_data):
        kind = validated_data['family']
        scalars = validated_data['scalars']
        record = RunRecord(
            family=kind,
            seed=validated_data['seed'],
            schedule=validated_data['schedule'],
            method=validated_data['method'],
        )
        for values in zip(*(scalars[column] for column in RunRecord.SCALAR_COLUMNS)):
            k, gamma, value, grad, distance, size = _nan(values)
            record.append(k, gamma, value, grad, distance, size)
        for item in validated_data['snapshots']:
            record.snapshot(item['k'], load_measure(kind, item['measure'], source=f"snapshot {item['k']}"))
        final = validated_data.get('final')
        record.final = load_measure(kind, final, source='final') if final else None
        record.stop_reason = validated_data['stop_reason']
        record.wall_time = validated_data['wall_time']
        return record


def record_to_dict(record):
    return RunRecordSerializer(record).data


def record_from_dict(data):
    serializer = RunRecordSerializer(data=data)
    if not serializer.is_valid():
        raise InvalidSpec(f"invalid run record: {serializer.errors}")
    return serializer.save()
