import copy
import json
import logging
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from django.core.exceptions import ValidationError
from django.forms import CharField, FloatField, IntegerField
from django.utils.translation import gettext as _

from .channel import PhysicalConstants
from .exceptions import ConfigurationError, DetailValidationError, UnsupportedFormat
from .fields import BooleanField, EnumField, FieldList, FormField, PositiveFloatField, StreamCountField, VectorField
from .forms import Form
from .geometry import ApertureGeometry, apertures_intersect
from .population_strategies import ConstantsStrategy, DataclassStrategy, GeometryStrategy
from .settings import Settings
from .wmmse import InitMode, SolverConfig

logger = logging.getLogger(__name__)

PAPER_DEFAULT = 'paper_default'


class Method(Enum):
    WMMSE = 'wmmse'
    FOURIER_SVD = 'fourier_svd'
    SPDA = 'spda'
    DENSE_OPTIMAL = 'dense_optimal'


class SweepVariable(Enum):
    POWER = 'power'
    APERTURE = 'aperture'
    DISTANCE = 'distance'
    FREQUENCY = 'frequency'
    SPACING = 'spacing'


class SweepScale(Enum):
    LINEAR = 'linear'
    LOG = 'log'


class OutputFormat(Enum):
    JSON = 'json'
    CSV = 'csv'
    MSGPACK = 'msgpack'


def default_tx() -> ApertureGeometry:
    return ApertureGeometry(length_x=0.5, length_y=0.5)


def default_rx() -> ApertureGeometry:
    return ApertureGeometry(length_x=0.5, length_y=0.5, offset=(0.0, 0.0, 10.0))


@dataclass
class SolverSettings:
    """
    Solver block. streams is a positive integer, "auto-fourier" (Fourier mode
    count, capped by the quadrature size) or "auto-dof" (numeric DoF estimate).
    """
    order: int = 10
    streams: Union[int, str] = 'auto-fourier'
    threshold: float = 1e-6
    max_iterations: int = 100
    seed: int = 42
    init: InitMode = InitMode.MATCHED_FILTER
    fourier_order: Optional[int] = None
    dense_samples: Optional[int] = None
    dense_verify: bool = False
    dof_threshold_db: float = 10.0
    dof_weighted: bool = True

    def solver_config(self, streams: int, **changes) -> SolverConfig:
        values = {
            'order': self.order,
            'streams': streams,
            'max_iterations': self.max_iterations,
            'threshold': self.threshold,
            'init': self.init,
            'seed': self.seed,
            'condition_limit': Settings().CONDITION_LIMIT,
        }
        values.update(changes)
        return SolverConfig(**values)


@dataclass
class SweepSettings:
    """
    Swept variable and its values. Aperture values are areas of both (square)
    apertures in m^2, distance values the Rx centre height in m, spacing values
    metasurface element spacings in wavelengths; element_size is the element
    edge in wavelengths.
    """
    variable: SweepVariable = SweepVariable.POWER
    start: float = 10.0
    stop: float = 1000.0
    steps: int = 7
    scale: SweepScale = SweepScale.LOG
    values: List[float] = field(default_factory=list)
    element_size: float = 0.05

    def points(self) -> List[float]:
        if self.values:
            return [float(item) for item in self.values]
        if self.steps == 1:
            return [float(self.start)]
        if self.scale == SweepScale.LOG:
            return [float(item) for item in np.geomspace(self.start, self.stop, self.steps)]
        return [float(item) for item in np.linspace(self.start, self.stop, self.steps)]


@dataclass
class OutputSettings:
    format: OutputFormat = OutputFormat.JSON
    path: str = 'results'


@dataclass
class BenchSettings:
    frequencies: List[float] = field(default_factory=lambda: [2.4e9, 5e9, 7.8e9])
    areas: List[float] = field(default_factory=lambda: [0.2, 0.3, 0.4])
    repeats: int = 5
    iterations: int = 100
    streams: int = 10
    include_channel: bool = False


@dataclass
class ExperimentConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    tx: ApertureGeometry = field(default_factory=default_tx)
    rx: ApertureGeometry = field(default_factory=default_rx)
    methods: List[Method] = field(default_factory=lambda: list(Method))
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)


SOLVER_KEYS = {
    'M': 'order',
    'N': 'streams',
    'threshold': 'threshold',
    'max_iter': 'max_iterations',
    'seed': 'seed',
    'init': 'init',
    'fourier_M': 'fourier_order',
    'dense_samples': 'dense_samples',
    'dense_verify': 'dense_verify',
    'dof_threshold_db': 'dof_threshold_db',
    'dof_weighted': 'dof_weighted',
}

BENCH_KEYS = {
    'frequencies': 'frequencies',
    'areas': 'areas',
    'repeats': 'repeats',
    'iterations': 'iterations',
    'N': 'streams',
    'include_channel': 'include_channel',
}


class GeometryBuilder(GeometryStrategy):
    def __init__(self, factory, property_name: Optional[str] = None):
        super().__init__(property_name)
        self._factory = factory

    def build(self, value: dict):
        arguments = {self._mapping[key]: item for key, item in value.items() if item is not None}
        return replace(self._factory(), **arguments)


class ConstantsForm(Form):
    f = PositiveFloatField(required=False)
    c = PositiveFloatField(required=False)
    eta = PositiveFloatField(required=False)
    sigma2 = PositiveFloatField(required=False)
    P_T = PositiveFloatField(required=False)
    power_unit = PositiveFloatField(required=False)


class ApertureForm(Form):
    L_x = PositiveFloatField(required=False)
    L_y = PositiveFloatField(required=False)
    r_o = VectorField(size=3, required=False)
    alpha = FloatField(required=False)
    beta = FloatField(required=False)
    phi = FloatField(required=False)
    polarization = VectorField(size=3, required=False)

    def clean_polarization(self):
        polarization = self.cleaned_data['polarization']
        if polarization is not None and not any(polarization):
            raise ValidationError(_('Polarization vector must be nonzero.'), code='zero_vector')
        return polarization


class SolverForm(Form):
    M = IntegerField(required=False, min_value=1)
    N = StreamCountField(required=False)
    threshold = PositiveFloatField(required=False)
    max_iter = IntegerField(required=False, min_value=1)
    seed = IntegerField(required=False, min_value=0)
    init = EnumField(InitMode, required=False)
    fourier_M = IntegerField(required=False, min_value=1)
    dense_samples = IntegerField(required=False, min_value=1)
    dense_verify = BooleanField(required=False)
    dof_threshold_db = PositiveFloatField(required=False)
    dof_weighted = BooleanField(required=False)


class SweepForm(Form):
    variable = EnumField(SweepVariable, required=False)
    start = PositiveFloatField(required=False)
    stop = PositiveFloatField(required=False)
    steps = IntegerField(required=False, min_value=1)
    scale = EnumField(SweepScale, required=False)
    values = FieldList(PositiveFloatField(), required=False)
    element_size = PositiveFloatField(required=False)

    def clean(self):
        start = self.cleaned_data.get('start') or SweepSettings.start
        stop = self.cleaned_data.get('stop') or SweepSettings.stop
        steps = self.cleaned_data.get('steps') or SweepSettings.steps
        if not self.cleaned_data.get('values') and steps > 1 and not start < stop:
            raise ValidationError(
                _('Sweep range is empty (start %(start)s must be below stop %(stop)s).'),
                code='empty_range',
                params={'start': start, 'stop': stop},
            )
        return self.cleaned_data


class OutputForm(Form):
    format = EnumField(OutputFormat, required=False)
    path = CharField(required=False)


class BenchForm(Form):
    frequencies = FieldList(PositiveFloatField(), min_length=1, required=False)
    areas = FieldList(PositiveFloatField(), min_length=1, required=False)
    repeats = IntegerField(required=False, min_value=1)
    iterations = IntegerField(required=False, min_value=1)
    N = IntegerField(required=False, min_value=1)
    include_channel = BooleanField(required=False)


class ExperimentConfigForm(Form):
    constants = FormField(ConstantsForm, required=False)
    tx = FormField(ApertureForm, required=False)
    rx = FormField(ApertureForm, required=False)
    methods = FieldList(EnumField(Method), min_length=1, required=False)
    solver = FormField(SolverForm, required=False)
    sweep = FormField(SweepForm, required=False)
    output = FormField(OutputForm, required=False)
    bench = FormField(BenchForm, required=False)

    class Meta:
        field_strategy = {
            'constants': ConstantsStrategy(),
            'tx': GeometryBuilder(default_tx),
            'rx': GeometryBuilder(default_rx),
            'solver': DataclassStrategy(SolverSettings, SOLVER_KEYS),
            'sweep': DataclassStrategy(SweepSettings),
            'output': DataclassStrategy(OutputSettings),
            'bench': DataclassStrategy(BenchSettings, BENCH_KEYS),
        }

    def clean(self):
        tx = self.Meta.field_strategy['tx'].build(self.cleaned_data.get('tx') or {})
        rx = self.Meta.field_strategy['rx'].build(self.cleaned_data.get('rx') or {})
        if apertures_intersect(tx, rx):
            raise ValidationError(_('Tx and Rx apertures intersect.'), code='overlap')
        return self.cleaned_data


def _bundled(name: str) -> bytes:
    return resources.files('capa_wmmse.defaults').joinpath(f"{name}.json").read_bytes()


def _error(message: str, path: tuple, code: str, **params) -> ConfigurationError:
    return ConfigurationError([DetailValidationError(ValidationError(message, code=code, params=params), path)])


def _set_path(data: dict, dotted: str, value):
    keys = tuple(dotted.split('.'))
    node = data
    for position, key in enumerate(keys[:-1]):
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise _error(_('This field needs to be an object!'), keys[:position + 1], 'not_dict')
    node[keys[-1]] = value


def parse_config(data: dict, source: Optional[str] = None) -> ExperimentConfig:
    form = ExperimentConfigForm(data)
    if not form.is_valid():
        for error in form.errors:
            logger.debug("Config error at %s: %s", error.field, error.to_dict()['message'])
        raise ConfigurationError(form.errors)
    config = form.populate(ExperimentConfig())
    logger.debug("Configuration loaded from %s", source or 'data')
    return config


def read_config(source: Optional[Union[str, Path]] = None) -> dict:
    """
    Raw config document. Without a source, the path in the CAPA_WMMSE_CONFIG
    environment variable is used, then the bundled `paper_default` document.
    """
    settings = Settings()
    if source is None:
        source = os.environ.get(settings.CONFIG_ENV) or PAPER_DEFAULT

    if str(source) == PAPER_DEFAULT:
        return ExperimentConfigForm.create_from_text(_bundled(PAPER_DEFAULT), '.json').data

    try:
        return ExperimentConfigForm.create_from_file(source).data
    except OSError as e:
        raise _error(_('Unable to read %(source)s: %(reason)s'), ('$body',), 'unreadable', source=source,
                     reason=e.strerror) from e


def load_config(source: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, object]] = None):
    """
    Parse and validate a config. overrides maps dotted keys (`solver.seed`,
    `constants.P_T`) to values applied on top of the file before validation.
    """
    data = copy.deepcopy(read_config(source))
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_path(data, dotted, value)
    return parse_config(data, str(source or PAPER_DEFAULT))


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def dump_config(config: ExperimentConfig) -> dict:
    """Plain document that parses back to an equal config."""
    def block(obj, mapping: Dict[str, str]) -> dict:
        return {key: _plain(getattr(obj, name)) for key, name in mapping.items()}

    constants = ConstantsStrategy()._mapping
    geometry = GeometryStrategy()._mapping
    return {
        'constants': block(config.constants, constants),
        'tx': block(config.tx, geometry),
        'rx': block(config.rx, geometry),
        'methods': _plain(config.methods),
        'solver': block(config.solver, SOLVER_KEYS),
        'sweep': block(config.sweep, {key: key for key in SweepSettings.__dataclass_fields__}),
        'output': block(config.output, {key: key for key in OutputSettings.__dataclass_fields__}),
        'bench': block(config.bench, BENCH_KEYS),
    }


def save_config(config: ExperimentConfig, path: Union[str, Path]):
    path = Path(path)
    document = dump_config(config)
    if path.suffix == '.json':
        path.write_text(json.dumps(document, indent=2) + '\n')
    elif path.suffix in ('.msgpack', '.mpk'):
        import msgpack

        path.write_bytes(msgpack.packb(document))
    elif path.suffix == '.toml':
        import toml

        def strip(node):
            return {
                key: strip(item) if isinstance(item, dict) else item for key, item in node.items() if item is not None
            }

        path.write_text(toml.dumps(strip(document)))
    else:
        raise UnsupportedFormat(f"Unsupported config format '{path.suffix}'")
