"""Experiment configuration files.

A config is a TOML document::

    name = "oscillator-series"
    suite = "series"            # norms | bkm | series | radius | bounds | all
    lambda = 0.5                # base evaluation point
    order = 6                   # base expansion order
    output_dir = "runs/series"  # optional

    [model]                     # fields of qimanifold.models.ModelSpec
    family = "oscillator"
    dim = 16
    seed = 0

    [sweep]                     # optional; each axis is swept on its own
    lambda = [0.1, 0.2, 0.4]
    r = [0.1, 0.2, 0.4]
    dim = [4, 8]
    order = [2, 4, 6]

    [tolerances]                # optional overrides of DEFAULT_TOLERANCES
    series_factor = 2.0
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..models import ModelSpec

SUITES = ('norms', 'bkm', 'series', 'radius', 'bounds', 'all')
SWEEP_AXES = ('lambda', 'r', 'dim', 'order')

DEFAULT_TOLERANCES = {
    'series_factor': 2.0,
    'fd_first': 1e-7,
    'fd_second': 1e-6,
    'fd_third': 1e-4,
    'quadrature': 1e-9,
    'mean': 1e-12,
    'residual': 1e-10,
    'slack': 1e-10,
    'membership': 1e-8,
}


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration.

    ``field`` names the offending key (dotted path); ``line`` is set for
    syntax errors.
    """

    def __init__(self, message: str, *, field: str | None = None,
                 line: int | None = None, source: str | None = None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f'line {line}')
        if field:
            where.append(f'field {field!r}')
        prefix = ', '.join(where)
        super().__init__(f'{prefix}: {message}' if prefix else message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    model: ModelSpec
    suite: str = 'all'
    lam: float = 0.5
    order: int = 6
    sweep: dict[str, tuple] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    output_dir: str | None = None

    def tolerance(self, key: str) -> float:
        return self.tolerances.get(key, DEFAULT_TOLERANCES[key])

    def with_seed(self, seed: int) -> 'ExperimentSpec':
        model = ModelSpec(**{**asdict(self.model), 'seed': int(seed)})
        return ExperimentSpec(self.name, model, self.suite, self.lam, self.order,
                              self.sweep, self.tolerances, self.output_dir)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'suite': self.suite,
            'lambda': self.lam,
            'order': self.order,
            'model': asdict(self.model),
            'sweep': {k: list(v) for k, v in self.sweep.items()},
            'tolerances': dict(sorted(self.tolerances.items())),
            'output_dir': self.output_dir,
        }


def _number(value, key: str, source, *, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'expected a number, got {value!r}', field=key, source=source)
    if not math.isfinite(value):
        raise ConfigError(f'expected a finite number, got {value!r}', field=key,
                          source=source)
    if integer:
        if int(value) != value:
            raise ConfigError(f'expected an integer, got {value!r}', field=key,
                              source=source)
        return int(value)
    return float(value)


def _model(table, source) -> ModelSpec:
    if not isinstance(table, dict):
        raise ConfigError('expected a table', field='model', source=source)
    known = {f.name for f in fields(ModelSpec)}
    for key in table:
        if key not in known:
            raise ConfigError(f'unknown key (expected one of {sorted(known)})',
                              field=f'model.{key}', source=source)
    try:
        return ModelSpec(**table)
    except (TypeError, ValueError) as exc:
        bad = next((k for k in table if k in str(exc)), None)
        raise ConfigError(str(exc), field=f'model.{bad}' if bad else 'model',
                          source=source) from exc


def parse_config(doc: dict, source: str | None = None) -> ExperimentSpec:
    """Validate a parsed TOML document and build an :class:`ExperimentSpec`."""
    allowed = {'name', 'suite', 'lambda', 'order', 'output_dir', 'model', 'sweep',
               'tolerances'}
    for key in doc:
        if key not in allowed:
            raise ConfigError(f'unknown key (expected one of {sorted(allowed)})',
                              field=key, source=source)
    if 'name' not in doc or not isinstance(doc['name'], str) or not doc['name']:
        raise ConfigError('a non-empty string is required', field='name', source=source)
    suite = doc.get('suite', 'all')
    if suite not in SUITES:
        raise ConfigError(f'unknown suite {suite!r}; expected one of {SUITES}',
                          field='suite', source=source)
    lam = _number(doc.get('lambda', 0.5), 'lambda', source)
    order = _number(doc.get('order', 6), 'order', source, integer=True)
    if lam == 0:
        raise ConfigError('must be nonzero', field='lambda', source=source)
    if order < 1:
        raise ConfigError('must be at least 1', field='order', source=source)
    model = _model(doc.get('model', {}), source)

    sweep = {}
    raw_sweep = doc.get('sweep', {})
    if not isinstance(raw_sweep, dict):
        raise ConfigError('expected a table', field='sweep', source=source)
    for axis, values in raw_sweep.items():
        key = f'sweep.{axis}'
        if axis not in SWEEP_AXES:
            raise ConfigError(f'unknown axis (expected one of {SWEEP_AXES})',
                              field=key, source=source)
        if not isinstance(values, list) or not values:
            raise ConfigError('expected a non-empty array', field=key, source=source)
        integer = axis in ('dim', 'order')
        vals = tuple(_number(v, key, source, integer=integer) for v in values)
        if axis == 'lambda' and any(v == 0 for v in vals):
            raise ConfigError('lambda values must be nonzero', field=key, source=source)
        if axis in ('r', 'dim', 'order') and any(v <= 0 for v in vals):
            raise ConfigError('values must be positive', field=key, source=source)
        sweep[axis] = vals

    tolerances = {}
    raw_tol = doc.get('tolerances', {})
    if not isinstance(raw_tol, dict):
        raise ConfigError('expected a table', field='tolerances', source=source)
    for key, value in raw_tol.items():
        path = f'tolerances.{key}'
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f'unknown tolerance (expected one of '
                              f'{sorted(DEFAULT_TOLERANCES)})', field=path, source=source)
        value = _number(value, path, source)
        if not value > 0:
            raise ConfigError(f'tolerance must be positive, got {value!r}',
                              field=path, source=source)
        tolerances[key] = value

    out = doc.get('output_dir')
    if out is not None and not isinstance(out, str):
        raise ConfigError('expected a string', field='output_dir', source=source)
    return ExperimentSpec(doc['name'], model, suite, lam, order, sweep, tolerances, out)


def load_config(path) -> ExperimentSpec:
    """Read and validate a TOML experiment config.

    Raises
    ------
    ConfigError
        On unreadable files, TOML syntax errors (with the line number) and
        invalid fields (with the dotted field name).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f'cannot read config: {exc.strerror}', source=str(path)) from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno, source=str(path)) from exc
    return parse_config(doc, source=str(path))
