"""Run an experiment and write ``report.json``, ``tables/*.csv`` and ``plots/*.svg``."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..models import RNG_NAME
from . import plots
from .config import SWEEP_AXES, ExperimentSpec
from .suites import PointResult, evaluate_point

SCHEMA = 'qimanifold.experiment-report'
SCHEMA_VERSION = 1

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


@dataclass(frozen=True)
class SweepPoint:
    index: int
    axis: str | None
    value: float | int | None
    lam: float
    order: int
    model: object

    @property
    def label(self) -> str:
        return 'base' if self.axis is None else f'{self.axis}={self.value:g}'


def sweep_points(spec: ExperimentSpec) -> list[SweepPoint]:
    """Base point followed by one point per value of each sweep axis."""
    points = [SweepPoint(0, None, None, spec.lam, spec.order, spec.model)]
    for axis in SWEEP_AXES:
        for value in spec.sweep.get(axis, ()):
            lam, order, model = spec.lam, spec.order, spec.model
            if axis == 'lambda':
                lam = value
            elif axis == 'order':
                order = value
            elif axis == 'r':
                model = replace(model, r=value)
            else:
                model = replace(model, dim=value)
            points.append(SweepPoint(len(points), axis, value, lam, order, model))
    return points


def format_number(x) -> str:
    """Decimal with 17 significant digits; round-trips every double."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return 'nan'
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    return format(x, '.17g')


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_number(x)
    if isinstance(obj, complex):
        return {'real': _jsonable(obj.real), 'imag': _jsonable(obj.imag)}
    return obj


def _worst(statuses) -> str:
    for s in ('fail', 'skip', 'flag'):
        if s in statuses:
            return s
    return 'pass'


def write_table(path: Path, header: list[str], rows: list[list]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])


def _metric_table(points: list[SweepPoint], results: list[PointResult], key: str):
    columns = []
    for r in results:
        for name in r.metrics:
            if name not in columns:
                columns.append(name)
    rows = []
    for p, r in zip(points, results):
        first = p.value if p.axis else p.lam
        rows.append([first, _worst({c.status for c in r.checks})]
                    + [r.metrics.get(c, math.nan) for c in columns])
    return [key, 'status'] + columns, rows


def run_experiment(spec: ExperimentSpec, output_dir, *, threads: int = 1) -> tuple[int, dict]:
    """Evaluate every sweep point and write all artifacts.

    Points run in a thread pool; results are assembled in sweep order, so
    the artifacts do not depend on ``threads``.

    Returns
    -------
    exit_code, report
    """
    out = Path(output_dir)
    start = time.perf_counter()
    points = sweep_points(spec)

    def task(p: SweepPoint) -> PointResult:
        return evaluate_point(spec, p.model, p.lam, p.order)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, points))
    else:
        results = [task(p) for p in points]

    checks = []
    for p, r in zip(points, results):
        for c in r.checks:
            record = asdict(c.renamed(p.label))
            record['point'] = p.index
            checks.append(record)
    hard_failed = any(c['status'] == 'fail' and c['hard'] for c in checks)
    budget = any(r.budget_exhausted for r in results)
    exit_code = EXIT_FAILURE if hard_failed else (EXIT_BUDGET if budget else EXIT_PASS)

    tables = {}
    header, rows = _metric_table(points[:1], results[:1], 'lambda')
    write_table(out / 'tables' / 'base.csv', header, rows)
    tables['base'] = 'tables/base.csv'
    for axis in SWEEP_AXES:
        idx = [i for i, p in enumerate(points) if p.axis == axis]
        if idx:
            header, rows = _metric_table([points[i] for i in idx],
                                         [results[i] for i in idx], axis)
            write_table(out / 'tables' / f'{axis}.csv', header, rows)
            tables[axis] = f'tables/{axis}.csv'

    extras = results[0].extras
    if 'coefficients' in extras:
        co = extras['coefficients']
        write_table(out / 'tables' / 'coefficients.csv', ['k', 'c_k'],
                    [[k, c] for k, c in zip(co['order'], co['c'])])
        tables['coefficients'] = 'tables/coefficients.csv'

    figures = {}
    if 'error_curve' in extras:
        plots.series_error_plot(extras['error_curve'], out / 'plots' / 'series_error.svg')
        figures['series_error'] = 'plots/series_error.svg'
    ratios = extras.get('cumulants') or extras.get('radius')
    if ratios:
        orders = ratios.get('order') or list(range(1, len(ratios['bound_ratios']) + 1))
        values = ratios.get('bound_ratio') or ratios['bound_ratios']
        plots.bound_ratio_plot(orders, values, out / 'plots' / 'bound_ratio.svg')
        figures['bound_ratio'] = 'plots/bound_ratio.svg'
    if 'membership' in extras:
        plots.membership_plot(extras['membership'], out / 'plots' / 'membership.svg')
        figures['membership'] = 'plots/membership.svg'

    statuses = [c['status'] for c in checks]
    report = {
        'schema': SCHEMA,
        'schema_version': SCHEMA_VERSION,
        'toolkit': 'qimanifold',
        'toolkit_version': __version__,
        'rng': RNG_NAME,
        'seed': spec.model.seed,
        'spec': spec.to_dict(),
        'exit_code': exit_code,
        'summary': {s: statuses.count(s) for s in ('pass', 'fail', 'flag', 'skip')},
        'checks': checks,
        'points': [{'index': p.index, 'label': p.label, 'axis': p.axis,
                    'value': p.value, 'lambda': p.lam, 'order': p.order,
                    'dim': p.model.dim, 'r': p.model.r, 'metrics': r.metrics}
                   for p, r in zip(points, results)],
        'coefficients': extras.get('coefficients'),
        'radius': extras.get('radius'),
        'membership': extras.get('membership'),
        'cumulants': extras.get('cumulants'),
        'tables': tables,
        'plots': figures,
        'wall_clock_seconds': time.perf_counter() - start,
    }
    report = _jsonable(report)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / 'report.json', 'w', encoding='utf-8') as fh:
        json.dump(report, fh, indent=2, allow_nan=False)
        fh.write('\n')
    return exit_code, report
