"""Command line front end: ``qimanifold run|validate|list-suites``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .. import __version__
from .config import ConfigError, load_config
from .runner import EXIT_CONFIG, EXIT_FAILURE, EXIT_PASS, run_experiment
from .suites import CATALOG, SUITE_ORDER

OUTPUT_ENV = 'QIMANIFOLD_OUTPUT_DIR'


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='qimanifold',
        description='Run verification suites for Gibbs-state geometry.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run the experiment described by a config')
    run.add_argument('config', type=Path)
    run.add_argument('--output-dir', type=Path, default=None,
                     help=f'artifact directory (default: config value, then ${OUTPUT_ENV}, '
                          'then ./runs/<name>)')
    run.add_argument('--seed-override', type=int, default=None,
                     help='replace the model seed from the config')
    run.add_argument('--threads', type=int, default=1,
                     help='worker threads for sweep points (default: 1)')

    val = sub.add_parser('validate', help='parse and validate a config without running it')
    val.add_argument('config', type=Path)

    sub.add_parser('list-suites', help='describe the available suites')
    return parser


def _output_dir(args, spec) -> Path:
    if args.output_dir is not None:
        return args.output_dir
    if spec.output_dir:
        return Path(spec.output_dir)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env) / spec.name
    return Path('runs') / spec.name


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == 'list-suites':
        for name in SUITE_ORDER:
            print(f'{name}: {CATALOG[name]}')
        print('all: every suite above')
        return EXIT_PASS

    try:
        spec = load_config(args.config)
    except ConfigError as exc:
        print(f'config error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    if args.command == 'validate':
        print(f'{args.config}: ok (suite {spec.suite}, model {spec.model.family} '
              f'N={spec.model.dim})')
        return EXIT_PASS

    if args.threads < 1:
        print('config error: --threads must be at least 1', file=sys.stderr)
        return EXIT_CONFIG
    if args.seed_override is not None:
        try:
            spec = spec.with_seed(args.seed_override)
        except ValueError as exc:
            print(f'config error: --seed-override: {exc}', file=sys.stderr)
            return EXIT_CONFIG
    out = _output_dir(args, spec)
    code, report = run_experiment(spec, out, threads=args.threads)
    summary = report['summary']
    print(f'{spec.name}: {summary["pass"]} pass, {summary["fail"]} fail, '
          f'{summary["flag"]} flagged, {summary["skip"]} skipped -> {out}')
    if code == EXIT_FAILURE:
        for c in report['checks']:
            if c['status'] == 'fail':
                print(f'  FAIL {c["name"]}: lhs={c["lhs"]} rhs={c["rhs"]}', file=sys.stderr)
    return code


if __name__ == '__main__':
    sys.exit(main())
