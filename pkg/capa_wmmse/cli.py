import argparse
import logging
import sys
from typing import List, Optional

from .version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

METHOD_CHOICES = ('wmmse', 'fourier_svd', 'spda', 'dense_optimal')


def _common(parser: argparse.ArgumentParser):
    parser.add_argument('-c', '--config', help="config file (.json, .toml, .msgpack) or 'paper_default'")
    parser.add_argument('--seed', type=int, help='solver seed')
    parser.add_argument('--method', action='append', choices=METHOD_CHOICES, help='method to run (repeatable)')
    parser.add_argument('--M', type=int, dest='order', help='Gauss-Legendre samples per axis')
    parser.add_argument('--N', dest='streams', help="stream count, 'auto-fourier' or 'auto-dof'")
    parser.add_argument('--power', type=float, help='transmit power P_T')
    parser.add_argument('--frequency', type=float, help='carrier frequency in Hz')
    parser.add_argument('--output', help='output directory')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings only')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='capa-wmmse', description='Beamforming experiments for continuous apertures')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest='command', required=True)

    _common(commands.add_parser('solve', help='run every configured method once'))

    sweep = commands.add_parser('sweep', help='rate against the configured sweep variable')
    _common(sweep)
    sweep.add_argument('-j', '--jobs', type=int, help='worker processes (default: physical cores)')

    dof = commands.add_parser('dof', help='degrees of freedom against D^2 / A_R')
    _common(dof)
    dof.add_argument('--fresnel', type=float, nargs=3, metavar=('START', 'STOP', 'COUNT'),
                     help='log-spaced range of D^2 / A_R values')

    _common(commands.add_parser('correlate', help='stream correlation map of the WMMSE solution'))
    _common(commands.add_parser('bench', help='single-threaded timing table'))

    validate = commands.add_parser('validate-config', help='validate a config and print it normalised')
    _common(validate)

    return parser


def overrides(args: argparse.Namespace) -> dict:
    return {
        'solver.seed': args.seed,
        'solver.M': args.order,
        'solver.N': args.streams,
        'constants.P_T': args.power,
        'constants.f': args.frequency,
        'output.path': args.output,
        'methods': args.method,
    }


def _verbosity(args: argparse.Namespace) -> int:
    if args.verbose:
        return 2
    if args.quiet:
        return 0
    return 1


def _run(args: argparse.Namespace, verbosity: int):
    import json

    import numpy as np

    from . import experiments
    from .config import dump_config, load_config

    config = load_config(args.config, overrides(args))

    if args.command == 'validate-config':
        print(json.dumps(dump_config(config), indent=2))
    elif args.command == 'solve':
        for report in experiments.run_solve(config):
            print(f"{report.method}\t{report.rate_bits:.6f}")
    elif args.command == 'sweep':
        rows = experiments.run_sweep(config, args.jobs, verbosity)
        print(f"{len(rows)} rows written to {config.output.path}")
    elif args.command == 'dof':
        if args.fresnel:
            start, stop, count = args.fresnel
            ratios = [float(item) for item in np.geomspace(start, stop, int(count))]
            reports = experiments.run_dof(config, ratios)
        else:
            reports = experiments.run_dof(config)
        for report in reports:
            print(f"{report.fresnel_ratio:.4g}\t{report.dof}")
    elif args.command == 'correlate':
        correlation = experiments.run_correlate(config)
        print(f"max off-diagonal {correlation.max_off_diagonal:.3e}")
    elif args.command == 'bench':
        for row in experiments.run_bench(config):
            print(f"{row['frequency']:.3g}\t{row['area']:.3g}\t{row['method']}\t{row['median_ms']:.2f} ms")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    verbosity = _verbosity(args)

    from .utils import configure

    configure(verbosity)

    from .exceptions import ConfigurationError, NumericalError, UnsupportedFormat

    try:
        _run(args, verbosity)
    except ConfigurationError as e:
        for error in e.errors:
            details = error.to_dict()
            print(f"{details['field']}: {details['message']}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedFormat as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"{e.__class__.__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
