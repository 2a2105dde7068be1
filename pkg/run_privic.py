import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from privic.config_cache import ConfigCache
from privic.constants import EXIT_CAPABILITY_ERROR, EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_OK
from privic.errors import CapabilityError, ConfigError, DataError, DomainError
from privic import experiments

logger = logging.getLogger('run_privic')

COMMANDS = {
    'ingest': experiments.cmd_ingest,
    'compare': experiments.cmd_compare_mechanisms,
    'elastic': experiments.cmd_elastic_demo,
    'privic': experiments.cmd_privic,
    'markov': experiments.cmd_markov,
    'metrics': experiments.cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Location obfuscation experiments: BA channels, IBU estimation and the PRIVIC loop',
        epilog="Example: python run_privic.py privic --profile paris --seed 0 1 2 3 4 --out results/paris"
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='YAML experiment file layered over the profile')
    common.add_argument('--profile', type=str, default=os.getenv('PRIVIC_PROFILE', 'default'),
                        help='Profile under config/. Default: $PRIVIC_PROFILE or default')
    common.add_argument('--seed', type=int, nargs='+', help='One or more run seeds')
    common.add_argument('--out', type=str, help='Output directory')
    common.add_argument('--beta', type=str, help='Comma-separated loss parameters in 1/km')
    common.add_argument('--cycles', type=int, help='PRIVIC cycles')
    common.add_argument('--n', type=int, help='Samples per cycle / per estimate')
    common.add_argument('--grid', type=str, help='Grid as ROWSxCOLS, rows split latitude. Example: 12x16')
    common.add_argument('--bbox', type=str, help='lat_min,lat_max,lon_min,lon_max')
    common.add_argument('--synthetic', type=str, help='Synthetic prior: uniform, paris, sf or mixture:r,c,s,w;...')
    common.add_argument('--dataset', type=str, default=os.getenv('PRIVIC_GOWALLA'),
                        help='Gowalla check-in file. Default: $PRIVIC_GOWALLA')
    common.add_argument('--workers', type=int, help='Parallel seeded runs')
    common.add_argument('--debug', action='store_true', help='Toggle debug logging')

    subparsers.add_parser('ingest', parents=[common], help='Ingest check-ins and export the empirical PMF')
    subparsers.add_parser('compare', parents=[common], help='BA versus Laplace statistical utility')
    elastic = subparsers.add_parser('elastic', parents=[common], help='Obfuscation rows of a vulnerable and a strong cell')
    elastic.add_argument('--vulnerable', type=int, help='Cell index of the planted island')
    elastic.add_argument('--strong', type=int, help='Cell index of the dense location')
    privic = subparsers.add_parser('privic', parents=[common], help='Run the PRIVIC loop')
    privic.add_argument('--mechanism', choices=['ba', 'laplace'],
                        help='Channel per cycle: BA from the estimate (default) or the fixed Laplace baseline')
    markov = subparsers.add_parser('markov', parents=[common], help='Markov-chain analysis on the simplex mesh')
    markov.add_argument('--m', type=int, help='Number of cells')
    markov.add_argument('--k', type=int, help='Mesh granularity')
    markov.add_argument('--trials', type=int, help='Single-cycle trials per state')
    subparsers.add_parser('metrics', parents=[common], help='MI, distortion and privacy audits per beta')
    return parser


def _float_list(text: str, name: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--{name} expects comma-separated numbers, got '{text}'") from e


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values as a nested settings mapping; unset flags are left out."""
    overrides: Dict[str, Any] = {}
    dataset: Dict[str, Any] = {}
    markov: Dict[str, Any] = {}

    if args.seed:
        overrides['seeds'] = args.seed
    if args.out:
        overrides['output_dir'] = args.out
    if args.beta:
        overrides['betas'] = _float_list(args.beta, 'beta')
    if args.cycles is not None:
        overrides['cycles'] = args.cycles
    if args.n is not None:
        overrides['n'] = args.n
    if args.workers is not None:
        overrides['workers'] = args.workers
    if args.grid:
        parts = args.grid.lower().split('x')
        if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
            raise ConfigError(f"--grid expects ROWSxCOLS, got '{args.grid}'")
        dataset['rows'], dataset['cols'] = int(parts[0]), int(parts[1])
    if args.bbox:
        bbox = _float_list(args.bbox, 'bbox')
        if len(bbox) != 4:
            raise ConfigError("--bbox expects lat_min,lat_max,lon_min,lon_max")
        dataset['bbox'] = bbox
    if args.synthetic:
        dataset['synthetic'] = args.synthetic
        dataset['path'] = None
    elif args.dataset:
        dataset['path'] = args.dataset

    mechanism = getattr(args, 'mechanism', None)
    if mechanism:
        overrides['mechanism'] = mechanism

    for name in ('m', 'k', 'trials'):
        value = getattr(args, name, None)
        if value is not None:
            markov[name] = value

    if dataset:
        overrides['dataset'] = dataset
    if markov:
        overrides['markov'] = markov
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    try:
        spec = ConfigCache().experiment_spec(args.profile, args.config, overrides_from_args(args))
        command = COMMANDS[args.command]
        if args.command == 'elastic':
            result = command(spec, vulnerable=args.vulnerable, strong=args.strong)
        else:
            result = command(spec)
    except (ConfigError, DomainError) as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG_ERROR
    except DataError as e:
        logger.error("Data error: %s", e)
        return EXIT_DATA_ERROR
    except CapabilityError as e:
        logger.error("Capability exceeded: %s", e)
        return EXIT_CAPABILITY_ERROR

    print(result)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
