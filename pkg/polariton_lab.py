"""
Command-line front end of polariton-lab

Usage:
    python polariton_lab.py eigs --EC 1 --EM 1 --g 0.001 --N 2000 --sweep sigma 0.001:0.2:200log
    python polariton_lab.py spectra --sigma 0.04 --output out/spectra.csv
    python polariton_lab.py relax --E1 0.9375 --ensemble --MS auto
    python polariton_lab.py transport --E1 1 --EN 1 --nu0 1
    python polariton_lab.py reproduce-fig 3 --panel a
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from app.core.config import settings
from app.services.run_service import run_service

logger = logging.getLogger(__name__)

MODES = ("eigs", "spectra", "relax", "transport", "ensemble", "sweep", "reproduce-fig")


def _sample_count(text: str):
    return text if text == "auto" else int(text)


def _offset(text: str):
    return text if text == "auto" else float(text)


def _shared_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    system = shared.add_argument_group('system')
    system.add_argument('--EC', type=float, help='Cavity energy E_C (eV)')
    system.add_argument('--EM', type=float, help='Emitter distribution center E_M (eV)')
    system.add_argument('--g', type=float, help='Single-emitter coupling g (eV)')
    system.add_argument('--N', type=int, help='Number of emitters')
    system.add_argument('--sigma', type=float, help='Lorentzian disorder half width (eV)')
    system.add_argument('--E1', type=float, help='Donor energy (eV); defaults to E_M')
    system.add_argument('--D', type=float, help='Probe coupling for matter absorption')

    reservoir = shared.add_argument_group('acceptor reservoir')
    reservoir.add_argument('--EN', type=float, help='Acceptor energy E_N (eV)')
    reservoir.add_argument('--ER', type=float, help='Reservoir center E_R (eV)')
    reservoir.add_argument('--Sigma', type=float, help='Reservoir half width (eV)')
    reservoir.add_argument('--gR', type=float, help='Acceptor-reservoir coupling (eV)')
    reservoir.add_argument('--NR', type=int, help='Number of reservoir modes')
    reservoir.add_argument('--nu0', type=float, help='Constant acceptor LDOS for the resonant rate (1/eV)')

    run = shared.add_argument_group('run')
    run.add_argument('--config', help='JSON config file; flags override its values')
    run.add_argument('--sweep', nargs=2, metavar=('AXIS', 'GRID'),
                     help='Sweep sigma, N or E1 over START:STOP:COUNT[log|lin]')
    run.add_argument('--ensemble', action='store_true', default=None,
                     help='Run the Monte Carlo disorder ensemble alongside the analytic result')
    run.add_argument('--MS', type=_sample_count, help="Samples per ensemble, or 'auto' (M_S * N = 10^6)")
    run.add_argument('--delta', type=_offset, help="Ensemble offset / broadening (eV), or 'auto'")
    run.add_argument('--site', help='Ensemble LDOS site: cavity, bright, emitter:J or dark:K')
    run.add_argument('--tail-cutoff', dest='tail_cutoff', type=float,
                     help='Redraw emitters farther than this many sigma from E_M')
    run.add_argument('--seed', type=int, help='Base seed of every random stream')
    run.add_argument('--threads', type=int, help='Worker cap (default: POLARITON_LAB_THREADS, then CPU count)')
    run.add_argument('--output', help="Output path, '-' for stdout")
    run.add_argument('--format', choices=('csv', 'json'), help='Output format')
    run.add_argument('--log-level', dest='log_level', help='Logging level (default: LOG_LEVEL setting)')
    return shared


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Disordered cavity polaritons: spectra, relaxation and transport rates',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Eigenenergies of the effective Hamiltonian over a log grid of sigma
  python polariton_lab.py eigs --EC 1 --EM 1 --g 0.001 --N 2000 --sweep sigma 0.001:0.2:200log

  # Every analytic LDOS / absorption channel, written as JSON
  python polariton_lab.py spectra --sigma 0.15 --format json --output out/spectra.json

  # Relaxation rate at E1 with the Monte Carlo check (M_S = 10^6 / N)
  python polariton_lab.py relax --E1 0.9375 --ensemble --MS auto

  # Resonant transport rate against N
  python polariton_lab.py transport --sweep N 1:1000000:61log

  # Data behind one figure panel
  python polariton_lab.py reproduce-fig 3 --panel a

  # Relaxation rate against N with finite-size ensemble columns
  python polariton_lab.py reproduce-fig 5 --panel a --ensemble --MS 50
        """
    )
    shared = _shared_flags()
    commands = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')
    for mode in MODES:
        sub = commands.add_parser(mode, parents=[shared], help=f'{mode} run')
        if mode == 'reproduce-fig':
            sub.add_argument('figure', metavar='FIG', help='Figure id: 2, 3, 4, 5 or 6')
            sub.add_argument('--panel', help='Single panel letter')
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ('EC', 'EM', 'g', 'N', 'sigma', 'E1', 'D', 'EN', 'ER', 'Sigma', 'gR', 'NR', 'nu0',
            'ensemble', 'MS', 'delta', 'site', 'tail_cutoff', 'seed', 'threads', 'output', 'format')
    overrides = {key: getattr(args, key) for key in keys}
    overrides['mode'] = args.command
    if args.sweep is not None:
        overrides['sweep'] = {'axis': args.sweep[0], 'grid': args.sweep[1]}
    if args.command == 'reproduce-fig':
        overrides['figure'] = args.figure
        overrides['panel'] = args.panel
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return run_service.main(args.config, overrides_from(args))
    except KeyboardInterrupt:
        logger.info("Run interrupted by user")
        return 1


if __name__ == "__main__":
    sys.exit(main())
