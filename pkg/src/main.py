"""
Command line for the blow-up laboratory.

    python -m src.main <criterion|simulate|ensemble|verify|sweep> --config PATH
        [--out DIR] [--seed N] [--threads N] [--strict]
"""
import argparse
import sys
from typing import Callable, Dict, List, Optional

from src.config.settings import settings
from src.services.criterion_service import CriterionService
from src.services.ensemble_service import EnsembleService
from src.services.simulation_service import SimulationService
from src.services.sweep_service import SweepService
from src.services.verification_service import VerificationService
from src.utils.cli.error_handlers import create_error, exit_code_for
from src.utils.export_generator import format_table
from src.utils.logger import setup_logger
from src.utils.parsers.config_parser import ConfigError, apply_overrides, load_config

logger = setup_logger(__name__)

COMMANDS: Dict[str, Callable[[], object]] = {
    "criterion": CriterionService,
    "simulate": SimulationService,
    "ensemble": EnsembleService,
    "verify": VerificationService,
    "sweep": SweepService,
}

COMMAND_HELP = {
    "criterion": "evaluate the blow-up criterion on the initial data",
    "simulate": "integrate one path and write its norm record",
    "ensemble": "Monte Carlo ensemble with mean-square blow-up detection",
    "verify": "run the oracle suite; exit status 2 on any failed oracle",
    "sweep": "phase table over amplitude and noise strength",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMAND_HELP.items():
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="TOML experiment config")
        sub.add_argument("--out", help="output directory (overrides output.directory)")
        sub.add_argument("--seed", type=int, help="master seed (overrides ensemble.master_seed)")
        sub.add_argument("--threads", type=int, help="worker threads (overrides ensemble.threads)")
        sub.add_argument("--strict", action="store_true", help="reject unknown config keys")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.info(f"Starting {args.command} with {args.config}")
    try:
        config = load_config(args.config, strict=args.strict)
        config = apply_overrides(config, out=args.out, seed=args.seed, threads=args.threads)
    except ConfigError as e:
        for violation in e.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return exit_code_for(create_error("validation_error", f"{len(e.violations)} config violation(s)"))
    except ValueError as e:
        return exit_code_for(create_error("validation_error", str(e)))

    result, error = COMMANDS[args.command]().run(config)
    if result is not None:
        print(format_table(result.table))
        for kind, path in sorted(result.files.items()):
            print(f"{kind}: {path}")
        logger.info(f"Finished {args.command}; results in {result.run_directory}")
    return exit_code_for(error)


if __name__ == "__main__":
    sys.exit(main())
