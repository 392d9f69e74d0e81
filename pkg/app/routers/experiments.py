"""Experiment subcommands: run, validate, bounds"""
from app.models.errors import InvalidConfigError, NonFiniteResultError, SensorNetError
from app.models.schemas import ExperimentType
from app.services.experiment_service import (
    ConfigDocument,
    get_experiment_service,
    load_config,
    parse_config,
    validate,
)
from typing import Any, Dict
import argparse
import logging
import sys

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "seed": getattr(args, "seed", None),
        "trials_per_channel": getattr(args, "trials", None),
        "channel_realizations": getattr(args, "channels", None),
        "output_path": getattr(args, "out", None),
    }


def _load(args: argparse.Namespace, **extra: Any) -> ConfigDocument:
    overrides = {**_overrides(args), **extra}
    if args.config:
        return load_config(args.config, overrides)
    values = {key: str(value) for key, value in overrides.items() if value is not None}
    return ConfigDocument(values=values)


def _report_violations(violations) -> None:
    for violation in violations:
        print(f"error: {violation}", file=sys.stderr)


def _execute(document: ConfigDocument) -> int:
    try:
        config = parse_config(document)
        report = get_experiment_service().run(config)
    except InvalidConfigError as e:
        logger.error(f"Config {document.source or '<defaults>'} is invalid")
        _report_violations(e.violations)
        return EXIT_INVALID_CONFIG
    except NonFiniteResultError as e:
        logger.error(f"Experiment aborted: {e}")
        return EXIT_FAILURE
    except SensorNetError as e:
        logger.error(f"Experiment failed: {e}", exc_info=True)
        return EXIT_FAILURE

    print(report.csv_path)
    if report.agreement_fraction is not None:
        logger.info(f"Empirical PD within 3 sigma of analytic PD for {report.agreement_fraction:.1%} of channels")
    return EXIT_OK


def run_command(args: argparse.Namespace) -> int:
    """Run the experiment named in the config"""
    return _execute(_load(args))


def validate_command(args: argparse.Namespace) -> int:
    """Check a config without running it"""
    violations = validate(_load(args))
    if violations:
        _report_violations(violations)
        return EXIT_INVALID_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def bounds_command(args: argparse.Namespace) -> int:
    """Closed-form bounds for the config's network (no Monte Carlo)"""
    return _execute(_load(args, experiment=ExperimentType.BOUNDS.value))


def register(subparsers) -> None:
    """Attach the experiment subcommands to the top-level parser"""
    run = subparsers.add_parser("run", help="Run the experiment described by a config file")
    run.add_argument("--config", required=True, help="Flat key=value experiment config")
    run.add_argument("--seed", type=int, default=None, help="Override the config seed")
    run.add_argument("--trials", type=int, default=None, help="Override trials per channel")
    run.add_argument("--channels", type=int, default=None, help="Override channel realizations")
    run.add_argument("--out", default=None, help="Override the CSV output path")
    run.set_defaults(handler=run_command)

    check = subparsers.add_parser("validate", help="Report every rule a config breaks")
    check.add_argument("--config", required=True, help="Flat key=value experiment config")
    check.set_defaults(handler=validate_command)

    bounds = subparsers.add_parser("bounds", help="Write the closed-form PD bounds for a network")
    bounds.add_argument("--config", default=None, help="Config file (reference network defaults when omitted)")
    bounds.add_argument("--seed", type=int, default=None, help="Override the config seed")
    bounds.add_argument("--out", default=None, help="Override the CSV output path")
    bounds.set_defaults(handler=bounds_command)
