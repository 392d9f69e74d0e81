"""Command-line entrypoint for the sensor network detection simulator"""
from app import __version__
from app.config import get_settings
from app.routers import experiments
from typing import List, Optional
import argparse
import logging
import sys

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensornet",
        description="Neyman-Pearson detection in analog sensor networks with a massive-antenna fusion center",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log per grid point progress")
    subparsers = parser.add_subparsers(dest="command", required=True)
    experiments.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    args = build_parser().parse_args(argv)

    # Configure logging
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level.upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    logger.debug(f"Command: {args.command}, workers: {settings.workers or 'all cores'}")
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
