"""Main entry point for the spatial-spectral unmixing application."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from rich.console import Console

from .cli import CLI
from .config import ExperimentConfig
from .errors import UnmixingError, exit_code_for
from .model import Variant

EPILOG = """
examples:
  spsu generate --seeds 0..9 --out scenes
  spsu run --method sp2u --data scenes --seeds 0..9 --out results/sp2u
  spsu run --method nmf --data scenes/seed_0 --override max_iters=2000 --out results/nmf
  spsu eval --truth scenes --results results/sp2u

exit codes: 0 success, 1 interrupted or unexpected, 2 configuration, 3 data, 4 solver
"""


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the ``generate``, ``run`` and ``eval`` subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value configuration file")
    common.add_argument("--seed", type=int, help="single seed")
    common.add_argument("--seeds", help="seed range N..M (inclusive) or comma list")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--debug", action="store_true", help="re-raise errors with a traceback")

    parser = argparse.ArgumentParser(
        prog="spsu",
        description="Joint spatial-spectral unmixing of hyperspectral images",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="generate synthetic scenes")
    gen.add_argument("--out", type=Path, required=True, help="output directory")

    run = sub.add_parser("run", parents=[common], help="run an unmixing method")
    run.add_argument("--method", choices=[v.value for v in Variant], help="method to run")
    run.add_argument("--data", type=Path, required=True, help="scene directory")
    run.add_argument("--out", type=Path, required=True, help="output directory")

    ev = sub.add_parser("eval", parents=[common], help="evaluate results against ground truth")
    ev.add_argument("--truth", type=Path, required=True, help="scene directory with ground truth")
    ev.add_argument("--results", type=Path, required=True, help="output directory of a run")

    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> dict:
    """Parse command line arguments.

    Args:
        argv: Arguments without the program name (``sys.argv[1:]`` by default).

    Returns:
        Dictionary with parsed arguments.
    """
    return vars(build_parser().parse_args(argv))


def print_help() -> None:
    """Print help message."""
    build_parser().print_help()


def build_config(args: dict) -> ExperimentConfig:
    """Configuration from the file (if any), then command-line flags, then overrides.

    Raises:
        ConfigError: On invalid keys or values.
    """
    if args.get("config"):
        config = ExperimentConfig.from_file(args["config"])
    else:
        config = ExperimentConfig.create_default()

    pairs = []
    if args.get("method"):
        pairs.append(f"method={args['method']}")
    if args.get("seed") is not None:
        pairs.append(f"seed={args['seed']}")
        if not args.get("seeds"):
            pairs.append(f"seeds={args['seed']}")
    if args.get("seeds"):
        pairs.append(f"seeds={args['seeds']}")
    pairs.extend(args.get("override") or [])
    return config.apply_overrides(pairs)


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point.

    Returns:
        Exit code (0 for success, see ``EPILOG`` for failures).
    """
    console = Console()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        print_help()
        return 2
    debug = "--debug" in argv
    cli = None

    try:
        args = parse_arguments(argv)
        config = build_config(args)

        cli = CLI(config, console)
        cli.show_banner()
        cli.show_config()

        command = args["command"]
        if command == "generate":
            cli.cmd_generate(args["out"])
        elif command == "run":
            cli.cmd_run(args["data"], args["out"])
        else:
            cli.cmd_eval(args["truth"], args["results"])

        return 0

    except SystemExit as e:
        # argparse usage errors and --help
        return e.code if isinstance(e.code, int) else (0 if e.code is None else 2)

    except KeyboardInterrupt:
        console.print("\n[yellow]Operation cancelled by user.[/yellow]")
        return 1

    except UnmixingError as e:
        console.print(f"\n[red bold]Error:[/red bold] {e}")
        if cli is not None and cli.logger is not None:
            cli.logger.log_error(None, e)
        if debug:
            raise
        return exit_code_for(e)

    except Exception as e:
        console.print(f"\n[red bold]Error:[/red bold] {str(e)}")
        if debug:
            raise
        return 1

    finally:
        if cli is not None:
            cli.close()


if __name__ == "__main__":
    sys.exit(main())
