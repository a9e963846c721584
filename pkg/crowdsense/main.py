import logging
import sys
from typing import Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler

from . import settings
from .cli import commands, constants, printer
from .exceptions import CrowdSenseException

_console = Console(stderr=True)


def configure_logging(level: str = settings.LOG_LEVEL) -> None:
    # Log records go to stderr through rich
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=_console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    try:
        args = commands.parse(argv)
    except CrowdSenseException as e:
        return e.exit_code
    except SystemExit as e:
        return e.code or constants.EXIT_OK

    try:
        return commands.dispatch(args)
    except CrowdSenseException as e:
        printer.print_error(f"{args.command} failed [{e.error_code}]: {e.message}")
        return commands.exit_code_for(e)
    except KeyboardInterrupt:
        printer.print_error("Interrupted")
        return constants.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
