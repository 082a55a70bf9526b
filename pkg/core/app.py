# core/app.py
# The main entry point: python -m core.app <command> [flags]

import logging
import sys

from . import config
from .app_base import MosLab, UsageError
from .errors import MosLabError

logger = logging.getLogger("main")


def setup_logging(verbose: bool = False) -> None:
    """Human-readable logs go to stderr; stdout is reserved for JSON lines."""
    level = logging.DEBUG if verbose else getattr(logging, config.LOG_LEVEL, logging.INFO)
    handlers = [logging.StreamHandler(sys.stderr)]
    if config.LOG_FILE:
        handlers.append(logging.FileHandler(config.LOG_FILE, encoding="utf-8"))
    logging.basicConfig(level=level, format=config.LOG_FORMAT, datefmt=config.LOG_DATEFMT,
                        handlers=handlers)
    logging.getLogger("joblib").setLevel(logging.WARNING)


def run(argv: list[str] | None = None, stdout=None) -> int:
    """Runs one command. Exit codes: 0 success, 1 runtime failure, 2 usage error."""
    argv = sys.argv[1:] if argv is None else argv
    app = MosLab(stdout=stdout)
    app.load_extensions()
    try:
        args = app.parse(argv)
    except UsageError as e:
        sys.stderr.write(str(e).rstrip() + "\n")
        return 2
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        config.validate_config()
    except ValueError as e:
        sys.stderr.write(f"Configuration error: {e}\n")
        return 1
    setup_logging(args.verbose)

    try:
        return app.dispatch(args)
    except FileNotFoundError as e:
        logger.error(str(e))
        return 1
    except MosLabError as e:
        logger.debug("Command failed", exc_info=True)
        logger.error(f"{type(e).__name__}: {e}")
        return 1


def main():
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        logger.info("Interrupted by user.")
        sys.exit(1)


if __name__ == "__main__":
    main()
