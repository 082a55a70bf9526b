# core/app_base.py
# The MosLab application: an argparse root whose subcommands are loaded as extensions.

from __future__ import annotations

import argparse
import importlib
import json
import logging
import os
import sys

from utils.checkpoint import load_checkpoint
from utils.corpus import encode_split
from .errors import CheckpointFormatError

logger = logging.getLogger(__name__)

COMMANDS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "commands")


class UsageError(Exception):
    """Raised for command-line misuse; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


class Command:
    """Base class for subcommands. Subclasses set name/help and implement configure and run."""

    name: str = ""
    help: str = ""

    def __init__(self, app: "MosLab"):
        self.app = app

    def configure(self, parser: argparse.ArgumentParser) -> None:
        pass

    def run(self, args: argparse.Namespace) -> int:
        raise NotImplementedError


class MosLab:
    def __init__(self, stdout=None):
        self.stdout = stdout or sys.stdout
        self.commands: dict[str, Command] = {}
        self.parser = _Parser(prog="moslab", description="Softmax / MoC / MoS language-modeling laboratory.")
        self.parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
        self.subparsers = self.parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_command(self, command: Command) -> None:
        sub = self.subparsers.add_parser(command.name, help=command.help, description=command.help)
        command.configure(sub)
        self.commands[command.name] = command

    def load_extensions(self) -> None:
        for filename in sorted(os.listdir(COMMANDS_DIR)):
            if filename.endswith(".py") and filename != "__init__.py":
                module = importlib.import_module(f"commands.{filename[:-3]}")
                module.setup(self)
                logger.debug(f"Loaded command extension: {filename}")

    def parse(self, argv: list[str]) -> argparse.Namespace:
        args = self.parser.parse_args(argv)
        if not args.command:
            raise UsageError(self.parser.format_help())
        return args

    def dispatch(self, args: argparse.Namespace) -> int:
        return self.commands[args.command].run(args)

    def emit(self, record: dict) -> None:
        """Writes one JSON object per line to standard output."""
        self.stdout.write(json.dumps(record, sort_keys=True) + "\n")
        self.stdout.flush()


def int_list(text: str) -> list[int]:
    """argparse type for comma-separated positive integers, e.g. '4,8,24'."""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


class CheckpointCommand(Command):
    """A command that scores one corpus split with a saved model."""

    default_split = "valid"

    def configure(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--ckpt", required=True, help="Checkpoint written by 'train'.")
        parser.add_argument("--corpus", required=True, help="Directory holding train/valid/test.txt.")
        parser.add_argument("--split", default=self.default_split, choices=("train", "valid", "test"))

    def load(self, args: argparse.Namespace):
        """Returns (checkpoint, token stream of the requested split)."""
        ckpt = load_checkpoint(args.ckpt)
        if ckpt.vocab is None:
            raise CheckpointFormatError(f"Checkpoint {args.ckpt} carries no vocabulary.")
        lowercase = bool(ckpt.extra.get("lowercase", False))
        stream = encode_split(args.corpus, args.split, ckpt.vocab, lowercase)
        logger.info(f"Scoring {args.split} split ({len(stream)} tokens) with {args.ckpt}")
        return ckpt, stream
