# commands/eval.py
# 'eval': perplexity and bits-per-character of a checkpoint on one split.

import argparse

from core.app_base import CheckpointCommand
from utils.training import evaluate


class Eval(CheckpointCommand):
    name = "eval"
    help = "Report NLL, perplexity and BPC of a checkpoint on a corpus split."
    default_split = "test"

    def run(self, args: argparse.Namespace) -> int:
        ckpt, stream = self.load(args)
        result = evaluate(ckpt, stream, ckpt.vocab)
        self.app.emit({"split": args.split, **result.to_dict()})
        return 0


def setup(app):
    app.add_command(Eval(app))
