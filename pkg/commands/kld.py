# commands/kld.py
# 'kld': expected KL divergence between next-token distributions at two random positions.

import argparse

from core import config
from core.app_base import CheckpointCommand
from utils.analysis import pairwise_kld


class Kld(CheckpointCommand):
    name = "kld"
    help = "Monte-Carlo expected pairwise KL divergence of a checkpoint's predictions."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        super().configure(parser)
        parser.add_argument("--pairs", type=int, default=config.KLD_PAIRS)
        parser.add_argument("--seed", type=int, default=0)

    def run(self, args: argparse.Namespace) -> int:
        ckpt, stream = self.load(args)
        value = pairwise_kld(ckpt, stream, args.pairs, args.seed)
        self.app.emit({"split": args.split, "pairs": args.pairs, "seed": args.seed, "kld": value})
        return 0


def setup(app):
    app.add_command(Kld(app))
