# commands/rank.py
# 'rank': numerical rank of a trained model's empirical log-prob matrix.

import argparse

from core import config
from core.app_base import CheckpointCommand
from utils.analysis import model_rank_report
from utils.heads import rank_bound


class Rank(CheckpointCommand):
    name = "rank"
    help = "Numerical rank of the log-prob matrix a checkpoint produces on a split."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        super().configure(parser)
        parser.add_argument("--max-rows", type=int, default=config.RANK_MAX_ROWS)

    def run(self, args: argparse.Namespace) -> int:
        ckpt, stream = self.load(args)
        report = model_rank_report(ckpt, stream, args.max_rows)
        self.app.emit({"split": args.split, "rank_bound": rank_bound(ckpt.model_config.head), **report.to_dict()})
        return 0


def setup(app):
    app.add_command(Rank(app))
