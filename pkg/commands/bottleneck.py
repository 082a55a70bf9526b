# commands/bottleneck.py
# 'bottleneck': fits every head to a synthetic high-rank language over a (d, K) grid.

import argparse
import logging

from core import config
from core.app_base import Command, int_list
from utils.linalg import numerical_rank, svd_values
from utils.synthetic import FitConfig, bottleneck_sweep, gen_language, write_sweep_csv

logger = logging.getLogger(__name__)


class Bottleneck(Command):
    name = "bottleneck"
    help = "Sweep Softmax / MoC / MoS fits of a synthetic language and write a CSV."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--n", type=int, required=True, help="Number of contexts.")
        parser.add_argument("--m", type=int, required=True, help="Vocabulary size.")
        parser.add_argument("--r", type=int, required=True, help="Rank parameter of the language.")
        parser.add_argument("--scale", type=float, default=config.LANGUAGE_SCALE)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--d-grid", type=int_list, required=True)
        parser.add_argument("--k-grid", type=int_list, required=True)
        parser.add_argument("--out", required=True, help="CSV path.")
        parser.add_argument("--iters", type=int, default=config.FIT_ITERATIONS)
        parser.add_argument("--restarts", type=int, default=config.FIT_RESTARTS)
        parser.add_argument("--lr", type=float, default=config.FIT_LR)
        parser.add_argument("--lr-final", type=float, default=config.FIT_LR_FINAL,
                            help="Final learning rate as a fraction of --lr (cosine decay).")
        parser.add_argument("--threads", type=int, default=config.DEFAULT_THREADS)

    def run(self, args: argparse.Namespace) -> int:
        language = gen_language(args.n, args.m, args.r, args.scale, args.seed)
        true_rank = numerical_rank(svd_values(language.A))
        logger.info(f"Synthetic language {args.n}x{args.m}, r={args.r}: numerical rank {true_rank}")
        fit = FitConfig(lr=args.lr, iterations=args.iters, restarts=args.restarts, lr_final=args.lr_final)
        rows = bottleneck_sweep(language, args.d_grid, args.k_grid, fit, args.seed, args.threads)
        write_sweep_csv(rows, args.out)
        best = {}
        for row in rows:
            if row.head not in best or row.final_kl < best[row.head]["final_kl"]:
                best[row.head] = {"d": row.d, "K": row.K, "final_kl": row.final_kl, "rank": row.rank}
        self.app.emit({"cells": len(rows), "language_rank": true_rank, "best": best, "out": args.out})
        return 0


def setup(app):
    app.add_command(Bottleneck(app))
