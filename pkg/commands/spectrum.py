# commands/spectrum.py
# 'spectrum': cumulative distribution of normalised singular values, written as CSV.

import argparse

from core import config
from core.app_base import CheckpointCommand
from utils.analysis import empirical_logprob_matrix, spectrum_curve


class Spectrum(CheckpointCommand):
    name = "spectrum"
    help = "Write the normalised singular-value CDF of a checkpoint's log-prob matrix."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        super().configure(parser)
        parser.add_argument("--max-rows", type=int, default=config.RANK_MAX_ROWS)
        parser.add_argument("--grid", type=int, default=config.SPECTRUM_GRID, help="Threshold grid points.")
        parser.add_argument("--out", required=True, help="CSV path (threshold,cum_percent).")

    def run(self, args: argparse.Namespace) -> int:
        ckpt, stream = self.load(args)
        lp = empirical_logprob_matrix(ckpt, stream, args.max_rows)
        curve = spectrum_curve(lp.matrix, args.grid)
        curve.write_csv(args.out)
        self.app.emit({
            "split": args.split,
            "rows": int(lp.matrix.shape[0]),
            "cols": int(lp.matrix.shape[1]),
            "grid": args.grid,
            "min_normalized": float(curve.normalized.min()),
            "out": args.out,
        })
        return 0


def setup(app):
    app.add_command(Spectrum(app))
