# commands/bench.py
# 'bench': median training-step time of each head relative to Softmax.

import argparse

from core import config
from core.app_base import Command
from utils.analysis import REFERENCE_MOS15_SLOWDOWN, BenchConfig, bench_heads
from utils.heads import HEAD_KINDS


def head_grid(text: str) -> list[tuple[str, int]]:
    """argparse type for cells such as 'mos:5,mos:15,moc:10'; a bare number means MoS."""
    cells = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        kind, _, k = part.rpartition(":")
        kind = kind or "mos"
        try:
            K = int(k)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid cell {part!r}") from None
        if kind not in HEAD_KINDS or K < 1:
            raise argparse.ArgumentTypeError(f"bad grid cell {part!r}")
        cells.append((kind, K))
    if not cells:
        raise argparse.ArgumentTypeError("grid is empty")
    return cells


class Bench(Command):
    name = "bench"
    help = "Time one training step per head at a matched batch."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--grid", type=head_grid, default=head_grid("mos:5,mos:10,mos:15"))
        parser.add_argument("--vocab", type=int, default=200)
        parser.add_argument("--d", type=int, default=32)
        parser.add_argument("--hidden", type=int, default=64)
        parser.add_argument("--batch-size", type=int, default=20)
        parser.add_argument("--bptt", type=int, default=20)
        parser.add_argument("--warmup", type=int, default=config.BENCH_WARMUP_STEPS)
        parser.add_argument("--timed", type=int, default=config.BENCH_TIMED_STEPS)
        parser.add_argument("--seed", type=int, default=0)

    def run(self, args: argparse.Namespace) -> int:
        bench = BenchConfig(args.vocab, args.d, args.hidden, args.batch_size, args.bptt,
                            args.warmup, args.timed, args.seed)
        for row in bench_heads(args.grid, bench):
            self.app.emit({"head": row.head, "K": row.K, "median_seconds": row.median_seconds,
                           "slowdown": row.slowdown})
        self.app.emit({"reference_mos15_slowdown": list(REFERENCE_MOS15_SLOWDOWN)})
        return 0


def setup(app):
    app.add_command(Bench(app))
