# commands/train.py
# 'train': fits an LSTM language model with a Softmax, MoC or MoS head and saves a checkpoint.

import argparse
import logging

from core import config
from core.app_base import Command
from utils.checkpoint import save_checkpoint
from utils.corpus import MODES, load_corpus
from utils.heads import HEAD_KINDS
from utils.model import build_config
from utils.optim import OPTIMIZERS
from utils.training import TrainConfig, train

logger = logging.getLogger(__name__)

_TIE = {"auto": None, "yes": True, "no": False}


class Train(Command):
    name = "train"
    help = "Train a language model and write a checkpoint."

    def configure(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--corpus", required=True, help="Directory holding train/valid/test.txt.")
        parser.add_argument("--head", required=True, choices=HEAD_KINDS)
        parser.add_argument("--d", type=int, default=32, help="Head context dimension.")
        parser.add_argument("--k", type=int, default=1, help="Mixture components (ignored for softmax).")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out", required=True, help="Checkpoint path.")
        parser.add_argument("--mode", choices=MODES, default="word")
        parser.add_argument("--lowercase", action="store_true")
        parser.add_argument("--max-vocab", type=int, default=10_000)
        parser.add_argument("--hidden", type=int, default=64, help="LSTM hidden size.")
        parser.add_argument("--embed", type=int, default=None, help="Embedding size (default: d).")
        parser.add_argument("--layers", type=int, default=1)
        parser.add_argument("--tie", choices=tuple(_TIE), default="auto")
        parser.add_argument("--no-output-bias", action="store_true")
        parser.add_argument("--no-mixture-bias", action="store_true")
        parser.add_argument("--optimizer", choices=OPTIMIZERS, default="sgd")
        parser.add_argument("--lr", type=float, default=None,
                            help=f"Learning rate (default {config.SGD_LR} for sgd, {config.ADAM_LR} for adam).")
        parser.add_argument("--clip", type=float, default=config.GRAD_CLIP)
        parser.add_argument("--epochs", type=int, default=config.TRAIN_EPOCHS)
        parser.add_argument("--batch-size", type=int, default=config.TRAIN_BATCH_SIZE)
        parser.add_argument("--bptt", type=int, default=config.TRAIN_BPTT_LEN)

    def run(self, args: argparse.Namespace) -> int:
        vocab, splits = load_corpus(args.corpus, args.mode, args.max_vocab, args.lowercase)
        model_cfg = build_config(
            vocab.size, args.head, args.d, args.hidden, args.k, embed_dim=args.embed,
            num_layers=args.layers, output_bias=not args.no_output_bias,
            mixture_bias=not args.no_mixture_bias, tie_weights=_TIE[args.tie],
        )
        lr = args.lr if args.lr is not None else (config.SGD_LR if args.optimizer == "sgd" else config.ADAM_LR)
        cfg = TrainConfig(model_cfg, args.optimizer, lr, args.clip, args.epochs,
                          args.batch_size, args.bptt, args.seed)

        result = train(splits, cfg, vocab, on_epoch=lambda m: self.app.emit(m.to_dict()))
        result.checkpoint.extra["lowercase"] = args.lowercase
        save_checkpoint(result.checkpoint, args.out)
        self.app.emit({"summary": result.summary, "checkpoint": args.out})
        return 0


def setup(app):
    app.add_command(Train(app))
