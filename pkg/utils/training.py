# utils/training.py
# Truncated-BPTT training loop, perplexity/BPC evaluation and capacity matching.

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from core import config
from core.errors import ContractViolation, TrainingFailure
from . import heads
from .checkpoint import Checkpoint
from .corpus import TokenStream, Vocabulary, make_batches
from .heads import HeadConfig
from .model import LanguageModel, ModelConfig, build_config
from .model import count_params as count_model_params
from .optim import OPTIMIZERS, clip_global_norm, make_optimizer
from .time import Stopwatch, format_duration

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    optimizer: str = "sgd"
    lr: float = config.SGD_LR
    grad_clip: float = config.GRAD_CLIP
    epochs: int = config.TRAIN_EPOCHS
    batch_size: int = config.TRAIN_BATCH_SIZE
    bptt_len: int = config.TRAIN_BPTT_LEN
    seed: int = 0

    def validate(self) -> "TrainConfig":
        self.model.validate()
        if self.optimizer not in OPTIMIZERS:
            raise ContractViolation(f"Unknown optimizer {self.optimizer!r}.")
        if self.lr < 0 or self.grad_clip < 0:
            raise ContractViolation("lr and grad_clip must be non-negative.")
        if min(self.epochs, self.batch_size, self.bptt_len) < 1:
            raise ContractViolation("epochs, batch_size and bptt_len must be positive.")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["model"] = self.model.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        data["model"] = ModelConfig.from_dict(data["model"])
        return cls(**data).validate()


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_nll: float
    valid_nll: float
    wall_seconds: float

    def __post_init__(self):
        if not (math.isfinite(self.train_nll) and math.isfinite(self.valid_nll)):
            raise ContractViolation(f"Non-finite metrics at epoch {self.epoch}.")

    @property
    def train_ppl(self) -> float:
        return math.exp(self.train_nll)

    @property
    def valid_ppl(self) -> float:
        return math.exp(self.valid_nll)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_nll": self.train_nll,
            "valid_nll": self.valid_nll,
            "train_ppl": self.train_ppl,
            "valid_ppl": self.valid_ppl,
            "wall_seconds": self.wall_seconds,
        }


@dataclass(frozen=True)
class EvalResult:
    mean_nll: float
    tokens: int

    @property
    def ppl(self) -> float:
        return math.exp(self.mean_nll)

    @property
    def bpc(self) -> float:
        return self.mean_nll / LN2

    def to_dict(self) -> dict:
        return {"nll": self.mean_nll, "ppl": self.ppl, "bpc": self.bpc, "tokens": self.tokens}


@dataclass
class TrainResult:
    metrics: list[EpochMetrics]
    checkpoint: Checkpoint
    summary: dict = field(default_factory=dict)


# --- Parameter counting ---

def count_params(cfg: ModelConfig | HeadConfig) -> int:
    """Exact learnable scalar count of a full model, or of a head on its own."""
    if isinstance(cfg, HeadConfig):
        return heads.count_head_params(cfg.validate())
    return count_model_params(cfg.validate())


def _with_knob(cfg: ModelConfig, kind: str, K: int, knob: str, value: int) -> ModelConfig:
    enc, head = cfg.encoder, cfg.head
    d, hidden, embed = head.d, enc.hidden_dim, enc.embed_dim
    if knob == "d":
        d = value
        if cfg.tied:
            embed = value
    elif knob == "hidden":
        hidden = value
    else:
        raise ContractViolation(f"Unknown capacity knob {knob!r}; expected 'd' or 'hidden'.")
    return build_config(enc.vocab_size, kind, d, hidden, K, embed_dim=embed, num_layers=enc.num_layers,
                        output_bias=head.output_bias, mixture_bias=head.mixture_bias,
                        tie_weights=cfg.tie_weights)


def match_capacity(cfg: ModelConfig, kind: str, K: int, knob: str = "d",
                   tolerance: float = 0.02) -> ModelConfig:
    """Picks the knob value whose parameter count is closest to cfg's; must land within tolerance."""
    target = count_params(cfg)
    start = cfg.head.d if knob == "d" else cfg.encoder.hidden_dim
    best, best_gap = None, math.inf
    for value in range(1, 2 * start + 1):
        candidate = _with_knob(cfg, kind, K, knob, value)
        gap = abs(count_params(candidate) - target) / target
        if gap < best_gap:
            best, best_gap = candidate, gap
    if best_gap > tolerance:
        raise ContractViolation(f"No {knob} value brings {kind}-{K} within {tolerance:.0%} of {target} parameters "
                                f"(best gap {best_gap:.2%}).")
    logger.debug(f"Matched {kind}-{K} via {knob}: {count_params(best)} vs {target} parameters.")
    return best


def capacity_matched_configs(softmax_cfg: ModelConfig, K: int, knob: str = "d",
                             tolerance: float = 0.02) -> dict[str, ModelConfig]:
    """(Softmax, MoC, MoS) configs whose total parameter counts agree within tolerance."""
    if softmax_cfg.head.kind != "softmax":
        raise ContractViolation("Capacity matching starts from a Softmax config.")
    return {
        "softmax": softmax_cfg,
        "moc": match_capacity(softmax_cfg, "moc", K, knob, tolerance),
        "mos": match_capacity(softmax_cfg, "mos", K, knob, tolerance),
    }


# --- Evaluation ---

def _as_model(source: LanguageModel | Checkpoint) -> LanguageModel:
    return source.to_model() if isinstance(source, Checkpoint) else source


def evaluate(source: LanguageModel | Checkpoint, stream: TokenStream, vocab: Vocabulary | None = None) -> EvalResult:
    """Mean NLL over every prediction position with B = 1 state carry."""
    model = _as_model(source)
    if stream.vocab_size != model.vocab_size:
        raise ContractViolation(f"Stream vocabulary size {stream.vocab_size} does not match model's {model.vocab_size}.")
    if isinstance(source, Checkpoint) and vocab is not None and source.vocab is not None \
            and source.vocab.id_to_token != vocab.id_to_token:
        raise ContractViolation("Stream was encoded with a different vocabulary than the checkpoint's.")
    if len(stream) < 2:
        raise ContractViolation("Evaluation needs at least two tokens.")
    targets = stream.ids[1:]
    total, offset = 0.0, 0
    for block in model.stream_log_probs(stream.ids):
        n = block.shape[0]
        total -= float(block[np.arange(n), targets[offset:offset + n]].sum())
        offset += n
    return EvalResult(mean_nll=total / offset, tokens=offset)


# --- Training ---

def _epoch_pass(model: LanguageModel, plan, optimizer=None, grad_clip: float = 0.0,
                step_offset: int = 0, on_step: Callable[[int, float], None] | None = None) -> tuple[float, int]:
    """One pass over the windows; updates parameters only when an optimizer is given."""
    state = model.initial_state(plan.batch_size)
    total, steps = 0.0, 0
    for inputs, targets in plan.windows():
        step = step_offset + steps
        if optimizer is None:
            logp, state = model.log_probs(inputs, state)
            B, L, _ = logp.shape
            loss = float(-logp[np.arange(B)[:, None], np.arange(L)[None, :], targets].mean())
        else:
            loss, grads, state = model.loss_and_grads(inputs, targets, state)
        if not math.isfinite(loss):
            raise TrainingFailure(step, loss)
        if optimizer is not None:
            norm = clip_global_norm(grads, grad_clip)
            optimizer.step(model.params, grads)
            if on_step is not None:
                on_step(step, norm)
        total += loss
        steps += 1
    return total / max(steps, 1), steps


def train(splits: dict[str, TokenStream], cfg: TrainConfig, vocab: Vocabulary | None = None,
          on_epoch: Callable[[EpochMetrics], None] | None = None,
          on_step: Callable[[int, float], None] | None = None) -> TrainResult:
    """
    Trains the configured model on splits['train'] and reports valid NLL per epoch.
    Epoch 0 is the untrained model. Hidden state carries across windows and resets per epoch.
    """
    cfg.validate()
    for name in ("train", "valid"):
        if name not in splits:
            raise ContractViolation(f"Missing corpus split {name!r}.")
    rng = np.random.default_rng(cfg.seed)
    model = LanguageModel.initialize(cfg.model, rng)
    optimizer = make_optimizer(cfg.optimizer, cfg.lr)
    plan = make_batches(splits["train"], cfg.batch_size, cfg.bptt_len)
    logger.info(f"Training {cfg.model.head.kind} head ({count_params(cfg.model)} parameters), "
                f"{plan.num_windows} windows per epoch.")

    metrics: list[EpochMetrics] = []

    def record(epoch: int, train_nll: float, seconds: float, step: int) -> None:
        # step: updates applied so far, i.e. the first step that sees the evaluated parameters
        valid_nll = evaluate(model, splits["valid"]).mean_nll
        if not math.isfinite(valid_nll):
            raise TrainingFailure(step, valid_nll)
        m = EpochMetrics(epoch, train_nll, valid_nll, seconds)
        metrics.append(m)
        logger.info(f"epoch {epoch}: train ppl {m.train_ppl:.2f}, valid ppl {m.valid_ppl:.2f} ({format_duration(m.wall_seconds)})")
        if on_epoch is not None:
            on_epoch(m)

    with Stopwatch() as watch:
        train_nll, _ = _epoch_pass(model, plan)
    record(0, train_nll, watch.seconds, 0)

    step = 0
    for epoch in range(1, cfg.epochs + 1):
        with Stopwatch() as watch:
            train_nll, steps = _epoch_pass(model, plan, optimizer, cfg.grad_clip, step, on_step)
        step += steps
        record(epoch, train_nll, watch.seconds, step)

    summary = {"epochs": cfg.epochs, "steps": step, "params": count_params(cfg.model),
               "final_train_nll": metrics[-1].train_nll, "final_valid_nll": metrics[-1].valid_nll}
    if "test" in splits:
        test = evaluate(model, splits["test"])
        summary.update(test_nll=test.mean_nll, test_ppl=test.ppl, gap=test.mean_nll - metrics[-1].train_nll)

    checkpoint = Checkpoint.from_model(model, vocab, cfg.to_dict(), rng)
    return TrainResult(metrics, checkpoint, summary)
